/* C interface for the alphaforge engine.
 *
 * Maintained by hand alongside crates/alphaforge-ffi/src/lib.rs; keep the two
 * in sync when the surface changes.
 *
 * Conventions:
 *   - Functions return AfStatus (AF_OK = 0 on success) or a pointer that is
 *     null on failure.
 *   - The failure message for the current thread is available via
 *     af_last_error(); the pointer stays valid until the next failing call
 *     on the same thread and must not be freed.
 *   - Handles are opaque; release them with the matching *_free function.
 *   - Strings are NUL-terminated UTF-8. Missing values are NaN.
 */

#ifndef ALPHAFORGE_H
#define ALPHAFORGE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum AfStatus {
  AF_OK = 0,
  AF_NULL_ARGUMENT = 1,
  AF_INVALID_UTF8 = 2,
  AF_SYNTAX_ERROR = 3,
  AF_UNIT_ERROR = 4,
  AF_SEMANTIC_ERROR = 5,
  AF_EVAL_ERROR = 6,
  AF_IO_ERROR = 7,
} AfStatus;

typedef struct AfPanel AfPanel;
typedef struct AfAlpha AfAlpha;

/* Message for the most recent failure on this thread. */
const char *af_last_error(void);

/* Load a panel from CSV (strict != 0 rejects malformed rows instead of
 * skipping them). Returns null on failure. */
AfPanel *af_panel_load_csv(const char *path, int strict);

/* Generate a seeded synthetic OHLCV panel. Returns null on failure. */
AfPanel *af_panel_synthetic(size_t dates, size_t instruments, size_t sectors,
                            uint64_t seed);

size_t af_panel_rows(const AfPanel *panel);
size_t af_panel_cols(const AfPanel *panel);
void af_panel_free(AfPanel *panel);

/* Validate an expression against the grammar, unit, and semantic rules.
 * Returns AF_OK when usable; otherwise the specific rejection code, with the
 * message in af_last_error(). */
AfStatus af_validate(const char *expression);

/* Evaluate an expression over a panel. On AF_OK, *out owns a new alpha
 * handle. threads >= 1 controls batch parallelism and never changes the
 * result; streaming != 0 evaluates bar by bar (bit-identical to batch). */
AfStatus af_eval(const char *expression, const AfPanel *panel, size_t threads,
                 int streaming, AfAlpha **out);

size_t af_alpha_rows(const AfAlpha *alpha);
size_t af_alpha_cols(const AfAlpha *alpha);

/* Copy the row-major values into buffer (capacity in doubles, must be at
 * least rows * cols). Missing cells are NaN. */
AfStatus af_alpha_values(const AfAlpha *alpha, double *buffer,
                         size_t capacity);

void af_alpha_free(AfAlpha *alpha);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ALPHAFORGE_H */
