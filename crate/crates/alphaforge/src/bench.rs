//! Benchmark harness for the evaluation engine. Correctness precedes speed:
//! outputs at every thread count must be bit-identical to the single-thread
//! run, or the benchmark fails outright.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::generate_synthetic;
use crate::dsl::Expr;
use crate::engine::{eval_batch, eval_streaming};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub case: String,
    pub threads: usize,
    pub wall_seconds: f64,
    /// Output cells produced per second of wall time.
    pub throughput_cells_per_sec: f64,
    /// Wall time at 1 thread divided by wall time at this thread count.
    pub speedup_vs_one_thread: f64,
}

/// Time `eval_batch` on a seeded synthetic panel at each thread count, then
/// one streaming pass. Any bitwise divergence from the 1-thread batch result
/// is a hard error.
pub fn bench_eval(
    expr: &Expr,
    dates: usize,
    instruments: usize,
    threads: &[usize],
    seed: u64,
) -> Result<Vec<BenchReport>> {
    if threads.is_empty() || threads.contains(&0) {
        return Err(Error::InvalidArgument("thread counts must be >= 1".into()));
    }
    let (panel, _labels) = generate_synthetic(dates, instruments, 2, None, 0.0, seed)?;
    let cells = (dates * instruments) as f64;
    let case = crate::dsl::print_expr(expr);

    let mut reports = Vec::new();
    let baseline = eval_batch(expr, &panel, 1)?;
    let mut one_thread_time = None;
    for &t in threads {
        let start = Instant::now();
        let out = eval_batch(expr, &panel, t)?;
        let wall = start.elapsed().as_secs_f64();
        if !out.values.bitwise_eq(&baseline.values) {
            return Err(Error::ShapeMismatch(format!(
                "batch output at {t} thread(s) is not bit-identical to the 1-thread result"
            )));
        }
        if t == 1 {
            one_thread_time = Some(wall);
        }
        reports.push(BenchReport {
            case: case.clone(),
            threads: t,
            wall_seconds: wall,
            throughput_cells_per_sec: cells / wall,
            speedup_vs_one_thread: f64::NAN,
        });
    }
    let t1 = one_thread_time.unwrap_or(reports[0].wall_seconds);
    for r in &mut reports {
        r.speedup_vs_one_thread = if r.threads == 1 { 1.0 } else { t1 / r.wall_seconds };
    }

    let start = Instant::now();
    let streamed = eval_streaming(expr, &panel)?;
    let wall = start.elapsed().as_secs_f64();
    if !streamed.values.bitwise_eq(&baseline.values) {
        return Err(Error::ShapeMismatch(
            "streaming output is not bit-identical to the batch result".into(),
        ));
    }
    reports.push(BenchReport {
        case: format!("{case} [streaming]"),
        threads: 1,
        wall_seconds: wall,
        throughput_cells_per_sec: cells / wall,
        speedup_vs_one_thread: t1 / wall,
    });
    Ok(reports)
}

/// Render reports as a markdown table.
pub fn to_markdown(reports: &[BenchReport]) -> String {
    let mut out = String::from(
        "| case | threads | wall (s) | cells/s | speedup vs 1 |\n|---|---|---|---|---|\n",
    );
    for r in reports {
        out.push_str(&format!(
            "| {} | {} | {:.4} | {:.0} | {:.2} |\n",
            r.case, r.threads, r.wall_seconds, r.throughput_cells_per_sec, r.speedup_vs_one_thread
        ));
    }
    out
}
