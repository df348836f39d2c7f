//! The invalid-alpha rule base: unit-consistency inference, value-domain
//! rules, and semantic checking against a fixed mock panel.
//!
//! Validation is a three-stage pipeline — parse, unit inference, mock-data
//! evaluation — and the first failing stage determines the verdict. The mock
//! panel is generated deterministically (seed 42, 10 instruments × 60 bars,
//! 2 sectors), so verdicts are stable across runs, machines, and thread
//! counts.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, Panel};
use crate::dsl::{op_spec, parse, Expr, Field, UnitRule};
use crate::engine::{eval_batch, lookback};
use crate::error::Error;
use crate::matrix::is_missing;

/// Exponent cap; anything beyond it is degenerate GP growth, not a unit.
pub const MAX_UNIT_EXP: i8 = 4;

/// Integer exponents over the base dimensions (price, volume).
///
/// Prices (open/high/low/close/vwap) are `(1, 0)`, volume is `(0, 1)`,
/// numeric literals and normalized quantities are dimensionless `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub price_exp: i8,
    pub volume_exp: i8,
}

impl Unit {
    pub const DIMENSIONLESS: Unit = Unit { price_exp: 0, volume_exp: 0 };

    pub fn new(price_exp: i8, volume_exp: i8) -> Unit {
        Unit { price_exp, volume_exp }
    }

    pub fn is_dimensionless(self) -> bool {
        self == Unit::DIMENSIONLESS
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.price_exp, self.volume_exp)
    }
}

/// Infer the unit of an expression, or report the first incompatibility.
///
/// `add`/`sub` require identical child units (a dimensionless literal next to
/// a dimensioned series is an error); `mul`/`div` add/subtract exponent
/// vectors; smoothing operators preserve their input's unit; rank-, score-,
/// and correlation-like operators return dimensionless.
pub fn infer_unit(expr: &Expr) -> Result<Unit, Error> {
    match expr {
        Expr::Field(f) => Ok(if f.is_price() { Unit::new(1, 0) } else { Unit::new(0, 1) }),
        Expr::Num(_) | Expr::Int(_) => Ok(Unit::DIMENSIONLESS),
        Expr::Call(op, _) => {
            let spec = op_spec(*op);
            let children: Vec<Unit> =
                expr.value_children().iter().map(|c| infer_unit(c)).collect::<Result<_, _>>()?;
            match spec.unit_rule {
                UnitRule::SameAsChildren => {
                    if children[0] == children[1] {
                        Ok(children[0])
                    } else {
                        Err(Error::Unit {
                            op: spec.name.into(),
                            left: children[0].to_string(),
                            right: children[1].to_string(),
                        })
                    }
                }
                UnitRule::Multiply => combine(spec.name, children[0], children[1], 1),
                UnitRule::Divide => combine(spec.name, children[0], children[1], -1),
                UnitRule::Preserve => Ok(children[0]),
                UnitRule::Dimensionless => Ok(Unit::DIMENSIONLESS),
            }
        }
    }
}

fn combine(op: &str, a: Unit, b: Unit, sign: i8) -> Result<Unit, Error> {
    let p = a.price_exp + sign * b.price_exp;
    let v = a.volume_exp + sign * b.volume_exp;
    if p.abs() > MAX_UNIT_EXP || v.abs() > MAX_UNIT_EXP {
        return Err(Error::Unit {
            op: op.into(),
            left: a.to_string(),
            right: b.to_string(),
        });
    }
    Ok(Unit::new(p, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    SyntaxError,
    UnitError,
    SemanticError,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Valid => "valid",
            Verdict::SyntaxError => "syntax_error",
            Verdict::UnitError => "unit_error",
            Verdict::SemanticError => "semantic_error",
        }
    }
}

/// Fraction statistics measured on the mock panel after the warm-up rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationStats {
    pub missing_fraction: f64,
    pub zero_variance_bar_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub verdict: Verdict,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<ValidationStats>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        matches!(self.verdict, Verdict::Valid)
    }

    /// One-line rendering, e.g. `unit_error: incompatible units ...`.
    pub fn render_line(&self) -> String {
        let mut line = self.verdict.as_str().to_string();
        if !self.message.is_empty() {
            line.push_str(": ");
            line.push_str(&self.message);
        }
        if let Some(off) = self.offset {
            line.push_str(&format!(" (at byte {off})"));
        }
        line
    }

    fn valid(stats: ValidationStats) -> ValidationReport {
        ValidationReport { verdict: Verdict::Valid, message: String::new(), offset: None, stats: Some(stats) }
    }

    fn fail(verdict: Verdict, message: String, offset: Option<usize>) -> ValidationReport {
        ValidationReport { verdict, message, offset, stats: None }
    }
}

/// The fixed mock panel used for semantic checks: seed 42, 10 instruments ×
/// 60 bars, 2 sectors, no planted signal.
pub fn mock_panel() -> &'static Panel {
    static PANEL: OnceLock<Panel> = OnceLock::new();
    PANEL.get_or_init(|| {
        let (panel, _) =
            generate_synthetic(60, 10, 2, None, 0.0, 42).expect("mock panel parameters are valid");
        panel
    })
}

/// Evaluate on mock data and classify degenerate alphas. Never aborts.
pub fn check_semantics(expr: &Expr, mock: &Panel) -> ValidationReport {
    let alpha = match eval_batch(expr, mock, 1) {
        Ok(a) => a,
        Err(e) => return ValidationReport::fail(Verdict::SemanticError, e.to_string(), None),
    };
    let t = mock.t();
    let n = mock.n();
    let warmup = lookback(expr).min(t);
    let live_rows = t - warmup;
    if live_rows == 0 {
        return ValidationReport::fail(
            Verdict::SemanticError,
            format!("warm-up of {warmup} bars consumes the whole {t}-bar mock panel"),
            None,
        );
    }
    let mut missing = 0usize;
    let mut zero_var_bars = 0usize;
    for row in warmup..t {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut defined = 0usize;
        for j in 0..n {
            let v = alpha.values.get(row, j);
            if is_missing(v) {
                missing += 1;
            } else {
                defined += 1;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        // A bar with fewer than two defined values carries no cross-sectional
        // information, so it counts as zero-variance.
        if defined < 2 || lo == hi {
            zero_var_bars += 1;
        }
    }
    let stats = ValidationStats {
        missing_fraction: missing as f64 / (live_rows * n) as f64,
        zero_variance_bar_fraction: zero_var_bars as f64 / live_rows as f64,
    };
    if stats.missing_fraction == 1.0 {
        return ValidationReport::fail(
            Verdict::SemanticError,
            "alpha is missing everywhere after warm-up on mock data".into(),
            None,
        );
    }
    if stats.zero_variance_bar_fraction == 1.0 {
        return ValidationReport::fail(
            Verdict::SemanticError,
            "alpha has zero cross-sectional variance on every mock bar".into(),
            None,
        );
    }
    ValidationReport::valid(stats)
}

/// Full pipeline: parse → unit inference → mock-data semantics.
/// The first failing stage determines the verdict.
pub fn validate(text: &str) -> ValidationReport {
    let expr = match parse(text) {
        Ok(e) => e,
        Err(e) => {
            let offset = match &e {
                Error::Syntax { offset, .. } => Some(*offset),
                _ => None,
            };
            return ValidationReport::fail(Verdict::SyntaxError, e.to_string(), offset);
        }
    };
    validate_expr(&expr)
}

/// Validation for an already-parsed expression (unit + semantic stages).
pub fn validate_expr(expr: &Expr) -> ValidationReport {
    if let Err(e) = expr.check_structure() {
        return ValidationReport::fail(Verdict::SyntaxError, e.to_string(), None);
    }
    if let Err(e) = infer_unit(expr) {
        return ValidationReport::fail(Verdict::UnitError, e.to_string(), None);
    }
    check_semantics(expr, mock_panel())
}

/// Convenience: a price-unit field name is interchangeable with `close` for
/// unit purposes; exposed for the GP terminal samplers.
pub fn field_unit(f: Field) -> Unit {
    if f.is_price() {
        Unit::new(1, 0)
    } else {
        Unit::new(0, 1)
    }
}
