//! The alpha expression language: a fixed 19-operator set over panel fields.
//!
//! Expressions are stored and printed in canonical function-call form
//! (`sub(ts_mean(close, 5), ts_mean(close, 20))`); the parser additionally
//! accepts infix arithmetic sugar (`+ - * /` with standard precedence) and
//! desugars it to the canonical calls.

mod lexer;
mod parser;

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;

use crate::error::{Error, Result};

/// Maximum tree depth accepted by the parser and the GP search.
pub const MAX_DEPTH: usize = 10;
/// Largest legal window/period argument.
pub const WINDOW_CAP: i64 = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    Open,
    High,
    Low,
    Close,
    Volume,
    Vwap,
}

impl Field {
    pub const ALL: [Field; 6] =
        [Field::Open, Field::High, Field::Low, Field::Close, Field::Volume, Field::Vwap];

    pub fn name(self) -> &'static str {
        match self {
            Field::Open => "open",
            Field::High => "high",
            Field::Low => "low",
            Field::Close => "close",
            Field::Volume => "volume",
            Field::Vwap => "vwap",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        Field::ALL.iter().copied().find(|f| f.name() == name)
    }

    pub fn is_price(self) -> bool {
        !matches!(self, Field::Volume)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Abs,
    Log,
    Sign,
    TsDelay,
    TsDelta,
    TsMean,
    TsStd,
    TsMin,
    TsMax,
    TsRank,
    TsCorr,
    CsRank,
    CsZscore,
    GroupMean,
    GroupNeutralize,
}

/// How an operator's output unit relates to its inputs (see `semantics`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitRule {
    /// Children must share one unit, which is returned (add, sub).
    SameAsChildren,
    /// Exponent vectors add (mul).
    Multiply,
    /// Exponent vectors subtract (div).
    Divide,
    /// Unit of the first series child is preserved.
    Preserve,
    /// Output is dimensionless regardless of inputs.
    Dimensionless,
}

#[derive(Debug, Clone, Copy)]
pub struct OpSpec {
    pub op: Op,
    pub name: &'static str,
    /// Total argument count, including the window/period slot if any.
    pub arity: usize,
    /// Index of the integer window/period argument, if the operator has one.
    pub window_slot: Option<usize>,
    /// Smallest legal window/period value.
    pub min_window: i64,
    pub unit_rule: UnitRule,
}

/// The fixed 19-operator set.
pub const OPERATOR_TABLE: [OpSpec; 19] = [
    OpSpec { op: Op::Add, name: "add", arity: 2, window_slot: None, min_window: 0, unit_rule: UnitRule::SameAsChildren },
    OpSpec { op: Op::Sub, name: "sub", arity: 2, window_slot: None, min_window: 0, unit_rule: UnitRule::SameAsChildren },
    OpSpec { op: Op::Mul, name: "mul", arity: 2, window_slot: None, min_window: 0, unit_rule: UnitRule::Multiply },
    OpSpec { op: Op::Div, name: "div", arity: 2, window_slot: None, min_window: 0, unit_rule: UnitRule::Divide },
    OpSpec { op: Op::Abs, name: "abs", arity: 1, window_slot: None, min_window: 0, unit_rule: UnitRule::Preserve },
    OpSpec { op: Op::Log, name: "log", arity: 1, window_slot: None, min_window: 0, unit_rule: UnitRule::Dimensionless },
    OpSpec { op: Op::Sign, name: "sign", arity: 1, window_slot: None, min_window: 0, unit_rule: UnitRule::Dimensionless },
    OpSpec { op: Op::TsDelay, name: "ts_delay", arity: 2, window_slot: Some(1), min_window: 1, unit_rule: UnitRule::Preserve },
    OpSpec { op: Op::TsDelta, name: "ts_delta", arity: 2, window_slot: Some(1), min_window: 1, unit_rule: UnitRule::Preserve },
    OpSpec { op: Op::TsMean, name: "ts_mean", arity: 2, window_slot: Some(1), min_window: 1, unit_rule: UnitRule::Preserve },
    OpSpec { op: Op::TsStd, name: "ts_std", arity: 2, window_slot: Some(1), min_window: 2, unit_rule: UnitRule::Preserve },
    OpSpec { op: Op::TsMin, name: "ts_min", arity: 2, window_slot: Some(1), min_window: 1, unit_rule: UnitRule::Preserve },
    OpSpec { op: Op::TsMax, name: "ts_max", arity: 2, window_slot: Some(1), min_window: 1, unit_rule: UnitRule::Preserve },
    OpSpec { op: Op::TsRank, name: "ts_rank", arity: 2, window_slot: Some(1), min_window: 1, unit_rule: UnitRule::Dimensionless },
    OpSpec { op: Op::TsCorr, name: "ts_corr", arity: 3, window_slot: Some(2), min_window: 2, unit_rule: UnitRule::Dimensionless },
    OpSpec { op: Op::CsRank, name: "cs_rank", arity: 1, window_slot: None, min_window: 0, unit_rule: UnitRule::Dimensionless },
    OpSpec { op: Op::CsZscore, name: "cs_zscore", arity: 1, window_slot: None, min_window: 0, unit_rule: UnitRule::Dimensionless },
    OpSpec { op: Op::GroupMean, name: "group_mean", arity: 1, window_slot: None, min_window: 0, unit_rule: UnitRule::Preserve },
    OpSpec { op: Op::GroupNeutralize, name: "group_neutralize", arity: 1, window_slot: None, min_window: 0, unit_rule: UnitRule::Preserve },
];

pub fn op_spec(op: Op) -> &'static OpSpec {
    OPERATOR_TABLE.iter().find(|s| s.op == op).expect("operator table covers every op")
}

pub fn op_spec_by_name(name: &str) -> Option<&'static OpSpec> {
    OPERATOR_TABLE.iter().find(|s| s.name == name)
}

/// Alpha expression tree.
///
/// `Int` literals occur only in window/period slots; every other numeric
/// literal parses as `Num` so that printing and reparsing is the identity.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Field(Field),
    Int(i64),
    Num(f64),
    Call(Op, Vec<Expr>),
}

impl Expr {
    pub fn depth(&self) -> usize {
        match self {
            Expr::Call(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    /// Total node count including literals.
    pub fn complexity(&self) -> usize {
        match self {
            Expr::Call(_, args) => 1 + args.iter().map(Expr::complexity).sum::<usize>(),
            _ => 1,
        }
    }

    /// Structural validity against the operator table: arity, window slots,
    /// window ranges, and the depth cap.
    pub fn check_structure(&self) -> Result<()> {
        self.check_structure_inner()?;
        let depth = self.depth();
        if depth > MAX_DEPTH {
            return Err(Error::DepthCap { depth, cap: MAX_DEPTH });
        }
        Ok(())
    }

    fn check_structure_inner(&self) -> Result<()> {
        match self {
            Expr::Field(_) | Expr::Num(_) => Ok(()),
            Expr::Int(_) => Err(Error::InvalidArgument(
                "integer literal outside a window slot".into(),
            )),
            Expr::Call(op, args) => {
                let spec = op_spec(*op);
                if args.len() != spec.arity {
                    return Err(Error::Arity {
                        op: spec.name.into(),
                        expected: spec.arity,
                        got: args.len(),
                    });
                }
                for (i, arg) in args.iter().enumerate() {
                    if Some(i) == spec.window_slot {
                        match arg {
                            Expr::Int(w) if (spec.min_window..=WINDOW_CAP).contains(w) => {}
                            other => {
                                return Err(Error::WindowRange {
                                    op: spec.name.into(),
                                    min: spec.min_window,
                                    max: WINDOW_CAP,
                                    got: print_expr(other),
                                })
                            }
                        }
                    } else {
                        arg.check_structure_inner()?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Child expressions in value (non-window) positions.
    pub fn value_children(&self) -> Vec<&Expr> {
        match self {
            Expr::Call(op, args) => {
                let spec = op_spec(*op);
                args.iter()
                    .enumerate()
                    .filter(|(i, _)| Some(*i) != spec.window_slot)
                    .map(|(_, a)| a)
                    .collect()
            }
            _ => Vec::new(),
        }
    }
}

/// Canonical function-call rendering; `parse(print_expr(e))` is structurally `e`.
pub fn print_expr(expr: &Expr) -> String {
    match expr {
        Expr::Field(f) => f.name().to_string(),
        Expr::Int(v) => v.to_string(),
        Expr::Num(v) => format_num(*v),
        Expr::Call(op, args) => {
            let spec = op_spec(*op);
            let rendered: Vec<String> = args.iter().map(print_expr).collect();
            format!("{}({})", spec.name, rendered.join(", "))
        }
    }
}

/// Shortest round-trip decimal rendering of a numeric literal.
fn format_num(v: f64) -> String {
    // Rust's Display for f64 is the shortest representation that reparses to
    // the same bits, which is exactly the canonical-form requirement.
    format!("{}", v)
}

/// Node count of the expression, literals included.
pub fn complexity(expr: &Expr) -> usize {
    expr.complexity()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_table_is_the_fixed_nineteen() {
        assert_eq!(OPERATOR_TABLE.len(), 19);
        let mut names: Vec<&str> = OPERATOR_TABLE.iter().map(|s| s.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 19, "operator names must be unique");
    }

    #[test]
    fn complexity_counts_every_node() {
        let e = parse("sub(ts_mean(close, 5), ts_mean(close, 20))").unwrap();
        assert_eq!(complexity(&e), 7);
        assert_eq!(complexity(&parse("close").unwrap()), 1);
        assert_eq!(complexity(&parse("log(close)").unwrap()), 2);
    }

    #[test]
    fn print_matches_spec_form() {
        let e = Expr::Call(
            Op::Add,
            vec![
                Expr::Field(Field::Close),
                Expr::Call(Op::Mul, vec![Expr::Num(2.0), Expr::Field(Field::Vwap)]),
            ],
        );
        assert_eq!(print_expr(&e), "add(close, mul(2, vwap))");
        assert_eq!(print_expr(&Expr::Field(Field::Close)), "close");
    }

    #[test]
    fn depth_cap_enforced() {
        // Nested abs calls, depth 11.
        let mut e = Expr::Field(Field::Close);
        for _ in 0..10 {
            e = Expr::Call(Op::Abs, vec![e]);
        }
        assert!(matches!(e.check_structure(), Err(Error::DepthCap { .. })));
    }
}
