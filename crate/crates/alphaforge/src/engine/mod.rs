//! Expression evaluation over panels: vectorized batch and incremental
//! streaming, with a strict equivalence contract between the two.
//!
//! Both evaluators drive the same per-instrument kernel state machines in the
//! same order, so `eval_streaming` reproduces `eval_batch` bit for bit; the
//! spec-level tolerance of 1e-9 is satisfied with exact equality. Batch
//! evaluation partitions work by instrument for time-series kernels and by
//! bar for cross-sectional kernels; results are independent of the thread
//! count because every cell is computed by an identical sequential recurrence.

pub mod kernels;
mod stream;

pub use stream::StreamEvaluator;

use rayon::prelude::*;

use crate::data::Panel;
use crate::dsl::{print_expr, Expr, Op};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

use kernels::*;

/// Alpha values aligned to a panel's axes.
#[derive(Debug, Clone)]
pub struct AlphaMatrix {
    pub values: Matrix,
    pub expr_text: String,
}

/// Trailing bars required before the first defined output: along each
/// root-to-leaf path, windows contribute w-1 and delays/deltas contribute d;
/// the maximum over paths is the warm-up length.
pub fn lookback(expr: &Expr) -> usize {
    match expr {
        Expr::Field(_) | Expr::Num(_) | Expr::Int(_) => 0,
        Expr::Call(op, args) => {
            let own = match op {
                Op::TsDelay | Op::TsDelta => window_of(args, 1),
                Op::TsMean | Op::TsStd | Op::TsMin | Op::TsMax | Op::TsRank => {
                    window_of(args, 1) - 1
                }
                Op::TsCorr => window_of(args, 2) - 1,
                _ => 0,
            };
            own + expr.value_children().iter().map(|c| lookback(c)).max().unwrap_or(0)
        }
    }
}

fn window_of(args: &[Expr], slot: usize) -> usize {
    match args.get(slot) {
        Some(Expr::Int(w)) => *w as usize,
        _ => 0, // structure checking rejects this before evaluation
    }
}

/// Per-instrument time-series kernel state, one per (node, instrument).
#[derive(Debug, Clone)]
pub(crate) enum TsState {
    Delay(DelayState),
    Delta(DeltaState),
    Mean(MeanState),
    Std(StdState),
    Extreme(ExtremeState),
    Rank(RankState),
    Corr(CorrState),
}

impl TsState {
    pub(crate) fn new(op: Op, w: usize) -> TsState {
        match op {
            Op::TsDelay => TsState::Delay(DelayState::new(w)),
            Op::TsDelta => TsState::Delta(DeltaState::new(w)),
            Op::TsMean => TsState::Mean(MeanState::new(w)),
            Op::TsStd => TsState::Std(StdState::new(w)),
            Op::TsMin => TsState::Extreme(ExtremeState::new(w, false)),
            Op::TsMax => TsState::Extreme(ExtremeState::new(w, true)),
            Op::TsRank => TsState::Rank(RankState::new(w)),
            Op::TsCorr => TsState::Corr(CorrState::new(w)),
            _ => unreachable!("not a time-series operator"),
        }
    }

    pub(crate) fn push1(&mut self, x: f64) -> f64 {
        match self {
            TsState::Delay(s) => s.push(x),
            TsState::Delta(s) => s.push(x),
            TsState::Mean(s) => s.push(x),
            TsState::Std(s) => s.push(x),
            TsState::Extreme(s) => s.push(x),
            TsState::Rank(s) => s.push(x),
            TsState::Corr(_) => unreachable!("ts_corr needs two inputs"),
        }
    }

    pub(crate) fn push2(&mut self, x: f64, y: f64) -> f64 {
        match self {
            TsState::Corr(s) => s.push(x, y),
            _ => unreachable!("only ts_corr takes two inputs"),
        }
    }
}

pub(crate) fn unary_fn(op: Op) -> fn(f64) -> f64 {
    match op {
        Op::Abs => ew_abs,
        Op::Log => ew_log,
        Op::Sign => ew_sign,
        _ => unreachable!("not an element-wise unary operator"),
    }
}

pub(crate) fn binary_fn(op: Op) -> fn(f64, f64) -> f64 {
    match op {
        Op::Add => ew_add,
        Op::Sub => ew_sub,
        Op::Mul => ew_mul,
        Op::Div => ew_div,
        _ => unreachable!("not an element-wise binary operator"),
    }
}

pub(crate) fn apply_cs_row(op: Op, row: &mut [f64], group_ids: &[usize], n_groups: usize) {
    match op {
        Op::CsRank => cs_rank_row(row),
        Op::CsZscore => cs_zscore_row(row),
        Op::GroupMean => group_mean_row(row, group_ids, n_groups),
        Op::GroupNeutralize => group_neutralize_row(row, group_ids, n_groups),
        _ => unreachable!("not a cross-sectional operator"),
    }
}

struct EvalCtx<'a> {
    panel: &'a Panel,
    group_ids: Vec<usize>,
    n_groups: usize,
    pool: Option<rayon::ThreadPool>,
}

/// Vectorized evaluation with instrument-partition parallelism.
///
/// The result is bit-identical for every `threads` value: time-series columns
/// and cross-sectional bars are each computed by a fixed sequential recurrence
/// regardless of how they are distributed over workers.
pub fn eval_batch(expr: &Expr, panel: &Panel, threads: usize) -> Result<AlphaMatrix> {
    if threads < 1 {
        return Err(Error::InvalidArgument("threads must be >= 1".into()));
    }
    expr.check_structure()?;
    let (group_ids, group_labels) = panel.group_ids();
    let pool = if threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let ctx = EvalCtx { panel, group_ids, n_groups: group_labels.len(), pool };
    let values = eval_node(expr, &ctx)?;
    Ok(AlphaMatrix { values, expr_text: print_expr(expr) })
}

fn eval_node(expr: &Expr, ctx: &EvalCtx) -> Result<Matrix> {
    let t = ctx.panel.t();
    let n = ctx.panel.n();
    match expr {
        Expr::Field(f) => Ok(ctx.panel.field(*f)?.clone()),
        Expr::Num(v) => Ok(Matrix::constant(t, n, *v)),
        Expr::Int(_) => Err(Error::InvalidArgument("window literal used as a value".into())),
        Expr::Call(op, args) => match op {
            Op::Add | Op::Sub | Op::Mul | Op::Div => {
                let a = eval_node(&args[0], ctx)?;
                let b = eval_node(&args[1], ctx)?;
                let f = binary_fn(*op);
                let data = run(ctx, || {
                    a.data().par_iter().zip(b.data().par_iter()).map(|(x, y)| f(*x, *y)).collect()
                });
                Matrix::from_vec(t, n, data)
            }
            Op::Abs | Op::Log | Op::Sign => {
                let a = eval_node(&args[0], ctx)?;
                let f = unary_fn(*op);
                let data = run(ctx, || a.data().par_iter().map(|x| f(*x)).collect());
                Matrix::from_vec(t, n, data)
            }
            Op::TsDelay | Op::TsDelta | Op::TsMean | Op::TsStd | Op::TsMin | Op::TsMax
            | Op::TsRank => {
                let a = eval_node(&args[0], ctx)?;
                let w = window_of(args, 1);
                let op = *op;
                let columns: Vec<Vec<f64>> = run(ctx, || {
                    (0..n)
                        .into_par_iter()
                        .map(|j| {
                            let mut state = TsState::new(op, w);
                            (0..t).map(|row| state.push1(a.get(row, j))).collect()
                        })
                        .collect()
                });
                Ok(from_columns(t, n, columns))
            }
            Op::TsCorr => {
                let a = eval_node(&args[0], ctx)?;
                let b = eval_node(&args[1], ctx)?;
                let w = window_of(args, 2);
                let columns: Vec<Vec<f64>> = run(ctx, || {
                    (0..n)
                        .into_par_iter()
                        .map(|j| {
                            let mut state = TsState::new(Op::TsCorr, w);
                            (0..t).map(|row| state.push2(a.get(row, j), b.get(row, j))).collect()
                        })
                        .collect()
                });
                Ok(from_columns(t, n, columns))
            }
            Op::CsRank | Op::CsZscore | Op::GroupMean | Op::GroupNeutralize => {
                let a = eval_node(&args[0], ctx)?;
                let op = *op;
                let rows: Vec<Vec<f64>> = run(ctx, || {
                    (0..t)
                        .into_par_iter()
                        .map(|row| {
                            let mut r = a.row(row).to_vec();
                            apply_cs_row(op, &mut r, &ctx.group_ids, ctx.n_groups);
                            r
                        })
                        .collect()
                });
                Matrix::from_vec(t, n, rows.concat())
            }
        },
    }
}

/// Run a rayon computation on the configured pool, or inline when single-threaded.
fn run<R: Send>(ctx: &EvalCtx, f: impl FnOnce() -> R + Send) -> R {
    match &ctx.pool {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

fn from_columns(t: usize, n: usize, columns: Vec<Vec<f64>>) -> Matrix {
    let mut m = Matrix::missing(t, n);
    for (j, col) in columns.into_iter().enumerate() {
        for (row, v) in col.into_iter().enumerate() {
            m.set(row, j, v);
        }
    }
    m
}

/// Incremental bar-by-bar evaluation; equals `eval_batch` bit for bit.
pub fn eval_streaming(expr: &Expr, panel: &Panel) -> Result<AlphaMatrix> {
    let mut evaluator = StreamEvaluator::new(expr, panel)?;
    let t = panel.t();
    let n = panel.n();
    let mut values = Matrix::missing(t, n);
    for row in 0..t {
        let out = evaluator.push_bar(panel, row)?;
        values.row_mut(row).copy_from_slice(&out);
    }
    Ok(AlphaMatrix { values, expr_text: print_expr(expr) })
}

/// CSV export: date column plus one column per instrument, missing as empty.
pub fn alpha_to_csv(alpha: &AlphaMatrix, panel: &Panel) -> String {
    let mut out = String::from("date");
    for sym in panel.instruments() {
        out.push(',');
        out.push_str(sym);
    }
    out.push('\n');
    for row in 0..alpha.values.rows() {
        out.push_str(&panel.dates()[row].format("%Y-%m-%d").to_string());
        for j in 0..alpha.values.cols() {
            out.push(',');
            let v = alpha.values.get(row, j);
            if !crate::matrix::is_missing(v) {
                out.push_str(&format!("{}", v));
            }
        }
        out.push('\n');
    }
    out
}
