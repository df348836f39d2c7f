//! Incremental bar-by-bar evaluator.
//!
//! The expression tree is flattened into a post-order node list; each bar is
//! pushed through the list in one pass. Time-series nodes keep one kernel
//! state machine per instrument — the same machines batch evaluation folds —
//! and cross-sectional nodes act as a bar barrier, transforming the full
//! cross-section produced by their child before downstream nodes consume it.

use crate::data::Panel;
use crate::dsl::{Expr, Field, Op};
use crate::error::{Error, Result};

use super::{apply_cs_row, binary_fn, unary_fn, window_of, TsState};

enum NodeKind {
    Field(Field),
    Const(f64),
    Unary(fn(f64) -> f64),
    Binary(fn(f64, f64) -> f64),
    /// One state machine per instrument; single input.
    Ts(Vec<TsState>),
    /// One state machine per instrument; paired inputs (ts_corr).
    TsPair(Vec<TsState>),
    /// Cross-sectional / group-wise bar barrier.
    Cs(Op),
}

struct Node {
    kind: NodeKind,
    children: Vec<usize>,
    /// This node's output for the current bar.
    out: Vec<f64>,
}

/// Evaluates an expression one bar at a time.
///
/// Feed bars strictly in order via [`push_bar`](Self::push_bar); each call
/// returns the alpha cross-section for that bar. Outputs are bit-identical to
/// [`eval_batch`](super::eval_batch) on the same panel prefix.
pub struct StreamEvaluator {
    nodes: Vec<Node>,
    root: usize,
    n: usize,
    group_ids: Vec<usize>,
    n_groups: usize,
    next_bar: usize,
}

impl StreamEvaluator {
    pub fn new(expr: &Expr, panel: &Panel) -> Result<StreamEvaluator> {
        expr.check_structure()?;
        let n = panel.n();
        let mut nodes = Vec::new();
        let root = flatten(expr, panel, n, &mut nodes)?;
        let (group_ids, group_labels) = panel.group_ids();
        Ok(StreamEvaluator {
            nodes,
            root,
            n,
            group_ids,
            n_groups: group_labels.len(),
            next_bar: 0,
        })
    }

    /// Consume bar `t` of `panel` and return the alpha values for that bar.
    ///
    /// Bars must arrive in order starting at 0 against a panel with the same
    /// instrument axis the evaluator was built from.
    pub fn push_bar(&mut self, panel: &Panel, t: usize) -> Result<Vec<f64>> {
        if panel.n() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "panel has {} instruments, evaluator was built for {}",
                panel.n(),
                self.n
            )));
        }
        if t != self.next_bar {
            return Err(Error::InvalidArgument(format!(
                "bars must be pushed in order: expected bar {}, got {t}",
                self.next_bar
            )));
        }
        if t >= panel.t() {
            return Err(Error::InvalidArgument(format!(
                "bar {t} is out of range for a panel with {} bars",
                panel.t()
            )));
        }
        self.next_bar += 1;

        for idx in 0..self.nodes.len() {
            // Split so a node can read its children's outputs while writing
            // its own.
            let (done, rest) = self.nodes.split_at_mut(idx);
            let node = &mut rest[0];
            match &mut node.kind {
                NodeKind::Field(f) => {
                    let m = panel.field(*f)?;
                    node.out.copy_from_slice(m.row(t));
                }
                NodeKind::Const(v) => {
                    node.out.fill(*v);
                }
                NodeKind::Unary(f) => {
                    let a = &done[node.children[0]].out;
                    for j in 0..self.n {
                        node.out[j] = f(a[j]);
                    }
                }
                NodeKind::Binary(f) => {
                    let a = &done[node.children[0]].out;
                    let b = &done[node.children[1]].out;
                    for j in 0..self.n {
                        node.out[j] = f(a[j], b[j]);
                    }
                }
                NodeKind::Ts(states) => {
                    let a = &done[node.children[0]].out;
                    for j in 0..self.n {
                        node.out[j] = states[j].push1(a[j]);
                    }
                }
                NodeKind::TsPair(states) => {
                    let a = &done[node.children[0]].out;
                    let b = &done[node.children[1]].out;
                    for j in 0..self.n {
                        node.out[j] = states[j].push2(a[j], b[j]);
                    }
                }
                NodeKind::Cs(op) => {
                    let a = &done[node.children[0]].out;
                    node.out.copy_from_slice(a);
                    apply_cs_row(*op, &mut node.out, &self.group_ids, self.n_groups);
                }
            }
        }
        Ok(self.nodes[self.root].out.clone())
    }

    /// Number of bars consumed so far.
    pub fn bars_consumed(&self) -> usize {
        self.next_bar
    }
}

fn flatten(expr: &Expr, panel: &Panel, n: usize, nodes: &mut Vec<Node>) -> Result<usize> {
    let (kind, children) = match expr {
        Expr::Field(f) => {
            panel.field(*f)?; // fail at construction, not mid-stream
            (NodeKind::Field(*f), vec![])
        }
        Expr::Num(v) => (NodeKind::Const(*v), vec![]),
        Expr::Int(_) => {
            return Err(Error::InvalidArgument("window literal used as a value".into()))
        }
        Expr::Call(op, args) => {
            let mut children = Vec::new();
            for c in expr.value_children() {
                children.push(flatten(c, panel, n, nodes)?);
            }
            let kind = match op {
                Op::Abs | Op::Log | Op::Sign => NodeKind::Unary(unary_fn(*op)),
                Op::Add | Op::Sub | Op::Mul | Op::Div => NodeKind::Binary(binary_fn(*op)),
                Op::TsCorr => {
                    let w = window_of(args, 2);
                    NodeKind::TsPair((0..n).map(|_| TsState::new(*op, w)).collect())
                }
                Op::TsDelay | Op::TsDelta | Op::TsMean | Op::TsStd | Op::TsMin | Op::TsMax
                | Op::TsRank => {
                    let w = window_of(args, 1);
                    NodeKind::Ts((0..n).map(|_| TsState::new(*op, w)).collect())
                }
                Op::CsRank | Op::CsZscore | Op::GroupMean | Op::GroupNeutralize => {
                    NodeKind::Cs(*op)
                }
            };
            (kind, children)
        }
    };
    nodes.push(Node { kind, children, out: vec![f64::NAN; n] });
    Ok(nodes.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;
    use crate::dsl::parse;

    #[test]
    fn bars_must_arrive_in_order() {
        let (p, _) = generate_synthetic(30, 4, 2, None, 0.0, 1).unwrap();
        let e = parse("ts_mean(close, 3)").unwrap();
        let mut ev = StreamEvaluator::new(&e, &p).unwrap();
        ev.push_bar(&p, 0).unwrap();
        assert!(matches!(ev.push_bar(&p, 2), Err(Error::InvalidArgument(_))));
        assert_eq!(ev.bars_consumed(), 1);
    }

    #[test]
    fn shape_mismatch_is_detected() {
        let (p, _) = generate_synthetic(30, 4, 2, None, 0.0, 1).unwrap();
        let (wider, _) = generate_synthetic(30, 6, 2, None, 0.0, 1).unwrap();
        let e = parse("cs_rank(vwap)").unwrap();
        let mut ev = StreamEvaluator::new(&e, &p).unwrap();
        assert!(matches!(ev.push_bar(&wider, 0), Err(Error::ShapeMismatch(_))));
    }
}
