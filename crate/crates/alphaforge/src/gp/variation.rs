//! Unit-constrained tree generation and the variation operators.
//!
//! Every tree produced here is unit-valid by construction: generation picks
//! operators that can yield the requested unit and recurses with the child
//! units those operators demand; crossover only swaps subtrees with equal
//! inferred units; mutation preserves the mutated node's unit. Semantic
//! validity (non-degeneracy on mock data) is checked by the caller.

use crate::dsl::{op_spec, Expr, Field, Op, UnitRule, OPERATOR_TABLE, WINDOW_CAP};
use crate::rng::Rng;
use crate::semantics::{infer_unit, Unit};

pub const PRICE_FIELDS: [Field; 5] =
    [Field::Open, Field::High, Field::Low, Field::Close, Field::Vwap];

/// Numeric terminals for dimensionless leaves.
const CONST_MENU: [f64; 6] = [0.5, 1.0, 2.0, 5.0, -1.0, -0.5];

/// Windows used when growing fresh subtrees; all satisfy every operator's
/// minimum and stay well inside small test panels.
const WINDOW_MENU: [i64; 7] = [2, 3, 5, 10, 15, 20, 30];

/// The unit palette generation draws child targets from.
const PALETTE: [Unit; 3] =
    [Unit::DIMENSIONLESS, Unit { price_exp: 1, volume_exp: 0 }, Unit { price_exp: 0, volume_exp: 1 }];

fn random_palette_unit(rng: &mut Rng) -> Unit {
    PALETTE[rng.below(PALETTE.len())]
}

/// A random unit for the root of a fresh tree; dimensionless is favored
/// because normalized alphas dominate in practice.
pub fn random_root_unit(rng: &mut Rng) -> Unit {
    if rng.bool_with(0.6) {
        Unit::DIMENSIONLESS
    } else {
        random_palette_unit(rng)
    }
}

fn terminal(rng: &mut Rng, target: Unit) -> Expr {
    if target == Unit::new(0, 1) {
        Expr::Field(Field::Volume)
    } else if target == Unit::new(1, 0) {
        Expr::Field(PRICE_FIELDS[rng.below(PRICE_FIELDS.len())])
    } else {
        Expr::Num(CONST_MENU[rng.below(CONST_MENU.len())])
    }
}

fn random_window(rng: &mut Rng) -> i64 {
    WINDOW_MENU[rng.below(WINDOW_MENU.len())]
}

/// Operators that can produce `target` under the unit rules.
fn eligible_ops(target: Unit) -> Vec<Op> {
    OPERATOR_TABLE
        .iter()
        .filter(|s| match s.unit_rule {
            UnitRule::Dimensionless => target.is_dimensionless(),
            _ => true,
        })
        .map(|s| s.op)
        .collect()
}

/// Grow a random unit-valid tree of the given target unit.
///
/// `depth_budget` is the maximum depth of the result (a terminal has depth 1).
/// With `full` set, internal nodes are chosen until the budget is exhausted
/// (the "full" half of ramped half-and-half); otherwise terminals may appear
/// early.
pub fn grow_tree(rng: &mut Rng, target: Unit, depth_budget: usize, full: bool) -> Expr {
    if depth_budget <= 1 || (!full && rng.bool_with(0.25)) {
        return terminal(rng, target);
    }
    let ops = eligible_ops(target);
    let op = ops[rng.below(ops.len())];
    let spec = op_spec(op);
    let child_budget = depth_budget - 1;
    let grow = |rng: &mut Rng, unit: Unit| grow_tree(rng, unit, child_budget, full);
    match spec.unit_rule {
        UnitRule::SameAsChildren => {
            let a = grow(rng, target);
            let b = grow(rng, target);
            Expr::Call(op, vec![a, b])
        }
        UnitRule::Multiply => {
            // target = u + dimensionless in either order.
            let (ua, ub) = if rng.bool_with(0.5) {
                (target, Unit::DIMENSIONLESS)
            } else {
                (Unit::DIMENSIONLESS, target)
            };
            let a = grow(rng, ua);
            let b = grow(rng, ub);
            Expr::Call(op, vec![a, b])
        }
        UnitRule::Divide => {
            if target.is_dimensionless() {
                // A ratio of like-united series.
                let u = random_palette_unit(rng);
                let a = grow(rng, u);
                let b = grow(rng, u);
                Expr::Call(op, vec![a, b])
            } else {
                let a = grow(rng, target);
                let b = grow(rng, Unit::DIMENSIONLESS);
                Expr::Call(op, vec![a, b])
            }
        }
        UnitRule::Preserve => {
            let a = grow(rng, target);
            match spec.window_slot {
                Some(_) => Expr::Call(op, vec![a, Expr::Int(random_window(rng))]),
                None => Expr::Call(op, vec![a]),
            }
        }
        UnitRule::Dimensionless => {
            // Children may carry any unit.
            match op {
                Op::TsCorr => {
                    let ua = random_palette_unit(rng);
                    let ub = random_palette_unit(rng);
                    let a = grow(rng, ua);
                    let b = grow(rng, ub);
                    Expr::Call(op, vec![a, b, Expr::Int(random_window(rng))])
                }
                Op::TsRank => {
                    let u = random_palette_unit(rng);
                    let a = grow(rng, u);
                    Expr::Call(op, vec![a, Expr::Int(random_window(rng))])
                }
                _ => {
                    let u = random_palette_unit(rng);
                    let a = grow(rng, u);
                    Expr::Call(op, vec![a])
                }
            }
        }
    }
}

/// A value-position node: its arg-index path from the root, inferred unit,
/// depth of the position (root = 1), and the subtree's own depth.
pub struct NodeRef {
    pub path: Vec<usize>,
    pub unit: Unit,
    pub pos_depth: usize,
    pub subtree_depth: usize,
}

/// All value-position subtrees (window literals excluded).
pub fn collect_nodes(expr: &Expr) -> Vec<NodeRef> {
    let mut out = Vec::new();
    walk(expr, &mut Vec::new(), 1, &mut out);
    out
}

fn walk(expr: &Expr, path: &mut Vec<usize>, pos_depth: usize, out: &mut Vec<NodeRef>) {
    let unit = infer_unit(expr).expect("population members are unit-valid");
    out.push(NodeRef {
        path: path.clone(),
        unit,
        pos_depth,
        subtree_depth: expr.depth(),
    });
    if let Expr::Call(op, args) = expr {
        let window_slot = op_spec(*op).window_slot;
        for (i, a) in args.iter().enumerate() {
            if Some(i) == window_slot {
                continue;
            }
            path.push(i);
            walk(a, path, pos_depth + 1, out);
            path.pop();
        }
    }
}

pub fn get_subtree<'a>(expr: &'a Expr, path: &[usize]) -> &'a Expr {
    match path.split_first() {
        None => expr,
        Some((&i, rest)) => match expr {
            Expr::Call(_, args) => get_subtree(&args[i], rest),
            _ => unreachable!("path points below a leaf"),
        },
    }
}

pub fn replace_subtree(expr: &Expr, path: &[usize], replacement: Expr) -> Expr {
    match path.split_first() {
        None => replacement,
        Some((&i, rest)) => match expr {
            Expr::Call(op, args) => {
                let mut args = args.clone();
                args[i] = replace_subtree(&args[i], rest, replacement);
                Expr::Call(*op, args)
            }
            _ => unreachable!("path points below a leaf"),
        },
    }
}

/// Swap a random subtree of `a` for a unit-compatible subtree of `b`.
///
/// Up to `max_retries` (target, donor) pairs are sampled; a pair is accepted
/// when the units match and the graft respects the depth cap. With no
/// compatible pair, `a` is returned unchanged.
pub fn crossover(a: &Expr, b: &Expr, max_depth: usize, max_retries: usize, rng: &mut Rng) -> Expr {
    let targets = collect_nodes(a);
    let donors = collect_nodes(b);
    for _ in 0..max_retries {
        let t = &targets[rng.below(targets.len())];
        let d = &donors[rng.below(donors.len())];
        if t.unit != d.unit {
            continue;
        }
        if t.pos_depth - 1 + d.subtree_depth > max_depth {
            continue;
        }
        let donor = get_subtree(b, &d.path).clone();
        return replace_subtree(a, &t.path, donor);
    }
    a.clone()
}

/// One of three unit-preserving mutations: subtree replacement, window
/// jitter, or operator swap within the same (arity, window-slot, unit-rule)
/// class. Falls back to a copy of the input when the drawn kind does not
/// apply.
pub fn mutate(expr: &Expr, max_depth: usize, rng: &mut Rng) -> Expr {
    match rng.below(3) {
        0 => mutate_subtree(expr, max_depth, rng),
        1 => mutate_window(expr, rng).unwrap_or_else(|| mutate_subtree(expr, max_depth, rng)),
        _ => mutate_operator(expr, rng).unwrap_or_else(|| mutate_subtree(expr, max_depth, rng)),
    }
}

fn mutate_subtree(expr: &Expr, max_depth: usize, rng: &mut Rng) -> Expr {
    let nodes = collect_nodes(expr);
    let t = &nodes[rng.below(nodes.len())];
    let budget = (max_depth + 1 - t.pos_depth).clamp(1, 4);
    let replacement = grow_tree(rng, t.unit, budget, false);
    replace_subtree(expr, &t.path, replacement)
}

/// Resample one window literal uniformly within the legal range for its
/// operator; `None` when the tree has no windows.
fn mutate_window(expr: &Expr, rng: &mut Rng) -> Option<Expr> {
    let mut slots = Vec::new();
    collect_window_slots(expr, &mut Vec::new(), &mut slots);
    if slots.is_empty() {
        return None;
    }
    let (path, min_window) = slots[rng.below(slots.len())].clone();
    let w = rng.range_inclusive(min_window, WINDOW_CAP as i64);
    Some(replace_window(expr, &path, w))
}

fn collect_window_slots(expr: &Expr, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, i64)>) {
    if let Expr::Call(op, args) = expr {
        let spec = op_spec(*op);
        if let Some(slot) = spec.window_slot {
            let mut p = path.clone();
            p.push(slot);
            out.push((p, spec.min_window));
        }
        for (i, a) in args.iter().enumerate() {
            if Some(i) == spec.window_slot {
                continue;
            }
            path.push(i);
            collect_window_slots(a, path, out);
            path.pop();
        }
    }
}

fn replace_window(expr: &Expr, path: &[usize], w: i64) -> Expr {
    match path.split_first() {
        None => unreachable!("window path ends inside a call"),
        Some((&i, rest)) => match expr {
            Expr::Call(op, args) => {
                let mut args = args.clone();
                if rest.is_empty() {
                    args[i] = Expr::Int(w);
                } else {
                    args[i] = replace_window(&args[i], rest, w);
                }
                Expr::Call(*op, args)
            }
            _ => unreachable!("path points below a leaf"),
        },
    }
}

/// Swap one call's operator for another with identical arity, window slot,
/// unit rule, and a compatible window minimum; `None` when no call has an
/// alternative.
fn mutate_operator(expr: &Expr, rng: &mut Rng) -> Option<Expr> {
    let mut sites = Vec::new();
    collect_swap_sites(expr, &mut Vec::new(), &mut sites);
    if sites.is_empty() {
        return None;
    }
    let (path, alternatives) = &sites[rng.below(sites.len())];
    let new_op = alternatives[rng.below(alternatives.len())];
    let target = get_subtree(expr, path);
    if let Expr::Call(_, args) = target {
        Some(replace_subtree(expr, path, Expr::Call(new_op, args.clone())))
    } else {
        None
    }
}

fn collect_swap_sites(expr: &Expr, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, Vec<Op>)>) {
    if let Expr::Call(op, args) = expr {
        let spec = op_spec(*op);
        let window = args.iter().find_map(|a| match a {
            Expr::Int(w) => Some(*w),
            _ => None,
        });
        let alts: Vec<Op> = OPERATOR_TABLE
            .iter()
            .filter(|s| {
                s.op != *op
                    && s.arity == spec.arity
                    && s.window_slot == spec.window_slot
                    && std::mem::discriminant(&s.unit_rule)
                        == std::mem::discriminant(&spec.unit_rule)
                    && window.map_or(true, |w| w >= s.min_window as i64)
            })
            .map(|s| s.op)
            .collect();
        if !alts.is_empty() {
            out.push((path.clone(), alts));
        }
        for (i, a) in args.iter().enumerate() {
            if Some(i) == spec.window_slot {
                continue;
            }
            path.push(i);
            collect_swap_sites(a, path, out);
            path.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn grown_trees_are_unit_valid_and_capped() {
        let mut rng = Rng::seed_from(7);
        for i in 0..500 {
            let target = random_root_unit(&mut rng);
            let full = i % 2 == 0;
            let depth = 2 + (i % 4);
            let e = grow_tree(&mut rng, target, depth, full);
            assert!(e.depth() <= depth, "depth {} > budget {depth}", e.depth());
            assert_eq!(infer_unit(&e).unwrap(), target);
            e.check_structure().unwrap();
        }
    }

    #[test]
    fn crossover_is_unit_closed() {
        let mut rng = Rng::seed_from(11);
        let mut parents = Vec::new();
        for _ in 0..40 {
            let u = random_root_unit(&mut rng);
            parents.push(grow_tree(&mut rng, u, 5, false));
        }
        for _ in 0..1000 {
            let a = &parents[rng.below(parents.len())];
            let b = &parents[rng.below(parents.len())];
            let ua = infer_unit(a).unwrap();
            let child = crossover(a, b, 10, 20, &mut rng);
            assert_eq!(infer_unit(&child).unwrap(), ua);
            assert!(child.depth() <= 10);
            child.check_structure().unwrap();
        }
    }

    #[test]
    fn crossover_without_compatible_donor_returns_a() {
        let mut rng = Rng::seed_from(3);
        let a = parse("add(close, vwap)").unwrap();
        let b = parse("volume").unwrap();
        assert_eq!(crossover(&a, &b, 10, 20, &mut rng), a);
    }

    #[test]
    fn crossover_of_terminals_swaps_roots() {
        let mut rng = Rng::seed_from(3);
        let a = parse("close").unwrap();
        let b = parse("vwap").unwrap();
        let child = crossover(&a, &b, 10, 20, &mut rng);
        assert!(child == a || child == b);
    }

    #[test]
    fn mutation_preserves_unit_and_depth_cap() {
        let mut rng = Rng::seed_from(19);
        let mut e = parse("cs_rank(div(sub(close, ts_mean(close, 20)), ts_std(close, 20)))").unwrap();
        let unit = infer_unit(&e).unwrap();
        for _ in 0..1000 {
            e = mutate(&e, 10, &mut rng);
            assert_eq!(infer_unit(&e).unwrap(), unit);
            assert!(e.depth() <= 10);
            e.check_structure().unwrap();
        }
    }

    #[test]
    fn terminal_mutation_of_a_price_field_stays_price_united() {
        let mut rng = Rng::seed_from(23);
        let e = parse("close").unwrap();
        for _ in 0..50 {
            let m = mutate(&e, 10, &mut rng);
            assert_eq!(infer_unit(&m).unwrap(), Unit::new(1, 0));
        }
    }

    #[test]
    fn window_jitter_stays_in_legal_range() {
        let mut rng = Rng::seed_from(29);
        for _ in 0..200 {
            if let Some(m) = mutate_window(&parse("ts_std(close, 5)").unwrap(), &mut rng) {
                if let Expr::Call(_, args) = &m {
                    if let Expr::Int(w) = args[1] {
                        assert!((2..=WINDOW_CAP as i64).contains(&w));
                    }
                }
                m.check_structure().unwrap();
            }
        }
    }

    #[test]
    fn unconstrained_generation_violates_units_often() {
        // Baseline: growing trees while ignoring units produces frequent
        // unit errors, which is exactly what constrained generation avoids.
        let mut rng = Rng::seed_from(31);
        let mut violations = 0;
        let total = 300;
        for _ in 0..total {
            let e = grow_unconstrained(&mut rng, 4);
            if infer_unit(&e).is_err() {
                violations += 1;
            }
        }
        assert!(violations * 10 > total, "only {violations}/{total} violations");
    }

    fn grow_unconstrained(rng: &mut Rng, budget: usize) -> Expr {
        if budget <= 1 || rng.bool_with(0.25) {
            return match rng.below(3) {
                0 => Expr::Field(Field::Close),
                1 => Expr::Field(Field::Volume),
                _ => Expr::Num(2.0),
            };
        }
        let spec = &OPERATOR_TABLE[rng.below(OPERATOR_TABLE.len())];
        let args = (0..spec.arity)
            .map(|i| {
                if Some(i) == spec.window_slot {
                    Expr::Int(5)
                } else {
                    grow_unconstrained(rng, budget - 1)
                }
            })
            .collect();
        Expr::Call(spec.op, args)
    }
}
