//! Genetic-programming search over expression trees.
//!
//! Fitness is |mean training IC| minus a parsimony penalty; candidates too
//! correlated with the hall of fame or the existing alpha pool are rejected
//! outright; a chronological validation slice drives early stopping. All
//! random draws happen on the sequential main loop, so results are identical
//! at any worker count.

pub mod variation;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{LabelMatrix, Panel};
use crate::dsl::{parse, print_expr, Expr, Op};
use crate::engine::eval_batch;
use crate::error::{Error, Result};
use crate::matrix::{is_missing, Matrix};
use crate::metrics::{ic_series, IcKind, DEFAULT_MIN_OBS};
use crate::rng::Rng;
use crate::semantics::validate_expr;

use variation::{crossover, grow_tree, mutate, random_root_unit};

/// Expression used when constrained generation keeps failing validation.
pub const FALLBACK_EXPR: &str = "cs_rank(ts_delta(close, 1))";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_k: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub p_reproduction: f64,
    pub max_depth: usize,
    pub init_depth_range: [usize; 2],
    pub parsimony_lambda: f64,
    pub diversity_corr_cap: f64,
    pub patience: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub elitism_count: usize,
    pub max_invalid_retries: usize,
    /// Hall-of-fame capacity.
    pub hof_size: usize,
    /// Fitness-evaluation workers; never affects results.
    pub workers: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population_size: 200,
            generations: 30,
            tournament_k: 4,
            p_crossover: 0.7,
            p_mutation: 0.25,
            p_reproduction: 0.05,
            max_depth: 10,
            init_depth_range: [2, 5],
            parsimony_lambda: 0.002,
            diversity_corr_cap: 0.7,
            patience: 5,
            train_fraction: 0.7,
            seed: 0,
            elitism_count: 2,
            max_invalid_retries: 20,
            hof_size: 10,
            workers: 1,
        }
    }
}

impl GpConfig {
    pub fn check(&self) -> Result<()> {
        let psum = self.p_crossover + self.p_mutation + self.p_reproduction;
        if (psum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "crossover/mutation/reproduction probabilities sum to {psum}, expected 1"
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must be in (0, 1)".into()));
        }
        if self.parsimony_lambda < 0.0 {
            return Err(Error::Config("parsimony_lambda must be >= 0".into()));
        }
        if self.population_size == 0 || self.tournament_k == 0 || self.hof_size == 0 {
            return Err(Error::Config("population, tournament, and hof sizes must be > 0".into()));
        }
        if self.init_depth_range[0] < 1 || self.init_depth_range[0] > self.init_depth_range[1] {
            return Err(Error::Config("init_depth_range must satisfy 1 <= lo <= hi".into()));
        }
        if self.elitism_count > self.population_size {
            return Err(Error::Config("elitism_count exceeds population_size".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HofMember {
    pub expression: String,
    pub train_fitness: f64,
    pub validation_mean_ic: f64,
    pub complexity: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_validation_ic: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub hall_of_fame: Vec<HofMember>,
    pub generations_run: usize,
    pub history: Vec<GenerationStats>,
    pub seed: u64,
    /// Closure accounting: every population insertion must have passed
    /// validation first, so these two always match.
    pub population_insertions: usize,
    pub validated_insertions: usize,
}

/// A scored population member. `train_values` is the alpha over the training
/// rows only (used for diversity correlations).
#[derive(Debug, Clone)]
struct Scored {
    expr: Expr,
    /// |train mean IC| − λ·complexity, or −∞ for degenerate/rejected.
    fitness: f64,
    /// Signed train mean IC (NaN when degenerate).
    train_ic: f64,
    /// Signed validation mean IC (NaN when undefined).
    val_ic: f64,
    train_values: Matrix,
}

/// Pearson correlation between two alpha matrices over jointly defined cells.
/// Returns 0 when fewer than 3 joint cells exist.
pub fn alpha_correlation(a: &Matrix, b: &Matrix) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (x, y) in a.data().iter().zip(b.data().iter()) {
        if !is_missing(*x) && !is_missing(*y) {
            xs.push(*x);
            ys.push(*y);
        }
    }
    if xs.len() < 3 {
        return 0.0;
    }
    let c = crate::metrics::pearson(&xs, &ys);
    if is_missing(c) {
        0.0
    } else {
        c
    }
}

fn mean_ic_over_rows(ic: &[f64], rows: std::ops::Range<usize>) -> f64 {
    let defined: Vec<f64> = ic[rows].iter().copied().filter(|v| !is_missing(*v)).collect();
    if defined.is_empty() {
        f64::NAN
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    }
}

/// Score one expression: evaluate on the full panel, then measure IC on the
/// train and validation row ranges.
fn score(
    expr: &Expr,
    panel: &Panel,
    labels: &LabelMatrix,
    t_train: usize,
    lambda: f64,
) -> Scored {
    let degenerate = |expr: &Expr| Scored {
        expr: expr.clone(),
        fitness: f64::NEG_INFINITY,
        train_ic: f64::NAN,
        val_ic: f64::NAN,
        train_values: Matrix::missing(0, 0),
    };
    let alpha = match eval_batch(expr, panel, 1) {
        Ok(a) => a,
        Err(_) => return degenerate(expr),
    };
    let ic = match ic_series(&alpha, labels, IcKind::Pearson, DEFAULT_MIN_OBS) {
        Ok(s) => s,
        Err(_) => return degenerate(expr),
    };
    let train_ic = mean_ic_over_rows(&ic.values, 0..t_train);
    let val_ic = mean_ic_over_rows(&ic.values, t_train..ic.values.len());
    if train_ic.is_nan() {
        return degenerate(expr);
    }
    Scored {
        fitness: train_ic.abs() - lambda * expr.complexity() as f64,
        train_ic,
        val_ic,
        train_values: alpha.values.slice_rows(0, t_train),
        expr: expr.clone(),
    }
}

/// Negate an expression; the canonical orientation fix for negative-IC alphas.
fn negated(expr: &Expr) -> Expr {
    Expr::Call(Op::Mul, vec![Expr::Num(-1.0), expr.clone()])
}

struct Evolver<'a> {
    cfg: &'a GpConfig,
    panel: &'a Panel,
    labels: &'a LabelMatrix,
    t_train: usize,
    pool: Option<rayon::ThreadPool>,
    rng: Rng,
    hof: Vec<Scored>,
    /// Canonical texts of expressions that entered the hall of fame (in both
    /// orientations); these are self-correlated by definition and exempt from
    /// the diversity rejection, which keeps elitism monotone.
    hof_texts: std::collections::HashSet<String>,
    pool_values: Vec<Matrix>,
    population_insertions: usize,
    validated_insertions: usize,
}

/// Run the full generational search.
///
/// `seeds` are injected verbatim into the initial population (each must pass
/// validation); `pool_exprs` are existing alphas the search must stay
/// decorrelated from.
pub fn evolve(
    cfg: &GpConfig,
    panel: &Panel,
    labels: &LabelMatrix,
    seeds: &[Expr],
    pool_exprs: &[Expr],
) -> Result<SearchResult> {
    cfg.check()?;
    let t = panel.t();
    let t_train = (cfg.train_fraction * t as f64).floor() as usize;
    if t_train == 0 || t_train >= t {
        return Err(Error::InvalidArgument(format!(
            "train fraction {} leaves an empty slice on a {t}-bar panel",
            cfg.train_fraction
        )));
    }
    if labels.values.rows() != t || labels.values.cols() != panel.n() {
        return Err(Error::ShapeMismatch("labels do not match the panel".into()));
    }
    if seeds.len() > cfg.population_size {
        return Err(Error::InvalidArgument("more seeds than population slots".into()));
    }
    for (i, s) in seeds.iter().enumerate() {
        let report = validate_expr(s);
        if !report.is_valid() {
            return Err(Error::InvalidSeed(format!(
                "seed {i} `{}`: {}",
                print_expr(s),
                report.render_line()
            )));
        }
    }

    let thread_pool = if cfg.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let pool_values: Vec<Matrix> = pool_exprs
        .iter()
        .filter_map(|e| eval_batch(e, panel, 1).ok())
        .map(|a| a.values.slice_rows(0, t_train))
        .collect();

    let mut ev = Evolver {
        cfg,
        panel,
        labels,
        t_train,
        pool: thread_pool,
        rng: Rng::seed_from(cfg.seed),
        hof: Vec::new(),
        hof_texts: std::collections::HashSet::new(),
        pool_values,
        population_insertions: 0,
        validated_insertions: 0,
    };
    ev.run(seeds)
}

impl<'a> Evolver<'a> {
    fn run(&mut self, seeds: &[Expr]) -> Result<SearchResult> {
        let mut population = self.init_population(seeds);
        let mut scored = self.score_all(&population);
        self.apply_diversity(&mut scored);

        let mut history = Vec::new();
        let mut best_val_so_far = f64::NEG_INFINITY;
        let mut stall = 0usize;
        let mut generations_run = 0usize;

        for gen in 0..self.cfg.generations {
            generations_run = gen + 1;
            self.update_hof(&scored);
            let stats = generation_stats(gen, &scored);
            let gen_best_val = stats.best_validation_ic;
            history.push(stats);

            if gen_best_val > best_val_so_far {
                best_val_so_far = gen_best_val;
                stall = 0;
            } else {
                stall += 1;
                if stall >= self.cfg.patience {
                    break;
                }
            }
            if gen + 1 == self.cfg.generations {
                break;
            }

            population = self.breed(&scored);
            scored = self.score_all(&population);
            self.apply_diversity(&mut scored);
        }

        let mut hall_of_fame: Vec<HofMember> = self
            .hof
            .iter()
            .map(|m| HofMember {
                expression: print_expr(&m.expr),
                train_fitness: m.fitness,
                validation_mean_ic: m.val_ic,
                complexity: m.expr.complexity(),
            })
            .collect();
        hall_of_fame.sort_by(|a, b| {
            b.validation_mean_ic
                .partial_cmp(&a.validation_mean_ic)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(SearchResult {
            hall_of_fame,
            generations_run,
            history,
            seed: self.cfg.seed,
            population_insertions: self.population_insertions,
            validated_insertions: self.validated_insertions,
        })
    }

    /// Record a population insertion; `expr` must already have passed
    /// validation (the closure invariant the counters verify).
    fn insert_tracked(&mut self, expr: Expr, out: &mut Vec<Expr>) {
        self.population_insertions += 1;
        if validate_expr(&expr).is_valid() {
            self.validated_insertions += 1;
        }
        out.push(expr);
    }

    fn init_population(&mut self, seeds: &[Expr]) -> Vec<Expr> {
        let fallback = parse(FALLBACK_EXPR).expect("fallback expression parses");
        let mut population = Vec::with_capacity(self.cfg.population_size);
        for s in seeds {
            self.insert_tracked(s.clone(), &mut population);
        }
        let [lo, hi] = self.cfg.init_depth_range;
        let mut i = 0usize;
        while population.len() < self.cfg.population_size {
            // Ramped half-and-half: cycle depths, alternate full/grow.
            let depth = lo + i % (hi - lo + 1);
            let full = i % 2 == 0;
            i += 1;
            let mut candidate = None;
            for _ in 0..self.cfg.max_invalid_retries {
                let unit = random_root_unit(&mut self.rng);
                let e = grow_tree(&mut self.rng, unit, depth, full);
                if validate_expr(&e).is_valid() {
                    candidate = Some(e);
                    break;
                }
            }
            self.insert_tracked(candidate.unwrap_or_else(|| fallback.clone()), &mut population);
        }
        population
    }

    fn score_all(&self, population: &[Expr]) -> Vec<Scored> {
        let panel = self.panel;
        let labels = self.labels;
        let t_train = self.t_train;
        let lambda = self.cfg.parsimony_lambda;
        let eval = || {
            population
                .par_iter()
                .map(|e| score(e, panel, labels, t_train, lambda))
                .collect::<Vec<_>>()
        };
        match &self.pool {
            Some(p) => p.install(eval),
            None => eval(),
        }
    }

    /// Hard diversity constraint: −∞ fitness for candidates whose training
    /// alpha is too correlated with the hall of fame or the external pool.
    fn apply_diversity(&self, scored: &mut [Scored]) {
        let cap = self.cfg.diversity_corr_cap;
        let references: Vec<&Matrix> = self
            .hof
            .iter()
            .map(|m| &m.train_values)
            .chain(self.pool_values.iter())
            .collect();
        if references.is_empty() {
            return;
        }
        for s in scored.iter_mut() {
            if s.fitness == f64::NEG_INFINITY {
                continue;
            }
            if self.hof_texts.contains(&print_expr(&s.expr)) {
                continue;
            }
            let conflicted = references
                .iter()
                .any(|r| alpha_correlation(&s.train_values, r).abs() > cap);
            if conflicted {
                s.fitness = f64::NEG_INFINITY;
            }
        }
    }

    fn update_hof(&mut self, scored: &[Scored]) {
        let cap = self.cfg.diversity_corr_cap;
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| {
            scored[b]
                .fitness
                .partial_cmp(&scored[a].fitness)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for &i in &order {
            let s = &scored[i];
            if s.fitness == f64::NEG_INFINITY || s.val_ic.is_nan() {
                continue;
            }
            // Orient so the training IC is positive.
            let (expr, train_values, train_ic, val_ic) = if s.train_ic < 0.0 {
                let mut neg = s.train_values.clone();
                for v in neg.data_mut() {
                    *v = -*v;
                }
                (negated(&s.expr), neg, -s.train_ic, -s.val_ic)
            } else {
                (s.expr.clone(), s.train_values.clone(), s.train_ic, s.val_ic)
            };
            let text = print_expr(&expr);
            if self.hof.iter().any(|m| print_expr(&m.expr) == text) {
                continue;
            }
            if self
                .hof
                .iter()
                .any(|m| alpha_correlation(&train_values, &m.train_values).abs() > cap)
            {
                continue;
            }
            self.hof_texts.insert(print_expr(&s.expr));
            self.hof_texts.insert(text);
            self.hof.push(Scored {
                expr,
                fitness: s.fitness,
                train_ic,
                val_ic,
                train_values,
            });
        }
        self.hof.sort_by(|a, b| {
            b.val_ic.partial_cmp(&a.val_ic).unwrap_or(std::cmp::Ordering::Equal)
        });
        self.hof.truncate(self.cfg.hof_size);
    }

    fn tournament<'s>(&mut self, scored: &'s [Scored]) -> &'s Scored {
        let mut best = &scored[self.rng.below(scored.len())];
        for _ in 1..self.cfg.tournament_k {
            let challenger = &scored[self.rng.below(scored.len())];
            if challenger.fitness > best.fitness {
                best = challenger;
            }
        }
        best
    }

    fn breed(&mut self, scored: &[Scored]) -> Vec<Expr> {
        let mut next = Vec::with_capacity(self.cfg.population_size);

        // Elitism: carry the top members by train fitness unchanged.
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| {
            scored[b]
                .fitness
                .partial_cmp(&scored[a].fitness)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for &i in order.iter().take(self.cfg.elitism_count) {
            self.insert_tracked(scored[i].expr.clone(), &mut next);
        }

        while next.len() < self.cfg.population_size {
            let mut child = None;
            let mut parent_fallback = None;
            for _ in 0..self.cfg.max_invalid_retries {
                let r = self.rng.f64();
                let candidate = if r < self.cfg.p_crossover {
                    let a = self.tournament(scored).expr.clone();
                    let b = self.tournament(scored).expr.clone();
                    let c = crossover(
                        &a,
                        &b,
                        self.cfg.max_depth,
                        self.cfg.max_invalid_retries,
                        &mut self.rng,
                    );
                    parent_fallback = Some(a);
                    c
                } else if r < self.cfg.p_crossover + self.cfg.p_mutation {
                    let a = self.tournament(scored).expr.clone();
                    let c = mutate(&a, self.cfg.max_depth, &mut self.rng);
                    parent_fallback = Some(a);
                    c
                } else {
                    let a = self.tournament(scored).expr.clone();
                    parent_fallback = Some(a.clone());
                    a
                };
                if validate_expr(&candidate).is_valid() {
                    child = Some(candidate);
                    break;
                }
            }
            // Parents came from the population, so they are valid.
            let chosen = child
                .or(parent_fallback)
                .unwrap_or_else(|| parse(FALLBACK_EXPR).expect("fallback parses"));
            self.insert_tracked(chosen, &mut next);
        }
        next
    }
}

fn generation_stats(generation: usize, scored: &[Scored]) -> GenerationStats {
    let finite: Vec<&Scored> = scored.iter().filter(|s| s.fitness.is_finite()).collect();
    let best = finite
        .iter()
        .max_by(|a, b| a.fitness.partial_cmp(&b.fitness).unwrap());
    GenerationStats {
        generation,
        best_fitness: best.map(|s| s.fitness).unwrap_or(f64::NEG_INFINITY),
        mean_fitness: if finite.is_empty() {
            f64::NEG_INFINITY
        } else {
            finite.iter().map(|s| s.fitness).sum::<f64>() / finite.len() as f64
        },
        best_validation_ic: best
            .map(|s| if s.train_ic < 0.0 { -s.val_ic } else { s.val_ic })
            .filter(|v| !v.is_nan())
            .unwrap_or(f64::NEG_INFINITY),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;

    fn small_cfg(seed: u64) -> GpConfig {
        GpConfig {
            population_size: 24,
            generations: 4,
            patience: 10,
            seed,
            hof_size: 5,
            ..GpConfig::default()
        }
    }

    fn fixture(seed: u64) -> (Panel, LabelMatrix) {
        generate_synthetic(120, 12, 2, Some("cs_rank(ts_delta(close, 5))"), 0.3, seed).unwrap()
    }

    #[test]
    fn config_probability_check() {
        let mut cfg = GpConfig::default();
        cfg.check().unwrap();
        cfg.p_crossover = 0.9;
        assert!(cfg.check().is_err());
    }

    #[test]
    fn seeded_run_completes() {
        let (panel, labels) = fixture(2);
        let seed_expr = parse("sub(ts_mean(close, 5), ts_mean(close, 20))").unwrap();
        let r = evolve(&small_cfg(3), &panel, &labels, &[seed_expr], &[]).unwrap();
        assert!(r.generations_run >= 1);
        assert!(!r.hall_of_fame.is_empty());
    }

    #[test]
    fn invalid_seed_is_named() {
        let (panel, labels) = fixture(2);
        // Structurally fine, semantically degenerate.
        let seed_expr = parse("sub(close, close)").unwrap();
        match evolve(&small_cfg(3), &panel, &labels, &[seed_expr], &[]) {
            Err(Error::InvalidSeed(msg)) => assert!(msg.contains("sub(close, close)")),
            other => panic!("expected invalid-seed error, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_across_runs_and_workers() {
        let (panel, labels) = fixture(5);
        let mut cfg = small_cfg(7);
        let a = evolve(&cfg, &panel, &labels, &[], &[]).unwrap();
        let b = evolve(&cfg, &panel, &labels, &[], &[]).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        cfg.workers = 2;
        let c = evolve(&cfg, &panel, &labels, &[], &[]).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
    }

    #[test]
    fn closure_every_insertion_validated() {
        let (panel, labels) = fixture(9);
        let r = evolve(&small_cfg(11), &panel, &labels, &[], &[]).unwrap();
        assert_eq!(r.population_insertions, r.validated_insertions);
        assert!(r.population_insertions >= 24);
    }

    #[test]
    fn elitism_makes_best_fitness_nondecreasing() {
        let (panel, labels) = fixture(13);
        let r = evolve(&small_cfg(17), &panel, &labels, &[], &[]).unwrap();
        for w in r.history.windows(2) {
            assert!(
                w[1].best_fitness >= w[0].best_fitness - 1e-12,
                "best fitness regressed: {} -> {}",
                w[0].best_fitness,
                w[1].best_fitness
            );
        }
    }

    #[test]
    fn hall_of_fame_is_sorted_and_decorrelated() {
        let (panel, labels) = fixture(19);
        let cfg = small_cfg(23);
        let r = evolve(&cfg, &panel, &labels, &[], &[]).unwrap();
        for w in r.hall_of_fame.windows(2) {
            assert!(w[0].validation_mean_ic >= w[1].validation_mean_ic);
        }
        let t_train = (cfg.train_fraction * panel.t() as f64).floor() as usize;
        let values: Vec<Matrix> = r
            .hall_of_fame
            .iter()
            .map(|m| {
                eval_batch(&parse(&m.expression).unwrap(), &panel, 1)
                    .unwrap()
                    .values
                    .slice_rows(0, t_train)
            })
            .collect();
        for i in 0..values.len() {
            for j in 0..i {
                let c = alpha_correlation(&values[i], &values[j]).abs();
                assert!(c <= cfg.diversity_corr_cap + 1e-9, "|corr|={c}");
            }
        }
        for m in &r.hall_of_fame {
            assert!(crate::semantics::validate(&m.expression).is_valid());
        }
    }

    #[test]
    fn early_stopping_respects_patience() {
        let (panel, labels) = fixture(29);
        let cfg = GpConfig {
            population_size: 12,
            generations: 20,
            patience: 1,
            seed: 31,
            ..GpConfig::default()
        };
        let r = evolve(&cfg, &panel, &labels, &[], &[]).unwrap();
        // With patience 1, the run ends the first time the validation IC
        // fails to improve, well short of the generation budget.
        assert!(r.generations_run < 20);
        assert_eq!(r.history.len(), r.generations_run);
    }

    #[test]
    fn pool_exprs_are_avoided() {
        let (panel, labels) = fixture(37);
        let pool_expr = parse("cs_rank(ts_delta(close, 5))").unwrap();
        let cfg = small_cfg(41);
        let r = evolve(&cfg, &panel, &labels, &[], &[pool_expr.clone()]).unwrap();
        let t_train = (cfg.train_fraction * panel.t() as f64).floor() as usize;
        let pool_values = eval_batch(&pool_expr, &panel, 1).unwrap().values.slice_rows(0, t_train);
        for m in &r.hall_of_fame {
            let v = eval_batch(&parse(&m.expression).unwrap(), &panel, 1)
                .unwrap()
                .values
                .slice_rows(0, t_train);
            assert!(
                alpha_correlation(&v, &pool_values).abs() <= cfg.diversity_corr_cap + 1e-9
            );
        }
    }

    #[test]
    fn fitness_formula_arithmetic() {
        let (panel, labels) = fixture(43);
        let e = parse("cs_rank(ts_delta(close, 5))").unwrap();
        let t_train = 84;
        let with_reg = score(&e, &panel, &labels, t_train, 0.002);
        let no_reg = score(&e, &panel, &labels, t_train, 0.0);
        let nodes = e.complexity() as f64;
        assert!((no_reg.fitness - with_reg.fitness - 0.002 * nodes).abs() < 1e-12);
        assert!((no_reg.fitness - no_reg.train_ic.abs()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_expression_gets_sentinel() {
        let (panel, labels) = fixture(47);
        // A constant: defined everywhere but zero cross-sectional variance,
        // so every IC bar is missing.
        let e = parse("div(close, close)").unwrap();
        let s = score(&e, &panel, &labels, 84, 0.002);
        assert_eq!(s.fitness, f64::NEG_INFINITY);
    }
}
