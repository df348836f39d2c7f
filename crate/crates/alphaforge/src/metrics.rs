//! Alpha scoring: per-bar information coefficients, summary statistics, a
//! quantile long-short backtest with linear costs, and a look-ahead audit.
//!
//! Conventions: 252 trading days per year, sample standard deviation (n−1)
//! everywhere, and additive (arithmetic) equity aggregation so that cost
//! linearity is exact — the net curve equals the gross curve minus cumulative
//! costs to the last bit.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{forward_returns, LabelMatrix, Panel};
use crate::dsl::Expr;
use crate::engine::{eval_batch, AlphaMatrix};
use crate::error::{Error, Result};
use crate::matrix::{is_missing, Matrix, MISSING};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;
pub const DEFAULT_MIN_OBS: usize = 20;
pub const DEFAULT_QUANTILES: usize = 5;
pub const DEFAULT_COST_RATE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcKind {
    Pearson,
    Spearman,
}

/// Per-bar cross-sectional correlation between alpha values and labels.
/// Bars with fewer than `min_obs` jointly defined pairs are missing.
#[derive(Debug, Clone)]
pub struct IcSeries {
    pub values: Vec<f64>,
    pub kind: IcKind,
    pub min_obs: usize,
}

impl IcSeries {
    pub fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| !is_missing(*v))
    }

    /// Two-column CSV export: date, ic (missing as empty).
    pub fn to_csv(&self, dates: &[NaiveDate]) -> String {
        let mut out = String::from("date,ic\n");
        for (d, v) in dates.iter().zip(&self.values) {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            out.push(',');
            if !is_missing(*v) {
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Pearson correlation over the given pairs; missing when degenerate.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return MISSING;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return MISSING;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Average (fractional) ranks, 1-based; ties share the mean of their ranks.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Per-bar IC between an alpha matrix and forward-return labels.
///
/// `min_obs` must be at least 3 and is clamped to the instrument count so
/// small test panels still produce a series.
pub fn ic_series(
    alpha: &AlphaMatrix,
    labels: &LabelMatrix,
    kind: IcKind,
    min_obs: usize,
) -> Result<IcSeries> {
    let a = &alpha.values;
    let l = &labels.values;
    if a.rows() != l.rows() || a.cols() != l.cols() {
        return Err(Error::ShapeMismatch(format!(
            "alpha is {}x{}, labels are {}x{}",
            a.rows(),
            a.cols(),
            l.rows(),
            l.cols()
        )));
    }
    if min_obs < 3 {
        return Err(Error::InvalidArgument("min_obs must be >= 3".into()));
    }
    let min_obs = min_obs.min(a.cols()).max(3);
    let mut values = Vec::with_capacity(a.rows());
    for t in 0..a.rows() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for j in 0..a.cols() {
            let x = a.get(t, j);
            let y = l.get(t, j);
            if !is_missing(x) && !is_missing(y) {
                xs.push(x);
                ys.push(y);
            }
        }
        if xs.len() < min_obs {
            values.push(MISSING);
            continue;
        }
        values.push(match kind {
            IcKind::Pearson => pearson(&xs, &ys),
            IcKind::Spearman => pearson(&average_ranks(&xs), &average_ranks(&ys)),
        });
    }
    Ok(IcSeries { values, kind, min_obs })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IcSummary {
    pub mean_ic: f64,
    /// mean / sample std over defined bars; absent with < 2 defined bars or
    /// a constant series.
    pub ic_ir: Option<f64>,
    pub n_bars: usize,
}

pub fn ic_summary(series: &IcSeries) -> Result<IcSummary> {
    let defined: Vec<f64> = series.defined().collect();
    if defined.is_empty() {
        return Err(Error::Degenerate("IC series has no defined bars".into()));
    }
    let n = defined.len();
    let mean = defined.iter().sum::<f64>() / n as f64;
    let ic_ir = if n >= 2 {
        let var =
            defined.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        if std > 0.0 {
            Some(mean / std)
        } else {
            None
        }
    } else {
        None
    };
    Ok(IcSummary { mean_ic: mean, ic_ir, n_bars: n })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestReport {
    /// Net-of-cost long-short returns spread evenly over each holding period.
    pub daily_ls_returns: Vec<f64>,
    pub mean_ic: f64,
    pub ic_ir: Option<f64>,
    pub rank_ic_mean: f64,
    pub annual_return: f64,
    pub sharpe: Option<f64>,
    pub max_drawdown: f64,
    pub avg_turnover: f64,
    pub quantiles: usize,
    pub cost_rate: f64,
    pub horizon: usize,
    pub lag: usize,
    pub n_rebalances: usize,
}

impl BacktestReport {
    /// Flat key=value text block for terminal output.
    pub fn to_text(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "undefined".into())
        }
        let mut s = String::new();
        s.push_str(&format!("mean_ic={:.6}\n", self.mean_ic));
        s.push_str(&format!("ic_ir={}\n", opt(self.ic_ir)));
        s.push_str(&format!("rank_ic_mean={:.6}\n", self.rank_ic_mean));
        s.push_str(&format!("annual_return={:.6}\n", self.annual_return));
        s.push_str(&format!("sharpe={}\n", opt(self.sharpe)));
        s.push_str(&format!("max_drawdown={:.6}\n", self.max_drawdown));
        s.push_str(&format!("avg_turnover={:.6}\n", self.avg_turnover));
        s.push_str(&format!("quantiles={}\n", self.quantiles));
        s.push_str(&format!("cost_rate={}\n", self.cost_rate));
        s.push_str(&format!("horizon={}\n", self.horizon));
        s.push_str(&format!("lag={}\n", self.lag));
        s.push_str(&format!("n_rebalances={}\n", self.n_rebalances));
        s
    }
}

/// Equal-weight quantile long-short backtest with linear transaction costs.
///
/// Every `horizon` bars the defined alpha values are ranked into `quantiles`
/// buckets; the top bucket is held long (+1 total weight), the bottom short
/// (−1). Gross period return is the long bucket's mean forward return minus
/// the short bucket's; net subtracts `cost_rate` × turnover, where turnover
/// is Σ|Δweight| against the previous holdings (2 on the first rebalance).
pub fn quantile_backtest(
    alpha: &AlphaMatrix,
    panel: &Panel,
    horizon: usize,
    lag: usize,
    quantiles: usize,
    cost_rate: f64,
) -> Result<BacktestReport> {
    if quantiles < 2 {
        return Err(Error::InvalidArgument("quantiles must be >= 2".into()));
    }
    if !(0.0..1.0).contains(&cost_rate) {
        return Err(Error::InvalidArgument("cost_rate must be in [0, 1)".into()));
    }
    let labels = forward_returns(panel, horizon, lag)?;
    let a = &alpha.values;
    let l = &labels.values;
    if a.rows() != l.rows() || a.cols() != l.cols() {
        return Err(Error::ShapeMismatch("alpha does not match the panel".into()));
    }
    let n = a.cols();

    let mut net_periods: Vec<f64> = Vec::new();
    let mut turnovers: Vec<f64> = Vec::new();
    let mut prev_weights = vec![0.0; n];
    for t in (0..a.rows()).step_by(horizon.max(1)) {
        let mut idx: Vec<usize> = (0..n)
            .filter(|&j| !is_missing(a.get(t, j)) && !is_missing(l.get(t, j)))
            .collect();
        if idx.len() < 2 * quantiles {
            continue;
        }
        // Deterministic: ties broken by instrument index.
        idx.sort_by(|&x, &y| a.get(t, x).partial_cmp(&a.get(t, y)).unwrap().then(x.cmp(&y)));
        let m = idx.len();
        let bucket = |pos: usize| pos * quantiles / m;
        let bottom: Vec<usize> =
            idx.iter().enumerate().filter(|(p, _)| bucket(*p) == 0).map(|(_, &j)| j).collect();
        let top: Vec<usize> = idx
            .iter()
            .enumerate()
            .filter(|(p, _)| bucket(*p) == quantiles - 1)
            .map(|(_, &j)| j)
            .collect();
        let long_ret = top.iter().map(|&j| l.get(t, j)).sum::<f64>() / top.len() as f64;
        let short_ret = bottom.iter().map(|&j| l.get(t, j)).sum::<f64>() / bottom.len() as f64;
        let gross = long_ret - short_ret;

        let mut weights = vec![0.0; n];
        for &j in &top {
            weights[j] = 1.0 / top.len() as f64;
        }
        for &j in &bottom {
            weights[j] = -1.0 / bottom.len() as f64;
        }
        let turnover: f64 =
            weights.iter().zip(&prev_weights).map(|(w, p)| (w - p).abs()).sum();
        prev_weights = weights;

        net_periods.push(gross - cost_rate * turnover);
        turnovers.push(turnover);
    }
    if net_periods.is_empty() {
        return Err(Error::Degenerate(format!(
            "no rebalance bar had at least {} defined names",
            2 * quantiles
        )));
    }

    // Spread each holding period's net return evenly over its bars.
    let mut daily = Vec::with_capacity(net_periods.len() * horizon);
    for r in &net_periods {
        for _ in 0..horizon {
            daily.push(r / horizon as f64);
        }
    }
    let mean_daily = daily.iter().sum::<f64>() / daily.len() as f64;
    let annual_return = mean_daily * TRADING_DAYS_PER_YEAR;
    let sharpe = if daily.len() >= 2 {
        let var = daily.iter().map(|v| (v - mean_daily) * (v - mean_daily)).sum::<f64>()
            / (daily.len() - 1) as f64;
        let std = var.sqrt();
        if std > 0.0 {
            Some(mean_daily / std * TRADING_DAYS_PER_YEAR.sqrt())
        } else {
            None
        }
    } else {
        None
    };
    let mut equity = 0.0;
    let mut peak = 0.0f64;
    let mut max_drawdown = 0.0f64;
    for r in &daily {
        equity += r;
        peak = peak.max(equity);
        max_drawdown = max_drawdown.min(equity - peak);
    }

    let pearson_ic = ic_series(alpha, &labels, IcKind::Pearson, DEFAULT_MIN_OBS)?;
    let spearman_ic = ic_series(alpha, &labels, IcKind::Spearman, DEFAULT_MIN_OBS)?;
    let (mean_ic, ic_ir) = match ic_summary(&pearson_ic) {
        Ok(s) => (s.mean_ic, s.ic_ir),
        Err(_) => (MISSING, None),
    };
    let rank_ic_mean = ic_summary(&spearman_ic).map(|s| s.mean_ic).unwrap_or(MISSING);

    Ok(BacktestReport {
        daily_ls_returns: daily,
        mean_ic,
        ic_ir,
        rank_ic_mean,
        annual_return,
        sharpe,
        max_drawdown,
        avg_turnover: turnovers.iter().sum::<f64>() / turnovers.len() as f64,
        quantiles,
        cost_rate,
        horizon,
        lag,
        n_rebalances: net_periods.len(),
    })
}

/// Causality audit for any panel→matrix evaluator: perturb all fields at bars
/// strictly after `t` and require rows `0..=t` of the output to be
/// bit-identical.
pub fn audit_causality<F>(eval: F, panel: &Panel, t: usize) -> Result<bool>
where
    F: Fn(&Panel) -> Result<Matrix>,
{
    if t + 1 >= panel.t() {
        return Err(Error::InvalidArgument("audit bar must satisfy t < T - 1".into()));
    }
    let baseline = eval(panel)?;
    let perturbed_panel = panel.scale_fields_after(t, 1.1);
    let perturbed = eval(&perturbed_panel)?;
    if baseline.rows() != perturbed.rows() || baseline.cols() != perturbed.cols() {
        return Ok(false);
    }
    for row in 0..=t {
        for j in 0..baseline.cols() {
            let x = baseline.get(row, j);
            let y = perturbed.get(row, j);
            if x.to_bits() != y.to_bits() && !(x.is_nan() && y.is_nan()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Perturbs every field after bar `t` by +10% and checks that the alpha's
/// rows up to and including `t` are unchanged.
pub fn no_lookahead_audit(expr: &Expr, panel: &Panel, t: usize) -> Result<bool> {
    audit_causality(|p| eval_batch(expr, p, 1).map(|a| a.values), panel, t)
}
