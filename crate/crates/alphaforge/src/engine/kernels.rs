//! Operator kernels shared by the batch and streaming evaluators.
//!
//! Time-series kernels are incremental per-instrument state machines: ring
//! buffers plus compensated running sums (exactly recomputed every
//! [`RECOMPUTE_INTERVAL`] updates), monotonic deques for rolling min/max, and
//! order-statistic scans for rolling rank. Both evaluators advance the same
//! state machines in the same order, so their outputs are bit-identical.
//!
//! Missing-value policy is strict: any missing input inside a window makes
//! the output missing. Cross-sectional kernels skip missing entries and
//! require at least two defined entries per bar.

use std::collections::VecDeque;

use crate::matrix::{is_missing, MISSING};

/// Running sums are rebuilt exactly from the window buffer this often.
pub const RECOMPUTE_INTERVAL: u64 = 4096;

// ---------------------------------------------------------------------------
// element-wise
// ---------------------------------------------------------------------------

#[inline]
pub fn ew_add(a: f64, b: f64) -> f64 {
    a + b
}

#[inline]
pub fn ew_sub(a: f64, b: f64) -> f64 {
    a - b
}

#[inline]
pub fn ew_mul(a: f64, b: f64) -> f64 {
    a * b
}

#[inline]
pub fn ew_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        MISSING
    } else {
        a / b
    }
}

#[inline]
pub fn ew_abs(a: f64) -> f64 {
    a.abs()
}

#[inline]
pub fn ew_log(a: f64) -> f64 {
    if a > 0.0 {
        a.ln()
    } else {
        MISSING
    }
}

#[inline]
pub fn ew_sign(a: f64) -> f64 {
    if is_missing(a) {
        MISSING
    } else if a > 0.0 {
        1.0
    } else if a < 0.0 {
        -1.0
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// incremental building blocks
// ---------------------------------------------------------------------------

/// Kahan-compensated running sum.
#[derive(Debug, Clone, Default)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn sub(&mut self, v: f64) {
        self.add(-v);
    }

    pub fn value(&self) -> f64 {
        self.sum
    }

    pub fn reset(&mut self) {
        self.sum = 0.0;
        self.c = 0.0;
    }
}

/// Fixed-capacity ring buffer holding the current window (oldest first).
#[derive(Debug, Clone)]
pub struct RingBuf {
    data: Vec<f64>,
    head: usize,
    len: usize,
}

impl RingBuf {
    pub fn new(capacity: usize) -> Self {
        RingBuf { data: vec![0.0; capacity], head: 0, len: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_full(&self) -> bool {
        self.len == self.data.len()
    }

    /// Append a value, returning the evicted one when the buffer was full.
    pub fn push(&mut self, v: f64) -> Option<f64> {
        let cap = self.data.len();
        if self.len < cap {
            self.data[(self.head + self.len) % cap] = v;
            self.len += 1;
            None
        } else {
            let evicted = self.data[self.head];
            self.data[self.head] = v;
            self.head = (self.head + 1) % cap;
            Some(evicted)
        }
    }

    pub fn front(&self) -> f64 {
        debug_assert!(self.len > 0);
        self.data[self.head]
    }

    /// Oldest-to-newest iteration over the current contents.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        let cap = self.data.len();
        (0..self.len).map(move |k| self.data[(self.head + k) % cap])
    }
}

// ---------------------------------------------------------------------------
// time-series state machines
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DelayState {
    ring: RingBuf,
}

impl DelayState {
    pub fn new(d: usize) -> Self {
        DelayState { ring: RingBuf::new(d + 1) }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        self.ring.push(x);
        if self.ring.is_full() {
            self.ring.front()
        } else {
            MISSING
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeltaState {
    ring: RingBuf,
}

impl DeltaState {
    pub fn new(d: usize) -> Self {
        DeltaState { ring: RingBuf::new(d + 1) }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        self.ring.push(x);
        if self.ring.is_full() {
            x - self.ring.front()
        } else {
            MISSING
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeanState {
    ring: RingBuf,
    sum: Kahan,
    nan_in_window: usize,
    pushes: u64,
    w: usize,
}

impl MeanState {
    pub fn new(w: usize) -> Self {
        MeanState { ring: RingBuf::new(w), sum: Kahan::default(), nan_in_window: 0, pushes: 0, w }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        if let Some(evicted) = self.ring.push(x) {
            if is_missing(evicted) {
                self.nan_in_window -= 1;
            } else {
                self.sum.sub(evicted);
            }
        }
        if is_missing(x) {
            self.nan_in_window += 1;
        } else {
            self.sum.add(x);
        }
        self.pushes += 1;
        if self.pushes % RECOMPUTE_INTERVAL == 0 {
            self.sum.reset();
            for v in self.ring.iter() {
                if !is_missing(v) {
                    self.sum.add(v);
                }
            }
        }
        if !self.ring.is_full() || self.nan_in_window > 0 {
            MISSING
        } else {
            self.sum.value() / self.w as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct StdState {
    ring: RingBuf,
    sum: Kahan,
    sumsq: Kahan,
    nan_in_window: usize,
    pushes: u64,
    w: usize,
}

impl StdState {
    pub fn new(w: usize) -> Self {
        StdState {
            ring: RingBuf::new(w),
            sum: Kahan::default(),
            sumsq: Kahan::default(),
            nan_in_window: 0,
            pushes: 0,
            w,
        }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        if let Some(evicted) = self.ring.push(x) {
            if is_missing(evicted) {
                self.nan_in_window -= 1;
            } else {
                self.sum.sub(evicted);
                self.sumsq.sub(evicted * evicted);
            }
        }
        if is_missing(x) {
            self.nan_in_window += 1;
        } else {
            self.sum.add(x);
            self.sumsq.add(x * x);
        }
        self.pushes += 1;
        if self.pushes % RECOMPUTE_INTERVAL == 0 {
            self.sum.reset();
            self.sumsq.reset();
            for v in self.ring.iter() {
                if !is_missing(v) {
                    self.sum.add(v);
                    self.sumsq.add(v * v);
                }
            }
        }
        if !self.ring.is_full() || self.nan_in_window > 0 {
            return MISSING;
        }
        let w = self.w as f64;
        let s = self.sum.value();
        // Sample variance, divisor w-1.
        let var = (self.sumsq.value() - s * s / w) / (w - 1.0);
        var.max(0.0).sqrt()
    }
}

/// Rolling min/max via a monotonic deque of (push index, value).
#[derive(Debug, Clone)]
pub struct ExtremeState {
    deque: VecDeque<(u64, f64)>,
    ring: RingBuf,
    nan_in_window: usize,
    pushes: u64,
    w: usize,
    is_max: bool,
}

impl ExtremeState {
    pub fn new(w: usize, is_max: bool) -> Self {
        ExtremeState {
            deque: VecDeque::new(),
            ring: RingBuf::new(w),
            nan_in_window: 0,
            pushes: 0,
            w,
            is_max,
        }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        let idx = self.pushes;
        self.pushes += 1;
        if let Some(evicted) = self.ring.push(x) {
            if is_missing(evicted) {
                self.nan_in_window -= 1;
            }
        }
        if is_missing(x) {
            self.nan_in_window += 1;
        } else {
            while let Some(&(_, back)) = self.deque.back() {
                let dominated = if self.is_max { back <= x } else { back >= x };
                if dominated {
                    self.deque.pop_back();
                } else {
                    break;
                }
            }
            self.deque.push_back((idx, x));
        }
        // Drop entries that left the window.
        while let Some(&(front_idx, _)) = self.deque.front() {
            if front_idx + (self.w as u64) <= idx {
                self.deque.pop_front();
            } else {
                break;
            }
        }
        if self.pushes < self.w as u64 || self.nan_in_window > 0 {
            MISSING
        } else {
            self.deque.front().map(|&(_, v)| v).unwrap_or(MISSING)
        }
    }
}

/// Rolling rank of the newest value within its window, scaled to [0, 1].
#[derive(Debug, Clone)]
pub struct RankState {
    ring: RingBuf,
    nan_in_window: usize,
    w: usize,
}

impl RankState {
    pub fn new(w: usize) -> Self {
        RankState { ring: RingBuf::new(w), nan_in_window: 0, w }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        if let Some(evicted) = self.ring.push(x) {
            if is_missing(evicted) {
                self.nan_in_window -= 1;
            }
        }
        if is_missing(x) {
            self.nan_in_window += 1;
        }
        if !self.ring.is_full() || self.nan_in_window > 0 {
            return MISSING;
        }
        if self.w == 1 {
            return 0.5;
        }
        let mut less = 0usize;
        let mut equal = 0usize;
        for v in self.ring.iter() {
            if v < x {
                less += 1;
            } else if v == x {
                equal += 1;
            }
        }
        // Average rank of the newest value (1-based), scaled by (w-1).
        let rank = less as f64 + (equal as f64 + 1.0) / 2.0;
        (rank - 1.0) / (self.w as f64 - 1.0)
    }
}

/// Rolling Pearson correlation via compensated co-moment sums.
#[derive(Debug, Clone)]
pub struct CorrState {
    ring_x: RingBuf,
    ring_y: RingBuf,
    sx: Kahan,
    sy: Kahan,
    sxx: Kahan,
    syy: Kahan,
    sxy: Kahan,
    nan_in_window: usize,
    pushes: u64,
    w: usize,
}

impl CorrState {
    pub fn new(w: usize) -> Self {
        CorrState {
            ring_x: RingBuf::new(w),
            ring_y: RingBuf::new(w),
            sx: Kahan::default(),
            sy: Kahan::default(),
            sxx: Kahan::default(),
            syy: Kahan::default(),
            sxy: Kahan::default(),
            nan_in_window: 0,
            pushes: 0,
            w,
        }
    }

    fn add_pair(&mut self, x: f64, y: f64) {
        self.sx.add(x);
        self.sy.add(y);
        self.sxx.add(x * x);
        self.syy.add(y * y);
        self.sxy.add(x * y);
    }

    pub fn push(&mut self, x: f64, y: f64) -> f64 {
        let ex = self.ring_x.push(x);
        let ey = self.ring_y.push(y);
        if let (Some(ex), Some(ey)) = (ex, ey) {
            if is_missing(ex) || is_missing(ey) {
                self.nan_in_window -= 1;
            } else {
                self.sx.sub(ex);
                self.sy.sub(ey);
                self.sxx.sub(ex * ex);
                self.syy.sub(ey * ey);
                self.sxy.sub(ex * ey);
            }
        }
        if is_missing(x) || is_missing(y) {
            self.nan_in_window += 1;
        } else {
            self.add_pair(x, y);
        }
        self.pushes += 1;
        if self.pushes % RECOMPUTE_INTERVAL == 0 {
            self.sx.reset();
            self.sy.reset();
            self.sxx.reset();
            self.syy.reset();
            self.sxy.reset();
            let pairs: Vec<(f64, f64)> = self.ring_x.iter().zip(self.ring_y.iter()).collect();
            for (px, py) in pairs {
                if !is_missing(px) && !is_missing(py) {
                    self.add_pair(px, py);
                }
            }
        }
        if !self.ring_x.is_full() || self.nan_in_window > 0 {
            return MISSING;
        }
        let w = self.w as f64;
        let vx = self.sxx.value() - self.sx.value() * self.sx.value() / w;
        let vy = self.syy.value() - self.sy.value() * self.sy.value() / w;
        if vx <= 0.0 || vy <= 0.0 {
            return MISSING;
        }
        let cov = self.sxy.value() - self.sx.value() * self.sy.value() / w;
        (cov / (vx * vy).sqrt()).clamp(-1.0, 1.0)
    }
}

// ---------------------------------------------------------------------------
// cross-sectional row kernels
// ---------------------------------------------------------------------------

fn defined_indices(row: &[f64]) -> Vec<usize> {
    (0..row.len()).filter(|&i| !is_missing(row[i])).collect()
}

fn blank(row: &mut [f64]) {
    for v in row.iter_mut() {
        *v = MISSING;
    }
}

/// Average ranks over defined entries, scaled to [0, 1] as (rank-1)/(n-1).
pub fn cs_rank_row(row: &mut [f64]) {
    let idx = defined_indices(row);
    let n = idx.len();
    if n < 2 {
        blank(row);
        return;
    }
    let mut order = idx.clone();
    order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).expect("defined values are ordered"));
    let mut ranks = vec![0.0; order.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && row[order[end]] == row[order[start]] {
            end += 1;
        }
        // 1-based average rank of the tie group [start, end).
        let avg = (start + end + 1) as f64 / 2.0;
        for r in ranks.iter_mut().take(end).skip(start) {
            *r = avg;
        }
        start = end;
    }
    let scale = (n - 1) as f64;
    let mut out = vec![MISSING; row.len()];
    for (k, &i) in order.iter().enumerate() {
        out[i] = (ranks[k] - 1.0) / scale;
    }
    row.copy_from_slice(&out);
}

/// Cross-sectional z-score with sample standard deviation (divisor n-1).
pub fn cs_zscore_row(row: &mut [f64]) {
    let idx = defined_indices(row);
    let n = idx.len();
    if n < 2 {
        blank(row);
        return;
    }
    let mut sum = 0.0;
    for &i in &idx {
        sum += row[i];
    }
    let mean = sum / n as f64;
    let mut ssq = 0.0;
    for &i in &idx {
        let d = row[i] - mean;
        ssq += d * d;
    }
    let std = (ssq / (n - 1) as f64).sqrt();
    if std == 0.0 || !std.is_finite() {
        blank(row);
        return;
    }
    for &i in &idx {
        row[i] = (row[i] - mean) / std;
    }
}

/// Replace each defined value by the mean of its sector group's defined values.
pub fn group_mean_row(row: &mut [f64], group_ids: &[usize], n_groups: usize) {
    group_row(row, group_ids, n_groups, false);
}

/// Demean each defined value within its sector group.
pub fn group_neutralize_row(row: &mut [f64], group_ids: &[usize], n_groups: usize) {
    group_row(row, group_ids, n_groups, true);
}

fn group_row(row: &mut [f64], group_ids: &[usize], n_groups: usize, neutralize: bool) {
    debug_assert_eq!(row.len(), group_ids.len());
    let defined = row.iter().filter(|v| !is_missing(**v)).count();
    if defined < 2 {
        blank(row);
        return;
    }
    let mut sums = vec![0.0f64; n_groups];
    let mut counts = vec![0usize; n_groups];
    for (i, v) in row.iter().enumerate() {
        if !is_missing(*v) {
            sums[group_ids[i]] += *v;
            counts[group_ids[i]] += 1;
        }
    }
    for i in 0..row.len() {
        if is_missing(row[i]) {
            continue;
        }
        let g = group_ids[i];
        let mean = sums[g] / counts[g] as f64;
        row[i] = if neutralize { row[i] - mean } else { mean };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_state_matches_direct_sum() {
        let mut st = MeanState::new(3);
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut out = Vec::new();
        for x in xs {
            out.push(st.push(x));
        }
        assert!(is_missing(out[0]) && is_missing(out[1]));
        assert_eq!(out[2], 2.0);
        assert_eq!(out[3], 3.0);
        assert_eq!(out[4], 4.0);
    }

    #[test]
    fn missing_in_window_blanks_output_until_it_leaves() {
        let mut st = MeanState::new(2);
        assert!(is_missing(st.push(1.0)));
        assert!(is_missing(st.push(MISSING)));
        assert!(is_missing(st.push(3.0))); // window [NaN, 3]
        assert_eq!(st.push(5.0), 4.0); // window [3, 5]
    }

    #[test]
    fn extremes_track_window() {
        let mut mx = ExtremeState::new(3, true);
        let mut mn = ExtremeState::new(3, false);
        let xs = [5.0, 1.0, 4.0, 2.0, 3.0];
        let maxes: Vec<f64> = xs.iter().map(|&x| mx.push(x)).collect();
        let mins: Vec<f64> = xs.iter().map(|&x| mn.push(x)).collect();
        assert_eq!(&maxes[2..], &[5.0, 4.0, 4.0]);
        assert_eq!(&mins[2..], &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn rank_uses_average_ranks() {
        let mut st = RankState::new(3);
        st.push(1.0);
        st.push(1.0);
        // window [1, 1, 1]: less=0, equal=3 -> rank 2 -> scaled 0.5
        assert_eq!(st.push(1.0), 0.5);
        // window [1, 1, 4]: newest is the max -> rank 3 -> 1.0
        assert_eq!(st.push(4.0), 1.0);
    }

    #[test]
    fn corr_of_identical_series_is_one() {
        let mut st = CorrState::new(3);
        for (i, x) in [1.0, 2.0, 4.0, 8.0].iter().enumerate() {
            let c = st.push(*x, *x);
            if i >= 2 {
                assert!((c - 1.0).abs() < 1e-12, "corr {c}");
            }
        }
    }

    #[test]
    fn corr_missing_when_one_side_constant() {
        let mut st = CorrState::new(3);
        st.push(1.0, 1.0);
        st.push(2.0, 1.0);
        assert!(is_missing(st.push(3.0, 1.0)));
    }

    #[test]
    fn cs_rank_tie_example() {
        let mut row = [1.0, 1.0, 2.0];
        cs_rank_row(&mut row);
        assert_eq!(row, [0.25, 0.25, 1.0]);
    }

    #[test]
    fn cs_rank_scales_to_unit_interval() {
        let mut row = [10.0, 20.0, 30.0];
        cs_rank_row(&mut row);
        assert_eq!(row, [0.0, 0.5, 1.0]);
    }

    #[test]
    fn cs_kernels_require_two_defined() {
        let mut row = [1.0, MISSING, MISSING];
        cs_rank_row(&mut row);
        assert!(row.iter().all(|v| is_missing(*v)));
        let mut row = [3.0, MISSING];
        cs_zscore_row(&mut row);
        assert!(row.iter().all(|v| is_missing(*v)));
    }

    #[test]
    fn group_neutralize_demeans_within_group() {
        let mut row = [1.0, 3.0, 10.0, 30.0];
        let groups = [0, 0, 1, 1];
        group_neutralize_row(&mut row, &groups, 2);
        assert_eq!(row, [-1.0, 1.0, -10.0, 10.0]);
    }

    #[test]
    fn running_sums_survive_recompute_boundary() {
        let mut st = MeanState::new(5);
        let mut direct = Vec::new();
        let n = (RECOMPUTE_INTERVAL + 10) as usize;
        let xs: Vec<f64> = (0..n).map(|i| ((i * 37) % 101) as f64 * 0.25 + 1.0).collect();
        for (i, &x) in xs.iter().enumerate() {
            let got = st.push(x);
            if i >= 4 {
                let want: f64 = xs[i - 4..=i].iter().sum::<f64>() / 5.0;
                direct.push((got - want).abs());
            }
        }
        assert!(direct.into_iter().fold(0.0f64, f64::max) < 1e-12);
    }
}
