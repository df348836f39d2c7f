//! The alpha pool: a persistent, append-only store of validated alphas with
//! duplicate/correlation gating and marginal-contribution scoring.
//!
//! A store is a directory holding `header.json` (reference-panel fingerprint,
//! correlation cap, LSH parameters) and `records.jsonl` (one record per
//! line). Correlations are computed over each alpha's value grid on the
//! reference panel; a random-hyperplane LSH index — rebuilt from the header's
//! plane seed on open, never persisted — prefilters candidates for the exact
//! scan.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{LabelMatrix, Panel};
use crate::engine::AlphaMatrix;
use crate::engine::kernels::cs_zscore_row;
use crate::error::{Error, Result};
use crate::matrix::{is_missing, Matrix, MISSING};
use crate::metrics::{ic_series, ic_summary, pearson, IcKind, DEFAULT_MIN_OBS};
use crate::rng::Rng;

pub const DEFAULT_N_PLANES: usize = 256;
pub const DEFAULT_CORR_CAP: f64 = 0.7;
/// How many LSH-ranked candidates the prefiltered exact scan keeps.
pub const DEFAULT_PREFILTER_M: usize = 50;

/// Content id: SHA-256 of the canonical expression text, hex-encoded.
pub fn record_id(expression: &str) -> String {
    let digest = Sha256::digest(expression.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RecordMetrics {
    pub mean_ic: f64,
    pub ic_ir: Option<f64>,
    pub sharpe: Option<f64>,
    pub annual_return: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AlphaRecord {
    pub id: String,
    pub name: String,
    pub expression: String,
    pub description: String,
    pub tags: Vec<String>,
    pub metrics: RecordMetrics,
    pub created_at: String,
    /// Full reference-panel grid, row-major, missing as JSON null.
    #[serde(with = "nullable_values")]
    pub reference_values: Vec<f64>,
}

mod nullable_values {
    use super::MISSING;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opts: Vec<Option<f64>> =
            v.iter().map(|x| if x.is_nan() { None } else { Some(*x) }).collect();
        opts.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opts = Vec::<Option<f64>>::deserialize(d)?;
        Ok(opts.into_iter().map(|x| x.unwrap_or(MISSING)).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolHeader {
    pub reference_fingerprint: String,
    pub reference_rows: usize,
    pub reference_cols: usize,
    pub corr_cap: f64,
    pub n_planes: usize,
    pub plane_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InsertOutcome {
    Accepted,
    Rejected(String),
}

impl InsertOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, InsertOutcome::Accepted)
    }
}

/// Packed LSH signature (one bit per hyperplane).
#[derive(Debug, Clone)]
pub struct Signature {
    bits: Vec<u64>,
    n_planes: usize,
}

/// Correlation estimate from two signatures: cos(π · hamming / n_planes).
pub fn lsh_estimate(a: &Signature, b: &Signature) -> Result<f64> {
    if a.n_planes != b.n_planes {
        return Err(Error::InvalidArgument("signature lengths differ".into()));
    }
    let hamming: u32 = a.bits.iter().zip(&b.bits).map(|(x, y)| (x ^ y).count_ones()).sum();
    Ok((std::f64::consts::PI * hamming as f64 / a.n_planes as f64).cos())
}

pub struct AlphaPool {
    dir: PathBuf,
    header: PoolHeader,
    records: Vec<AlphaRecord>,
    signatures: Vec<Signature>,
    ids: HashSet<String>,
    /// n_planes random normals over the reference grid, from plane_seed.
    planes: Vec<Vec<f64>>,
}

impl AlphaPool {
    /// Create a new store directory (must not already contain a header).
    pub fn create(
        dir: &Path,
        reference: &Panel,
        corr_cap: f64,
        n_planes: usize,
        plane_seed: u64,
    ) -> Result<AlphaPool> {
        if !(0.0..=1.0).contains(&corr_cap) {
            return Err(Error::InvalidArgument("corr_cap must be in [0, 1]".into()));
        }
        if n_planes == 0 {
            return Err(Error::InvalidArgument("n_planes must be > 0".into()));
        }
        fs::create_dir_all(dir)?;
        let header_path = dir.join("header.json");
        if header_path.exists() {
            return Err(Error::Pool(format!("store already exists at {}", dir.display())));
        }
        let header = PoolHeader {
            reference_fingerprint: reference.fingerprint(),
            reference_rows: reference.t(),
            reference_cols: reference.n(),
            corr_cap,
            n_planes,
            plane_seed,
        };
        fs::write(&header_path, serde_json::to_string_pretty(&header)?)?;
        fs::write(dir.join("records.jsonl"), "")?;
        let planes = build_planes(&header);
        Ok(AlphaPool {
            dir: dir.to_path_buf(),
            header,
            records: Vec::new(),
            signatures: Vec::new(),
            ids: HashSet::new(),
            planes,
        })
    }

    /// Open an existing store and rebuild the in-memory index.
    pub fn open(dir: &Path) -> Result<AlphaPool> {
        let header: PoolHeader =
            serde_json::from_str(&fs::read_to_string(dir.join("header.json"))?)?;
        let planes = build_planes(&header);
        let mut pool = AlphaPool {
            dir: dir.to_path_buf(),
            header,
            records: Vec::new(),
            signatures: Vec::new(),
            ids: HashSet::new(),
            planes,
        };
        let body = fs::read_to_string(dir.join("records.jsonl"))?;
        for line in body.lines().filter(|l| !l.trim().is_empty()) {
            let record: AlphaRecord = serde_json::from_str(line)?;
            pool.index_record(record)?;
        }
        Ok(pool)
    }

    pub fn header(&self) -> &PoolHeader {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[AlphaRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&AlphaRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Build a record from an alpha evaluated on the reference panel.
    /// Errors when the panel is not the store's reference panel.
    pub fn record_from_alpha(
        &self,
        name: &str,
        description: &str,
        tags: &[String],
        alpha: &AlphaMatrix,
        panel: &Panel,
        metrics: RecordMetrics,
    ) -> Result<AlphaRecord> {
        if panel.fingerprint() != self.header.reference_fingerprint {
            return Err(Error::Pool(
                "panel fingerprint does not match the store's reference panel".into(),
            ));
        }
        if alpha.values.rows() != self.header.reference_rows
            || alpha.values.cols() != self.header.reference_cols
        {
            return Err(Error::ShapeMismatch("alpha does not match the reference grid".into()));
        }
        Ok(AlphaRecord {
            id: record_id(&alpha.expr_text),
            name: name.to_string(),
            expression: alpha.expr_text.clone(),
            description: description.to_string(),
            tags: tags.to_vec(),
            metrics,
            created_at: chrono::Utc::now().to_rfc3339(),
            reference_values: alpha.values.data().to_vec(),
        })
    }

    /// Gate a candidate on duplicate id and maximum |correlation|, then
    /// append it to the store.
    pub fn insert(&mut self, candidate: AlphaRecord) -> Result<InsertOutcome> {
        let expected = self.header.reference_rows * self.header.reference_cols;
        if candidate.reference_values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "reference_values has {} cells, the reference grid has {expected}",
                candidate.reference_values.len()
            )));
        }
        if self.ids.contains(&candidate.id) {
            return Ok(InsertOutcome::Rejected(format!("duplicate id {}", candidate.id)));
        }
        if !self.records.is_empty() {
            let (id, corr) =
                self.max_correlation(&candidate.reference_values, Some(DEFAULT_PREFILTER_M))?;
            if corr.abs() > self.header.corr_cap {
                return Ok(InsertOutcome::Rejected(format!(
                    "correlation {corr:.4} with {id} exceeds cap {}",
                    self.header.corr_cap
                )));
            }
        }
        let line = serde_json::to_string(&candidate)?;
        let path = self.dir.join("records.jsonl");
        let mut body = fs::read_to_string(&path).unwrap_or_default();
        body.push_str(&line);
        body.push('\n');
        fs::write(&path, body)?;
        self.index_record(candidate)?;
        Ok(InsertOutcome::Accepted)
    }

    fn index_record(&mut self, record: AlphaRecord) -> Result<()> {
        let expected = self.header.reference_rows * self.header.reference_cols;
        if record.reference_values.len() != expected {
            return Err(Error::Pool(format!("record {} has a malformed value grid", record.id)));
        }
        self.signatures.push(self.signature(&record.reference_values));
        self.ids.insert(record.id.clone());
        self.records.push(record);
        Ok(())
    }

    /// Random-hyperplane signature of a centered value grid.
    pub fn signature(&self, values: &[f64]) -> Signature {
        let centered = center(values);
        let n = self.header.n_planes;
        let mut bits = vec![0u64; n.div_ceil(64)];
        for (i, plane) in self.planes.iter().enumerate() {
            let dot: f64 = centered
                .iter()
                .zip(plane)
                .map(|(v, p)| if v.is_nan() { 0.0 } else { v * p })
                .sum();
            if dot >= 0.0 {
                bits[i / 64] |= 1u64 << (i % 64);
            }
        }
        Signature { bits, n_planes: n }
    }

    /// The stored record most correlated (by |corr|) with `values`.
    ///
    /// With `prefilter_m` set, only the top-m records by LSH-estimated
    /// correlation are exactly scored; exact mode scans everything.
    pub fn max_correlation(
        &self,
        values: &[f64],
        prefilter_m: Option<usize>,
    ) -> Result<(String, f64)> {
        if self.records.is_empty() {
            return Err(Error::Pool("store is empty".into()));
        }
        let expected = self.header.reference_rows * self.header.reference_cols;
        if values.len() != expected {
            return Err(Error::ShapeMismatch("candidate grid size mismatch".into()));
        }
        let candidates: Vec<usize> = match prefilter_m {
            Some(m) if self.records.len() > m => {
                let sig = self.signature(values);
                let mut scored: Vec<(usize, f64)> = self
                    .signatures
                    .iter()
                    .enumerate()
                    .map(|(i, s)| Ok((i, lsh_estimate(&sig, s)?.abs())))
                    .collect::<Result<_>>()?;
                scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                scored.into_iter().take(m).map(|(i, _)| i).collect()
            }
            _ => (0..self.records.len()).collect(),
        };
        let mut best: Option<(usize, f64)> = None;
        for i in candidates {
            let c = grid_correlation(values, &self.records[i].reference_values);
            if best.map_or(true, |(_, b)| c.abs() > b.abs()) {
                best = Some((i, c));
            }
        }
        let (i, corr) = best.expect("candidate list is nonempty");
        Ok((self.records[i].id.clone(), corr))
    }

    /// Leave-in delta IC: mean IC of the equal-weight z-scored composite of
    /// the named members plus the candidate, minus the composite without it.
    pub fn marginal_score(
        &self,
        candidate_values: &[f64],
        member_ids: &[String],
        labels: &LabelMatrix,
    ) -> Result<f64> {
        if member_ids.is_empty() {
            return Err(Error::InvalidArgument("member_ids must be nonempty".into()));
        }
        let rows = self.header.reference_rows;
        let cols = self.header.reference_cols;
        if labels.values.rows() != rows || labels.values.cols() != cols {
            return Err(Error::ShapeMismatch("labels do not match the reference grid".into()));
        }
        if candidate_values.len() != rows * cols {
            return Err(Error::ShapeMismatch("candidate grid size mismatch".into()));
        }
        let mut grids: Vec<&[f64]> = Vec::with_capacity(member_ids.len());
        for id in member_ids {
            let r = self
                .get(id)
                .ok_or_else(|| Error::Pool(format!("unknown member id {id}")))?;
            grids.push(&r.reference_values);
        }
        let without = self.composite_ic(&grids, labels)?;
        grids.push(candidate_values);
        let with = self.composite_ic(&grids, labels)?;
        Ok(with - without)
    }

    fn composite_ic(&self, grids: &[&[f64]], labels: &LabelMatrix) -> Result<f64> {
        let rows = self.header.reference_rows;
        let cols = self.header.reference_cols;
        let mut composite = Matrix::missing(rows, cols);
        let mut zscored: Vec<Matrix> = Vec::with_capacity(grids.len());
        for g in grids {
            let mut m = Matrix::from_vec(rows, cols, g.to_vec())?;
            for r in 0..rows {
                cs_zscore_row(m.row_mut(r));
            }
            zscored.push(m);
        }
        for r in 0..rows {
            for c in 0..cols {
                let mut sum = 0.0;
                let mut k = 0usize;
                for m in &zscored {
                    let v = m.get(r, c);
                    if !is_missing(v) {
                        sum += v;
                        k += 1;
                    }
                }
                if k > 0 {
                    composite.set(r, c, sum / k as f64);
                }
            }
        }
        let alpha = AlphaMatrix { values: composite, expr_text: "composite".into() };
        let series = ic_series(&alpha, labels, IcKind::Pearson, DEFAULT_MIN_OBS)?;
        let summary = ic_summary(&series)
            .map_err(|_| Error::Degenerate("composite has no scorable bars".into()))?;
        Ok(summary.mean_ic)
    }
}

fn build_planes(header: &PoolHeader) -> Vec<Vec<f64>> {
    let dim = header.reference_rows * header.reference_cols;
    let mut rng = Rng::seed_from(header.plane_seed);
    (0..header.n_planes).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect()
}

fn center(values: &[f64]) -> Vec<f64> {
    let defined: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if defined.is_empty() {
        return values.to_vec();
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    values.iter().map(|v| if v.is_nan() { *v } else { v - mean }).collect()
}

/// Pearson correlation between two grids over jointly defined cells;
/// 0 when fewer than 3 joint cells exist or either side is constant.
pub fn grid_correlation(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (x, y) in a.iter().zip(b) {
        if !x.is_nan() && !y.is_nan() {
            xs.push(*x);
            ys.push(*y);
        }
    }
    if xs.len() < 3 {
        return 0.0;
    }
    let c = pearson(&xs, &ys);
    if is_missing(c) {
        0.0
    } else {
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{forward_returns, generate_synthetic};
    use crate::dsl::parse;
    use crate::engine::eval_batch;

    fn reference() -> Panel {
        generate_synthetic(60, 10, 2, None, 0.0, 42).unwrap().0
    }

    fn metrics_stub() -> RecordMetrics {
        RecordMetrics { mean_ic: 0.1, ic_ir: Some(1.0), sharpe: None, annual_return: 0.2 }
    }

    fn record_for(pool: &AlphaPool, panel: &Panel, name: &str, expr: &str) -> AlphaRecord {
        let alpha = eval_batch(&parse(expr).unwrap(), panel, 1).unwrap();
        pool.record_from_alpha(name, "", &[], &alpha, panel, metrics_stub()).unwrap()
    }

    #[test]
    fn duplicate_and_scaled_copies_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let panel = reference();
        let mut pool = AlphaPool::create(dir.path(), &panel, 0.7, 64, 1).unwrap();

        let base = record_for(&pool, &panel, "mom", "cs_rank(ts_delta(close, 5))");
        assert!(pool.insert(base.clone()).unwrap().is_accepted());
        // Same expression again: duplicate id.
        match pool.insert(base).unwrap() {
            InsertOutcome::Rejected(r) => assert!(r.contains("duplicate")),
            other => panic!("expected rejection, got {other:?}"),
        }
        // Scaled copy: |corr| = 1.
        let scaled = record_for(&pool, &panel, "mom2x", "mul(2, cs_rank(ts_delta(close, 5)))");
        match pool.insert(scaled).unwrap() {
            InsertOutcome::Rejected(r) => assert!(r.contains("correlation")),
            other => panic!("expected rejection, got {other:?}"),
        }
        // Negated copy: abs rule.
        let negated = record_for(&pool, &panel, "antimom", "mul(-1, cs_rank(ts_delta(close, 5)))");
        assert!(!pool.insert(negated).unwrap().is_accepted());
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn max_correlation_finds_the_member_itself() {
        let dir = tempfile::tempdir().unwrap();
        let panel = reference();
        let mut pool = AlphaPool::create(dir.path(), &panel, 0.7, 64, 1).unwrap();
        let a = record_for(&pool, &panel, "a", "cs_rank(ts_delta(close, 5))");
        let b = record_for(&pool, &panel, "b", "cs_zscore(div(volume, ts_mean(volume, 10)))");
        let a_values = a.reference_values.clone();
        let a_id = a.id.clone();
        pool.insert(a).unwrap();
        pool.insert(b).unwrap();
        let (id, corr) = pool.max_correlation(&a_values, None).unwrap();
        assert_eq!(id, a_id);
        assert!((corr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lsh_estimate_extremes() {
        let a = Signature { bits: vec![0u64], n_planes: 64 };
        let b = Signature { bits: vec![u64::MAX], n_planes: 64 };
        assert!((lsh_estimate(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((lsh_estimate(&a, &b).unwrap() + 1.0).abs() < 1e-12);
        let short = Signature { bits: vec![0u64], n_planes: 32 };
        assert!(lsh_estimate(&a, &short).is_err());
    }

    #[test]
    fn round_trip_preserves_records_and_decisions() {
        let dir = tempfile::tempdir().unwrap();
        let panel = reference();
        let mut pool = AlphaPool::create(dir.path(), &panel, 0.7, 64, 1).unwrap();
        let a = record_for(&pool, &panel, "a", "cs_rank(ts_delta(close, 5))");
        let b = record_for(&pool, &panel, "b", "ts_corr(close, volume, 10)");
        pool.insert(a.clone()).unwrap();
        pool.insert(b).unwrap();
        assert_eq!(pool.len(), 2);

        let reopened = AlphaPool::open(dir.path()).unwrap();
        // NaN-proof field-for-field comparison via the JSON form.
        assert_eq!(
            serde_json::to_string(reopened.records()).unwrap(),
            serde_json::to_string(pool.records()).unwrap()
        );
        // Same rejection decision after reload.
        let mut reopened = reopened;
        assert!(!reopened.insert(a).unwrap().is_accepted());
    }

    #[test]
    fn wrong_panel_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let panel = reference();
        let pool = AlphaPool::create(dir.path(), &panel, 0.7, 64, 1).unwrap();
        let (other, _) = generate_synthetic(60, 10, 2, None, 0.0, 43).unwrap();
        let alpha = eval_batch(&parse("cs_rank(close)").unwrap(), &other, 1).unwrap();
        assert!(matches!(
            pool.record_from_alpha("x", "", &[], &alpha, &other, metrics_stub()),
            Err(Error::Pool(_))
        ));
    }

    #[test]
    fn empty_store_max_correlation_errors() {
        let dir = tempfile::tempdir().unwrap();
        let panel = reference();
        let pool = AlphaPool::create(dir.path(), &panel, 0.7, 64, 1).unwrap();
        let values = vec![0.0; panel.t() * panel.n()];
        assert!(matches!(pool.max_correlation(&values, None), Err(Error::Pool(_))));
    }

    #[test]
    fn marginal_score_of_truth_is_positive_and_of_duplicate_is_zero() {
        let dir = tempfile::tempdir().unwrap();
        let panel = reference();
        let labels = forward_returns(&panel, 5, 1).unwrap();
        let mut pool = AlphaPool::create(dir.path(), &panel, 0.95, 64, 1).unwrap();
        let a = record_for(&pool, &panel, "a", "cs_rank(ts_delta(close, 5))");
        let b = record_for(&pool, &panel, "b", "cs_zscore(div(volume, ts_mean(volume, 10)))");
        let ids = vec![a.id.clone(), b.id.clone()];
        let a_values = a.reference_values.clone();
        pool.insert(a).unwrap();
        pool.insert(b).unwrap();

        // Adding the labels themselves must help.
        let truth: Vec<f64> = labels.values.data().to_vec();
        assert!(pool.marginal_score(&truth, &ids, &labels).unwrap() > 0.0);

        // Re-adding an existing member is nearly neutral.
        let delta = pool.marginal_score(&a_values, &ids, &labels).unwrap();
        assert!(delta.abs() < 0.05, "delta = {delta}");
    }

    #[test]
    fn lsh_estimator_tracks_true_cosine() {
        // Statistical accuracy of the signed-random-projection estimate on
        // vectors spanning the correlation range.
        let dir = tempfile::tempdir().unwrap();
        let panel = reference();
        let pool = AlphaPool::create(dir.path(), &panel, 0.7, 256, 7).unwrap();
        let dim = panel.t() * panel.n();
        let mut rng = Rng::seed_from(99);
        let mut within = 0;
        let trials = 200;
        for i in 0..trials {
            let x: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let rho = -0.98 + 1.96 * (i as f64 / (trials - 1) as f64);
            let y: Vec<f64> = x
                .iter()
                .map(|v| rho * v + (1.0 - rho * rho).sqrt() * rng.normal())
                .collect();
            let truth = grid_correlation(&x, &y);
            let est = lsh_estimate(&pool.signature(&x), &pool.signature(&y)).unwrap();
            if (est - truth).abs() <= 0.15 {
                within += 1;
            }
        }
        assert!(within * 100 >= trials * 95, "only {within}/{trials} within 0.15");
    }
}
