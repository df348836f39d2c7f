//! Panel market data: CSV loading, canonical writing, synthetic generation,
//! and forward-return label matrices.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use sha2::{Digest, Sha256};

use crate::dsl::Field;
use crate::error::{Error, Result};
use crate::matrix::{is_missing, Matrix, MISSING};
use crate::rng::Rng;

/// Default forward-return horizon in bars.
pub const DEFAULT_HORIZON: usize = 5;
/// Default execution delay in bars.
pub const DEFAULT_LAG: usize = 1;

/// Timestamped date axis × instrument axis with named field matrices and
/// per-instrument sector labels. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    dates: Vec<NaiveDate>,
    instruments: Vec<String>,
    fields: BTreeMap<Field, Matrix>,
    sectors: Vec<String>,
}

impl Panel {
    pub fn new(
        dates: Vec<NaiveDate>,
        instruments: Vec<String>,
        fields: BTreeMap<Field, Matrix>,
        sectors: Vec<String>,
    ) -> Result<Panel> {
        let t = dates.len();
        let n = instruments.len();
        if t == 0 || n == 0 {
            return Err(Error::InvalidPanel("panel must have T >= 1 and N >= 1".into()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPanel("dates must be strictly increasing".into()));
        }
        if sectors.len() != n {
            return Err(Error::InvalidPanel(format!(
                "expected {n} sector labels, got {}",
                sectors.len()
            )));
        }
        if fields.is_empty() {
            return Err(Error::InvalidPanel("panel must carry at least one field".into()));
        }
        for (field, m) in &fields {
            if m.rows() != t || m.cols() != n {
                return Err(Error::InvalidPanel(format!(
                    "field `{}` has shape {}x{}, expected {}x{}",
                    field.name(),
                    m.rows(),
                    m.cols(),
                    t,
                    n
                )));
            }
            for v in m.data() {
                if is_missing(*v) {
                    continue;
                }
                if field.is_price() && *v <= 0.0 {
                    return Err(Error::InvalidPanel(format!(
                        "non-positive {} value {v}",
                        field.name()
                    )));
                }
                if !field.is_price() && *v < 0.0 {
                    return Err(Error::InvalidPanel(format!("negative volume {v}")));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidPanel(format!(
                        "non-finite {} value",
                        field.name()
                    )));
                }
            }
        }
        Ok(Panel { dates, instruments, fields, sectors })
    }

    pub fn t(&self) -> usize {
        self.dates.len()
    }

    pub fn n(&self) -> usize {
        self.instruments.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn instruments(&self) -> &[String] {
        &self.instruments
    }

    pub fn sectors(&self) -> &[String] {
        &self.sectors
    }

    pub fn has_field(&self, field: Field) -> bool {
        self.fields.contains_key(&field)
    }

    pub fn field(&self, field: Field) -> Result<&Matrix> {
        self.fields.get(&field).ok_or_else(|| Error::MissingField(field.name().into()))
    }

    /// Sector group index per instrument, with group labels in first-seen order.
    pub fn group_ids(&self) -> (Vec<usize>, Vec<String>) {
        let mut labels: Vec<String> = Vec::new();
        let mut ids = Vec::with_capacity(self.n());
        for s in &self.sectors {
            let id = match labels.iter().position(|l| l == s) {
                Some(i) => i,
                None => {
                    labels.push(s.clone());
                    labels.len() - 1
                }
            };
            ids.push(id);
        }
        (ids, labels)
    }

    /// Sub-panel over bar rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Panel {
        Panel {
            dates: self.dates[start..end].to_vec(),
            instruments: self.instruments.clone(),
            fields: self
                .fields
                .iter()
                .map(|(f, m)| (*f, m.slice_rows(start, end)))
                .collect(),
            sectors: self.sectors.clone(),
        }
    }

    /// Copy with every field value at bars strictly after `t` scaled by
    /// `factor`. Used by the look-ahead audit; multiplicative scaling keeps
    /// OHLC consistency and positivity intact for factor > 0.
    pub fn scale_fields_after(&self, t: usize, factor: f64) -> Panel {
        let mut fields = self.fields.clone();
        for m in fields.values_mut() {
            for row in (t + 1)..self.dates.len() {
                for j in 0..self.instruments.len() {
                    let v = m.get(row, j);
                    if !is_missing(v) {
                        m.set(row, j, v * factor);
                    }
                }
            }
        }
        Panel {
            dates: self.dates.clone(),
            instruments: self.instruments.clone(),
            fields,
            sectors: self.sectors.clone(),
        }
    }

    /// Canonical CSV form: rows sorted by (date, symbol), shortest round-trip
    /// float rendering, missing cells empty.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("date,symbol,open,high,low,close,volume,vwap,sector\n");
        let cell = |f: Field, t: usize, i: usize| -> String {
            match self.fields.get(&f) {
                Some(m) if !is_missing(m.get(t, i)) => format!("{}", m.get(t, i)),
                _ => String::new(),
            }
        };
        for t in 0..self.t() {
            for i in 0..self.n() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    self.dates[t].format("%Y-%m-%d"),
                    self.instruments[i],
                    cell(Field::Open, t, i),
                    cell(Field::High, t, i),
                    cell(Field::Low, t, i),
                    cell(Field::Close, t, i),
                    cell(Field::Volume, t, i),
                    cell(Field::Vwap, t, i),
                    self.sectors[i],
                ));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    /// Content hash of the canonical CSV form; identifies a reference panel.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_csv_string().as_bytes());
        hex_string(&digest)
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Forward returns per bar and instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    pub values: Matrix,
    pub horizon: usize,
    pub lag: usize,
}

impl LabelMatrix {
    pub fn slice_rows(&self, start: usize, end: usize) -> LabelMatrix {
        LabelMatrix {
            values: self.values.slice_rows(start, end),
            horizon: self.horizon,
            lag: self.lag,
        }
    }
}

/// `values[t][i] = close[t+lag+horizon][i] / close[t+lag][i] - 1`: the signal
/// is known at the close of bar `t` and the position is entered at the close
/// of bar `t+lag`.
pub fn forward_returns(panel: &Panel, horizon: usize, lag: usize) -> Result<LabelMatrix> {
    if horizon < 1 || lag < 1 {
        return Err(Error::InvalidArgument("horizon and lag must be >= 1".into()));
    }
    let close = panel.field(Field::Close)?;
    let t = panel.t();
    let n = panel.n();
    if horizon + lag >= t {
        return Err(Error::LabelHorizon { horizon, lag, t });
    }
    let mut values = Matrix::missing(t, n);
    for row in 0..t - horizon - lag {
        for i in 0..n {
            let entry = close.get(row + lag, i);
            let exit = close.get(row + lag + horizon, i);
            if !is_missing(entry) && !is_missing(exit) {
                values.set(row, i, exit / entry - 1.0);
            }
        }
    }
    Ok(LabelMatrix { values, horizon, lag })
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(MISSING);
    }
    raw.parse::<f64>().map_err(|_| Error::BadCell {
        row,
        column: column.into(),
        value: raw.into(),
    })
}

/// Load a panel from CSV. Rows may arrive unsorted; absent cells become
/// missing; a missing vwap column is synthesized as missing-filled; a missing
/// sector column becomes a single "UNKNOWN" group. In strict mode non-positive
/// prices are rejected; otherwise they are coerced to missing.
pub fn load_csv(path: &Path, strict: bool) -> Result<Panel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::InvalidPanel(format!("cannot read {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidPanel(format!("bad header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let date_col = col("date").ok_or_else(|| Error::InvalidPanel("missing `date` column".into()))?;
    let symbol_col =
        col("symbol").ok_or_else(|| Error::InvalidPanel("missing `symbol` column".into()))?;
    let mut field_cols: Vec<(Field, usize)> = Vec::new();
    for field in Field::ALL {
        match col(field.name()) {
            Some(i) => field_cols.push((field, i)),
            None if field == Field::Vwap => {} // optional, synthesized below
            None => {
                return Err(Error::InvalidPanel(format!("missing `{}` column", field.name())))
            }
        }
    }
    let sector_col = col("sector");

    struct Row {
        date: NaiveDate,
        symbol: String,
        values: Vec<f64>,
        sector: Option<String>,
    }

    let mut rows: Vec<Row> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row_no = idx + 2; // 1-based, counting the header line
        let record = record.map_err(|e| Error::InvalidPanel(format!("row {row_no}: {e}")))?;
        let date_raw = record.get(date_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d").map_err(|_| Error::BadCell {
            row: row_no,
            column: "date".into(),
            value: date_raw.into(),
        })?;
        let symbol = record.get(symbol_col).unwrap_or("").to_string();
        if symbol.is_empty() {
            return Err(Error::BadCell { row: row_no, column: "symbol".into(), value: "".into() });
        }
        let mut values = Vec::with_capacity(field_cols.len());
        for (field, i) in &field_cols {
            let mut v = parse_cell(record.get(*i).unwrap_or(""), row_no, field.name())?;
            if !is_missing(v) && field.is_price() && v <= 0.0 {
                if strict {
                    return Err(Error::NonPositivePrice {
                        row: row_no,
                        column: field.name().into(),
                        value: v,
                    });
                }
                v = MISSING;
            }
            if !is_missing(v) && !field.is_price() && v < 0.0 {
                if strict {
                    return Err(Error::BadCell {
                        row: row_no,
                        column: field.name().into(),
                        value: format!("{v}"),
                    });
                }
                v = MISSING;
            }
            values.push(v);
        }
        let sector = sector_col
            .and_then(|i| record.get(i))
            .filter(|s| !s.is_empty())
            .map(|s| s.to_string());
        rows.push(Row { date, symbol, values, sector });
    }
    if rows.is_empty() {
        return Err(Error::InvalidPanel("no data rows".into()));
    }

    rows.sort_by(|a, b| (a.date, &a.symbol).cmp(&(b.date, &b.symbol)));
    for w in rows.windows(2) {
        if w[0].date == w[1].date && w[0].symbol == w[1].symbol {
            return Err(Error::DuplicateKey {
                date: w[0].date.format("%Y-%m-%d").to_string(),
                symbol: w[0].symbol.clone(),
            });
        }
    }

    let mut dates: Vec<NaiveDate> = rows.iter().map(|r| r.date).collect();
    dates.dedup();
    let mut instruments: Vec<String> = rows.iter().map(|r| r.symbol.clone()).collect();
    instruments.sort();
    instruments.dedup();

    let t = dates.len();
    let n = instruments.len();
    let mut fields: BTreeMap<Field, Matrix> = Field::ALL
        .iter()
        .map(|f| (*f, Matrix::missing(t, n)))
        .collect();
    let mut sectors: Vec<Option<String>> = vec![None; n];

    for row in &rows {
        let ti = dates.binary_search(&row.date).expect("date present");
        let ii = instruments.binary_search(&row.symbol).expect("symbol present");
        for ((field, _), v) in field_cols.iter().zip(&row.values) {
            fields.get_mut(field).expect("field allocated").set(ti, ii, *v);
        }
        if let Some(s) = &row.sector {
            match &sectors[ii] {
                Some(existing) if existing != s => {
                    return Err(Error::InvalidPanel(format!(
                        "conflicting sector labels for `{}`: `{existing}` vs `{s}`",
                        row.symbol
                    )))
                }
                _ => sectors[ii] = Some(s.clone()),
            }
        }
    }
    let sectors: Vec<String> =
        sectors.into_iter().map(|s| s.unwrap_or_else(|| "UNKNOWN".into())).collect();

    Panel::new(dates, instruments, fields, sectors)
}

fn weekday_sequence(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut dates = Vec::with_capacity(count);
    let mut d = start;
    while dates.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            dates.push(d);
        }
        d = d.succ_opt().expect("date range");
    }
    dates
}

/// Synthetic geometric-random-walk panel with optional planted signal.
///
/// When `plant` is given, labels are the cross-sectionally z-scored planted
/// alpha times `plant_strength` plus unit-variance noise, so the planted
/// expression has positive expected IC. Identical seeds produce bit-identical
/// output.
pub fn generate_synthetic(
    n_dates: usize,
    n_instruments: usize,
    n_sectors: usize,
    plant: Option<&str>,
    plant_strength: f64,
    seed: u64,
) -> Result<(Panel, LabelMatrix)> {
    if n_dates < 30 {
        return Err(Error::InvalidArgument("n_dates must be >= 30".into()));
    }
    if n_instruments < 4 {
        return Err(Error::InvalidArgument("n_instruments must be >= 4".into()));
    }
    if n_sectors == 0 || n_sectors > n_instruments {
        return Err(Error::InvalidArgument("n_sectors must be in [1, n_instruments]".into()));
    }
    if !(0.0..=1.0).contains(&plant_strength) {
        return Err(Error::InvalidArgument("plant_strength must be in [0, 1]".into()));
    }

    let mut rng = Rng::seed_from(seed);
    let dates = weekday_sequence(NaiveDate::from_ymd_opt(2015, 1, 5).unwrap(), n_dates);
    let instruments: Vec<String> = (0..n_instruments).map(|i| format!("S{i:04}")).collect();
    let sectors: Vec<String> = (0..n_instruments).map(|i| format!("SEC{:02}", i % n_sectors)).collect();

    let t = n_dates;
    let n = n_instruments;
    let mut open = Matrix::missing(t, n);
    let mut high = Matrix::missing(t, n);
    let mut low = Matrix::missing(t, n);
    let mut close = Matrix::missing(t, n);
    let mut volume = Matrix::missing(t, n);
    let mut vwap = Matrix::missing(t, n);

    for i in 0..n {
        let mut prev_close = 20.0 + 180.0 * rng.f64();
        let base_volume = (12.0 + 3.0 * rng.f64()).exp();
        for row in 0..t {
            let o = prev_close * (0.004 * rng.normal()).exp();
            let c = prev_close * (0.0003 + 0.02 * rng.normal()).exp();
            let hi = o.max(c) * (0.006 * rng.normal().abs()).exp();
            let lo = o.min(c) * (-0.006 * rng.normal().abs()).exp();
            let vw = lo + rng.f64() * (hi - lo);
            let vol = base_volume * (0.5 * rng.normal()).exp();
            open.set(row, i, o);
            high.set(row, i, hi);
            low.set(row, i, lo);
            close.set(row, i, c);
            volume.set(row, i, vol);
            vwap.set(row, i, vw);
            prev_close = c;
        }
    }

    let mut fields = BTreeMap::new();
    fields.insert(Field::Open, open);
    fields.insert(Field::High, high);
    fields.insert(Field::Low, low);
    fields.insert(Field::Close, close);
    fields.insert(Field::Volume, volume);
    fields.insert(Field::Vwap, vwap);
    let panel = Panel::new(dates, instruments, fields, sectors)?;

    let mut labels = Matrix::missing(t, n);
    match plant {
        Some(text) => {
            let report = crate::semantics::validate(text);
            if !report.is_valid() {
                return Err(Error::InvalidArgument(format!(
                    "plant expression rejected: {}",
                    report.render_line()
                )));
            }
            let expr = crate::dsl::parse(text)?;
            let alpha = crate::engine::eval_batch(&expr, &panel, 1)?;
            for row in 0..t {
                let mut z = alpha.values.row(row).to_vec();
                crate::engine::kernels::cs_zscore_row(&mut z);
                for i in 0..n {
                    let noise = rng.normal();
                    if !is_missing(z[i]) {
                        labels.set(row, i, plant_strength * z[i] + noise);
                    }
                }
            }
        }
        None => {
            for row in 0..t {
                for i in 0..n {
                    labels.set(row, i, rng.normal());
                }
            }
        }
    }
    // Respect the label-matrix invariant: trailing horizon+lag rows missing.
    for row in t - (DEFAULT_HORIZON + DEFAULT_LAG)..t {
        for i in 0..n {
            labels.set(row, i, MISSING);
        }
    }

    Ok((panel, LabelMatrix { values: labels, horizon: DEFAULT_HORIZON, lag: DEFAULT_LAG }))
}
