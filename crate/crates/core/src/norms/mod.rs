//! Norm-referenced scoring against age- and education-stratified tables.

mod hkllt;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use hkllt::{hkllt_z, HklltNormRow, HklltNormTable, HKLLT_SYNTHETIC_SHA256};

/// SHA-256 of the shipped MoCA-SL norm table.
pub const MOCA_SL_SHA256: &str = "48dfd0216b367ed0449ac31e2c89c27b496a6d1d3f08d1e55217f7f7ed967077";
const MOCA_SL_CSV: &str = include_str!("../../data/moca_sl_norms.csv");

/// MoCA-SL points per full-MoCA point.
pub const RESCALE_FACTOR: f64 = 13.0 / 30.0;

#[derive(Debug, thiserror::Error)]
pub enum NormError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("checksum mismatch: expected {expected}, got {actual}")]
    Checksum { expected: String, actual: String },
    #[error("norm table row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("norm table csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("norm table is empty")]
    Empty,
    #[error("invalid demographics: {0}")]
    Demographics(String),
    #[error("no norm row covers age {age}, education {edu}")]
    NotCovered { age: f64, edu: f64 },
    #[error("regression fit needs at least two distinct scores")]
    DegenerateFit,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn verify_checksum(bytes: &[u8], expected: Option<&str>) -> Result<(), NormError> {
    if let Some(expected) = expected {
        let actual = sha256_hex(bytes);
        if !actual.eq_ignore_ascii_case(expected.trim()) {
            return Err(NormError::Checksum { expected: expected.to_string(), actual });
        }
    }
    Ok(())
}

/// Closed integer range; `hi = None` is unbounded above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Band {
    pub lo: u32,
    pub hi: Option<u32>,
}

impl Band {
    pub fn contains(&self, v: u32) -> bool {
        v >= self.lo && self.hi.is_none_or(|hi| v <= hi)
    }

    fn overlaps(&self, other: &Band) -> bool {
        let a_hi = self.hi.unwrap_or(u32::MAX);
        let b_hi = other.hi.unwrap_or(u32::MAX);
        self.lo <= b_hi && other.lo <= a_hi
    }

    fn validate(&self) -> Result<(), String> {
        match self.hi {
            Some(hi) if hi < self.lo => Err(format!("band {}-{hi} is inverted", self.lo)),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "{}-{}", self.lo, hi),
            None => write!(f, "{}+", self.lo),
        }
    }
}

/// Floor a demographic value to whole years.
pub(crate) fn whole_years(v: f64, what: &str) -> Result<u32, NormError> {
    if !v.is_finite() || v < 0.0 {
        return Err(NormError::Demographics(format!("{what} {v} must be a non-negative number")));
    }
    Ok(v.floor().min(u32::MAX as f64) as u32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub age: Band,
    pub edu: Band,
    pub n: u32,
    pub median: f64,
    pub iqr: f64,
    pub p16: f64,
    pub p7: f64,
    pub p2: f64,
}

#[derive(Debug, Deserialize)]
struct NormRecord {
    age_lo: u32,
    age_hi: Option<u32>,
    edu_lo: u32,
    edu_hi: Option<u32>,
    n: u32,
    median: f64,
    iqr: f64,
    p16: f64,
    p7: f64,
    p2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Percentile {
    P16,
    P7,
    P2,
}

impl NormRow {
    pub fn value(&self, which: Percentile) -> f64 {
        match which {
            Percentile::P16 => self.p16,
            Percentile::P7 => self.p7,
            Percentile::P2 => self.p2,
        }
    }

    /// Numeric entries in column order.
    pub fn entries(&self) -> [f64; 5] {
        [self.median, self.iqr, self.p16, self.p7, self.p2]
    }
}

/// Result of a table lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormLookup<R> {
    pub row: R,
    /// The age fell below table coverage and the youngest band was used.
    pub age_clamped: bool,
}

/// Rows must not overlap, and every row's bands must be well-formed.
pub(crate) fn check_disjoint(bands: impl Iterator<Item = (usize, Band, Band)> + Clone) -> Result<(), NormError> {
    for (i, a_age, a_edu) in bands.clone() {
        for (j, b_age, b_edu) in bands.clone() {
            if i < j && a_age.overlaps(&b_age) && a_edu.overlaps(&b_edu) {
                return Err(NormError::Row { row: j + 1, message: format!("overlaps row {}", i + 1) });
            }
        }
    }
    Ok(())
}

/// Find the row for (age, edu) among `rows`, clamping ages below coverage
/// to the youngest band.
pub(crate) fn find_band<'a, R>(
    rows: impl Iterator<Item = &'a R> + Clone,
    bands: impl Fn(&R) -> (Band, Band),
    age: f64,
    edu: f64,
) -> Result<(&'a R, bool), NormError>
where
    R: 'a,
{
    let a = whole_years(age, "age")?;
    let e = whole_years(edu, "education")?;
    let youngest = rows.clone().map(|r| bands(r).0.lo).min().ok_or(NormError::Empty)?;
    let (a, clamped) = if a < youngest { (youngest, true) } else { (a, false) };
    let row = rows
        .into_iter()
        .find(|r| {
            let (ab, eb) = bands(r);
            ab.contains(a) && eb.contains(e)
        })
        .ok_or(NormError::NotCovered { age, edu })?;
    Ok((row, clamped))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    rows: Vec<NormRow>,
}

impl NormTable {
    /// Parse and validate CSV with columns
    /// `age_lo,age_hi,edu_lo,edu_hi,n,median,iqr,p16,p7,p2`; an empty upper
    /// bound means unbounded.
    pub fn from_csv(text: &str) -> Result<Self, NormError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<NormRecord>().enumerate() {
            let r = rec?;
            let row = NormRow {
                age: Band { lo: r.age_lo, hi: r.age_hi },
                edu: Band { lo: r.edu_lo, hi: r.edu_hi },
                n: r.n,
                median: r.median,
                iqr: r.iqr,
                p16: r.p16,
                p7: r.p7,
                p2: r.p2,
            };
            let bad = |message: String| NormError::Row { row: i + 1, message };
            row.age.validate().map_err(bad)?;
            row.edu.validate().map_err(bad)?;
            if row.entries().iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite entry".into()));
            }
            if !(row.p2 <= row.p7 && row.p7 <= row.p16 && row.p16 <= row.median) {
                return Err(bad("percentiles must satisfy p2 <= p7 <= p16 <= median".into()));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(NormError::Empty);
        }
        check_disjoint(rows.iter().enumerate().map(|(i, r)| (i, r.age, r.edu)))?;
        Ok(NormTable { rows })
    }

    /// Load from a file, verifying its SHA-256 when `expected` is given.
    pub fn load(path: &Path, expected_sha256: Option<&str>) -> Result<Self, NormError> {
        let bytes = std::fs::read(path).map_err(|source| NormError::Io { path: path.display().to_string(), source })?;
        verify_checksum(&bytes, expected_sha256)?;
        Self::from_csv(&String::from_utf8_lossy(&bytes))
    }

    /// The shipped MoCA-SL table (proportionally rescaled full-MoCA norms).
    pub fn moca_sl() -> Self {
        verify_checksum(MOCA_SL_CSV.as_bytes(), Some(MOCA_SL_SHA256)).expect("shipped table checksum");
        Self::from_csv(MOCA_SL_CSV).expect("shipped table is valid")
    }

    pub fn rows(&self) -> &[NormRow] {
        &self.rows
    }

    pub fn lookup(&self, age: f64, edu: f64) -> Result<NormLookup<&NormRow>, NormError> {
        let (row, age_clamped) = find_band(self.rows.iter(), |r| (r.age, r.edu), age, edu)?;
        Ok(NormLookup { row, age_clamped })
    }
}

/// Row for (age, edu). Education is floored to whole years.
pub fn lookup_moca_norm(age: f64, edu: f64, table: &NormTable) -> Result<NormLookup<&NormRow>, NormError> {
    table.lookup(age, edu)
}

/// Strictly below the given percentile cut-off.
pub fn below_percentile(score: f64, row: &NormRow, which: Percentile) -> bool {
    score < row.value(which)
}

/// Full-MoCA points to MoCA-SL points, unrounded.
pub fn rescale_full_moca(value: f64) -> f64 {
    value * RESCALE_FACTOR
}

/// Round half away from zero to one decimal, as the tables are printed.
pub fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Affine map from full-MoCA to MoCA-SL scale, `Z = alpha + beta * Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionNorm {
    pub alpha: f64,
    pub beta: f64,
}

impl RegressionNorm {
    pub fn apply(&self, y: f64) -> f64 {
        self.alpha + self.beta * y
    }
}

/// Ordinary least squares over (full, sl) pairs.
pub fn fit_regression_norm(pairs: &[(f64, f64)]) -> Result<RegressionNorm, NormError> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return Err(NormError::DegenerateFit);
    }
    let mean_y = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_z = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mean_y).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mean_y) * (p.1 - mean_z)).sum();
    if sxx == 0.0 || !sxx.is_finite() {
        return Err(NormError::DegenerateFit);
    }
    let beta = sxy / sxx;
    if !beta.is_finite() {
        return Err(NormError::DegenerateFit);
    }
    Ok(RegressionNorm { alpha: mean_z - beta * mean_y, beta })
}

pub fn apply_regression(norm: &RegressionNorm, y: f64) -> f64 {
    norm.apply(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumStatus {
    Available,
    /// Sample standard deviation is zero.
    Degenerate,
    /// Fewer than two participants.
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalNorm {
    pub age: Band,
    pub edu: Band,
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub status: StratumStatus,
}

/// Per-stratum sample mean and standard deviation (n - 1 denominator) of
/// healthy-control scores, over the strata of `strata`. Samples are
/// `(age, edu, score)`; ages below coverage are clamped like lookups.
pub fn estimate_empirical_norms(
    strata: &NormTable,
    samples: &[(f64, f64, f64)],
) -> Result<Vec<EmpiricalNorm>, NormError> {
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); strata.rows.len()];
    for &(age, edu, score) in samples {
        let hit = strata.lookup(age, edu)?;
        let idx = strata.rows.iter().position(|r| std::ptr::eq(r, hit.row)).expect("row from this table");
        buckets[idx].push(score);
    }
    Ok(strata
        .rows
        .iter()
        .zip(buckets)
        .map(|(row, scores)| {
            let n = scores.len();
            if n < 2 {
                let mean = (n == 1).then(|| scores[0]);
                return EmpiricalNorm {
                    age: row.age,
                    edu: row.edu,
                    n,
                    mean,
                    sd: None,
                    status: StratumStatus::Unavailable,
                };
            }
            let mean = scores.iter().sum::<f64>() / n as f64;
            let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
            let status = if sd == 0.0 { StratumStatus::Degenerate } else { StratumStatus::Available };
            EmpiricalNorm { age: row.age, edu: row.edu, n, mean: Some(mean), sd: Some(sd), status }
        })
        .collect())
}
