use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_disjoint, find_band, verify_checksum, Band, NormError, NormLookup};

/// SHA-256 of the shipped synthetic HKLLT table.
pub const HKLLT_SYNTHETIC_SHA256: &str = "2237abab3686997b40cfe0c2260455cb417eba0de241de6ec9c804a1337c33b4";
const HKLLT_SYNTHETIC_CSV: &str = include_str!("../../data/hkllt_norms_synthetic.csv");

/// Delayed-recall norms for one trial and stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HklltNormRow {
    pub trial: u8,
    pub age: Band,
    pub edu: Band,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Deserialize)]
struct Record {
    trial: u8,
    age_lo: u32,
    age_hi: Option<u32>,
    edu_lo: u32,
    edu_hi: Option<u32>,
    mean: f64,
    sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HklltNormTable {
    rows: Vec<HklltNormRow>,
}

impl HklltNormTable {
    /// CSV columns `trial,age_lo,age_hi,edu_lo,edu_hi,mean,sd`.
    pub fn from_csv(text: &str) -> Result<Self, NormError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<Record>().enumerate() {
            let r = rec?;
            let bad = |message: String| NormError::Row { row: i + 1, message };
            let row = HklltNormRow {
                trial: r.trial,
                age: Band { lo: r.age_lo, hi: r.age_hi },
                edu: Band { lo: r.edu_lo, hi: r.edu_hi },
                mean: r.mean,
                sd: r.sd,
            };
            row.age.validate().map_err(bad)?;
            row.edu.validate().map_err(bad)?;
            if !(row.sd > 0.0 && row.sd.is_finite() && row.mean.is_finite()) {
                return Err(bad("sd must be positive and mean finite".into()));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(NormError::Empty);
        }
        for trial in rows.iter().map(|r| r.trial).collect::<std::collections::BTreeSet<_>>() {
            check_disjoint(rows.iter().enumerate().filter(|(_, r)| r.trial == trial).map(|(i, r)| (i, r.age, r.edu)))?;
        }
        Ok(HklltNormTable { rows })
    }

    pub fn load(path: &Path, expected_sha256: Option<&str>) -> Result<Self, NormError> {
        let bytes = std::fs::read(path).map_err(|source| NormError::Io { path: path.display().to_string(), source })?;
        verify_checksum(&bytes, expected_sha256)?;
        Self::from_csv(&String::from_utf8_lossy(&bytes))
    }

    /// Synthetic placeholder values for testing; not published norms.
    pub fn synthetic() -> Self {
        verify_checksum(HKLLT_SYNTHETIC_CSV.as_bytes(), Some(HKLLT_SYNTHETIC_SHA256)).expect("shipped table checksum");
        Self::from_csv(HKLLT_SYNTHETIC_CSV).expect("shipped table is valid")
    }

    pub fn rows(&self) -> &[HklltNormRow] {
        &self.rows
    }

    pub fn lookup(&self, trial: u8, age: f64, edu: f64) -> Result<NormLookup<&HklltNormRow>, NormError> {
        let rows = self.rows.iter().filter(move |r| r.trial == trial);
        let (row, age_clamped) = find_band(rows, |r| (r.age, r.edu), age, edu)?;
        Ok(NormLookup { row, age_clamped })
    }
}

pub fn hkllt_z(raw: f64, norm: &HklltNormRow) -> f64 {
    (raw - norm.mean) / norm.sd
}
