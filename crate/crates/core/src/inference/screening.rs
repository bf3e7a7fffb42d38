use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::norms::{below_percentile, NormRow, Percentile};
use crate::task::Label;

/// Delayed-recall z cut-off.
pub const Z_CUTOFF: f64 = -1.0;

/// Whether a z exactly at the cut-off fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroShotMode {
    #[default]
    Inclusive,
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    MocaBelowP16,
    Hkllt4,
    Hkllt5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ZeroShot,
    Supervised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub label: Label,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triggers: Vec<Trigger>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_value: Option<f64>,
}

/// Cut-off rule: AD when MoCA-SL is strictly below the stratum's 16th
/// percentile or either delayed-recall z is at or below -1.0 (strictly
/// below in [`ZeroShotMode::Strict`]). Missing z-scores never fire.
pub fn zero_shot_predict(
    moca_sl: f64,
    row: Option<&NormRow>,
    z4: Option<f64>,
    z5: Option<f64>,
    mode: ZeroShotMode,
) -> Result<ScreeningResult, InferenceError> {
    let row = row.ok_or_else(|| InferenceError::Screening("no norm row for the participant".into()))?;
    if !moca_sl.is_finite() {
        return Err(InferenceError::Screening(format!("MoCA-SL score {moca_sl} is not finite")));
    }
    let low = |z: Option<f64>| match (z, mode) {
        (Some(z), ZeroShotMode::Inclusive) => z <= Z_CUTOFF,
        (Some(z), ZeroShotMode::Strict) => z < Z_CUTOFF,
        (None, _) => false,
    };
    let mut triggers = Vec::new();
    if below_percentile(moca_sl, row, Percentile::P16) {
        triggers.push(Trigger::MocaBelowP16);
    }
    if low(z4) {
        triggers.push(Trigger::Hkllt4);
    }
    if low(z5) {
        triggers.push(Trigger::Hkllt5);
    }
    let label = if triggers.is_empty() { Label::Hc } else { Label::Ad };
    Ok(ScreeningResult { label, method: Method::ZeroShot, triggers, decision_value: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormTable;

    #[test]
    fn worked_cases() {
        let t = NormTable::moca_sl();
        let row = t.lookup(75.0, 6.0).unwrap().row;
        let r = zero_shot_predict(10.0, Some(row), Some(-0.71), Some(-0.83), ZeroShotMode::Inclusive).unwrap();
        assert_eq!((r.label, r.triggers.len()), (Label::Hc, 0));
        let r = zero_shot_predict(10.0, Some(row), Some(-1.65), Some(-0.5), ZeroShotMode::Inclusive).unwrap();
        assert_eq!((r.label, r.triggers.as_slice()), (Label::Ad, &[Trigger::Hkllt4][..]));
    }

    #[test]
    fn boundary_modes() {
        let t = NormTable::moca_sl();
        let row = t.lookup(75.0, 6.0).unwrap().row;
        let inc = zero_shot_predict(12.0, Some(row), Some(-1.0), None, ZeroShotMode::Inclusive).unwrap();
        let strict = zero_shot_predict(12.0, Some(row), Some(-1.0), None, ZeroShotMode::Strict).unwrap();
        assert_eq!(inc.label, Label::Ad);
        assert_eq!(strict.label, Label::Hc);
        assert!(zero_shot_predict(12.0, None, None, None, ZeroShotMode::Inclusive).is_err());
    }
}
