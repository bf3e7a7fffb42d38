use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::task::Label;

fn check_lengths(a: usize, b: usize) -> Result<(), InferenceError> {
    if a != b {
        return Err(InferenceError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(InferenceError::Empty);
    }
    Ok(())
}

/// Percentage of predictions exactly equal to gold.
pub fn smr(predicted: &[f64], gold: &[f64]) -> Result<f64, InferenceError> {
    smr_within(predicted, gold, 0.0)
}

/// Percentage of predictions within `k` of gold.
pub fn smr_within(predicted: &[f64], gold: &[f64], k: f64) -> Result<f64, InferenceError> {
    check_lengths(predicted.len(), gold.len())?;
    let hits = predicted.iter().zip(gold).filter(|(p, g)| (*p - *g).abs() <= k).count();
    Ok(100.0 * hits as f64 / predicted.len() as f64)
}

pub fn mae(predicted: &[f64], gold: &[f64]) -> Result<f64, InferenceError> {
    check_lengths(predicted.len(), gold.len())?;
    Ok(predicted.iter().zip(gold).map(|(p, g)| (p - g).abs()).sum::<f64>() / predicted.len() as f64)
}

pub fn rmse(predicted: &[f64], gold: &[f64]) -> Result<f64, InferenceError> {
    check_lengths(predicted.len(), gold.len())?;
    let mse = predicted.iter().zip(gold).map(|(p, g)| (p - g).powi(2)).sum::<f64>() / predicted.len() as f64;
    Ok(mse.sqrt())
}

/// SMR, MAE and RMSE for one score column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreMetrics {
    pub n: usize,
    pub smr: f64,
    pub smr_within_1: f64,
    pub mae: f64,
    pub rmse: f64,
}

impl ScoreMetrics {
    pub fn compute(predicted: &[f64], gold: &[f64]) -> Result<Self, InferenceError> {
        Ok(ScoreMetrics {
            n: predicted.len(),
            smr: smr(predicted, gold)?,
            smr_within_1: smr_within(predicted, gold, 1.0)?,
            mae: mae(predicted, gold)?,
            rmse: rmse(predicted, gold)?,
        })
    }
}

/// Percentages with AD as the positive class. Precision and F1 are 0 when
/// nothing is predicted positive; recall is 0 when no gold positive exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub n: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

pub fn classification_metrics(predicted: &[Label], gold: &[Label]) -> Result<ClassificationMetrics, InferenceError> {
    check_lengths(predicted.len(), gold.len())?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, g) in predicted.iter().zip(gold) {
        match (p.is_positive(), g.is_positive()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(ClassificationMetrics {
        n: predicted.len(),
        accuracy: 100.0 * ratio(tp + tn, predicted.len()),
        f1: 100.0 * f1,
        precision: 100.0 * precision,
        recall: 100.0 * recall,
        tp,
        fp,
        tn,
        fn_,
    })
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, InferenceError> {
    check_lengths(x.len(), y.len())?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 {
        return Err(InferenceError::Constant("x"));
    }
    if syy == 0.0 {
        return Err(InferenceError::Constant("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Ad, Hc};

    #[test]
    fn score_agreement() {
        let (p, g) = ([3.0, 2.0, 3.0], [3.0, 3.0, 3.0]);
        assert!((smr(&p, &g).unwrap() - 200.0 / 3.0).abs() < 1e-9);
        assert!((mae(&p, &g).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((rmse(&p, &g).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(smr_within(&[4.0, 2.0, 5.0], &[3.0, 3.0, 5.0], 1.0).unwrap(), 100.0);
        assert!(smr(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn confusion_counts() {
        let m = classification_metrics(&[Ad, Ad, Hc, Hc], &[Ad, Hc, Ad, Hc]).unwrap();
        assert_eq!((m.precision, m.recall, m.accuracy, m.f1), (50.0, 50.0, 50.0, 50.0));
        let m = classification_metrics(&[Hc, Hc], &[Ad, Hc]).unwrap();
        assert_eq!((m.recall, m.precision, m.f1), (0.0, 0.0, 0.0));
        let m = classification_metrics(&[Ad, Hc], &[Ad, Hc]).unwrap();
        assert_eq!((m.accuracy, m.f1), (100.0, 100.0));
    }

    #[test]
    fn pearson_closed_forms() {
        let x = [1.0, 2.0, 3.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson_r(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(pearson_r(&[1.0, 1.0], &[1.0, 2.0]), Err(InferenceError::Constant("x"))));
    }
}
