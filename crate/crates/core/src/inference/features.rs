use serde::{Deserialize, Serialize};

use crate::primitives::{SessionPrimitives, TaskPrimitives};
use crate::task::TaskId;

pub const N_FEATURES: usize = 22;

/// Frozen feature order: C1..C8, M1..M12, age, edu_year.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "hkllt4_zScore",
    "hkllt5_zScore",
    "n_hkllt4_recall",
    "n_hkllt5_recall",
    "hkllt4_n_clustering",
    "hkllt5_n_clustering",
    "delta_hkllt_zScore",
    "delta_hkllt_n_recall",
    "n_Animal_count",
    "AnimalFlu_score",
    "7Subtraction_score",
    "Abstraction_q1_score",
    "Abstraction_q2_score",
    "Digit_fwd_score",
    "Digit_bwd_score",
    "Digit_score",
    "PicNaming_score",
    "Sentence_q1_score",
    "Sentence_q2_score",
    "Sentence_score",
    "age",
    "edu_year",
];

/// Index of the first demographic feature.
const DEMOGRAPHICS: usize = 20;

/// Everything feature assembly needs for one participant.
#[derive(Debug, Clone, Copy)]
pub struct FeatureInputs<'a> {
    pub primitives: &'a SessionPrimitives,
    pub z4: Option<f64>,
    pub z5: Option<f64>,
    pub age: f64,
    pub edu_year: f64,
}

/// The 22-value feature vector with a mask of features whose source was
/// missing (those hold 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSet {
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl PrimitiveSet {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.values[i])
    }

    pub fn is_missing(&self, name: &str) -> bool {
        FEATURE_NAMES.iter().position(|n| *n == name).is_some_and(|i| self.missing[i])
    }

    /// Model input, optionally without age and education.
    pub fn vector(&self, include_demographics: bool) -> Vec<f64> {
        let end = if include_demographics { N_FEATURES } else { DEMOGRAPHICS };
        self.values[..end].to_vec()
    }

    pub fn names(include_demographics: bool) -> &'static [&'static str] {
        if include_demographics {
            &FEATURE_NAMES
        } else {
            &FEATURE_NAMES[..DEMOGRAPHICS]
        }
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn extract_features(inputs: &FeatureInputs<'_>) -> PrimitiveSet {
    let mut v: Vec<Option<f64>> = vec![None; N_FEATURES];
    let p = inputs.primitives;
    let r4 = p.recall(TaskId::HklltTrial4);
    let r5 = p.recall(TaskId::HklltTrial5);
    v[0] = inputs.z4;
    v[1] = inputs.z5;
    v[2] = r4.map(|r| f64::from(r.n_recall));
    v[3] = r5.map(|r| f64::from(r.n_recall));
    v[4] = r4.map(|r| f64::from(r.n_clustering));
    v[5] = r5.map(|r| f64::from(r.n_clustering));
    v[6] = v[0].zip(v[1]).map(|(a, b)| a - b);
    v[7] = v[2].zip(v[3]).map(|(a, b)| a - b);
    if let Some(TaskPrimitives::AnimalFluency { n_animals, score }) = p.get(TaskId::AnimalFluency) {
        v[8] = Some(f64::from(*n_animals));
        v[9] = Some(f64::from(*score));
    }
    v[10] = p.value(TaskId::Serial7).map(f64::from);
    if let Some(TaskPrimitives::Abstraction { q1, q2 }) = p.get(TaskId::Abstraction) {
        v[11] = Some(flag(*q1));
        v[12] = Some(flag(*q2));
    }
    if let Some(TaskPrimitives::DigitSpan { forward, backward }) = p.get(TaskId::DigitSpan) {
        v[13] = Some(flag(*forward));
        v[14] = Some(flag(*backward));
        v[15] = Some(flag(*forward) + flag(*backward));
    }
    v[16] = p.value(TaskId::PictureNaming).map(f64::from);
    if let Some(TaskPrimitives::SentenceRep { flags }) = p.get(TaskId::SentenceRep) {
        v[17] = flags.first().map(|b| flag(*b));
        v[18] = flags.get(1).map(|b| flag(*b));
        v[19] = Some(flags.iter().map(|b| flag(*b)).sum());
    }
    v[20] = Some(inputs.age).filter(|a| a.is_finite());
    v[21] = Some(inputs.edu_year).filter(|e| e.is_finite());
    PrimitiveSet {
        values: v.iter().map(|x| x.unwrap_or(0.0)).collect(),
        missing: v.iter().map(Option::is_none).collect(),
    }
}
