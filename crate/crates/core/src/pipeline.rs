//! End-to-end wiring: examination, norms, screening and profiling for one
//! session at a time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cohort::{NormScores, ParticipantRecord, Session};
use crate::examination::{Examiner, OracleBackend};
use crate::gateway::ChatBackend;
use crate::inference::{
    extract_features, mae, rmse, smr_within, zero_shot_predict, FeatureInputs, InferenceError, PrimitiveSet,
    ScoreMetrics, ZeroShotMode,
};
use crate::norms::{hkllt_z, HklltNormTable, NormTable, Percentile};
use crate::primitives::{SessionPrimitives, Stimuli};
use crate::profiler::CaseData;
use crate::task::{Gender, Label, TaskId};

/// Normative tables used for scoring.
#[derive(Debug, Clone)]
pub struct NormSet {
    pub moca: NormTable,
    pub hkllt: HklltNormTable,
}

impl Default for NormSet {
    fn default() -> Self {
        NormSet { moca: NormTable::moca_sl(), hkllt: HklltNormTable::synthetic() }
    }
}

/// z-scores, MoCA-SL total and its 16th percentile cut-off. Lookup
/// problems become warnings and leave the value empty.
pub fn norm_scores(primitives: &SessionPrimitives, age: f64, edu: f64, norms: &NormSet) -> (NormScores, Vec<String>) {
    let mut warnings = Vec::new();
    let mut out = NormScores { moca_sl: primitives.moca_sl_total(), ..NormScores::default() };
    for (trial, task) in [(4u8, TaskId::HklltTrial4), (5, TaskId::HklltTrial5)] {
        let Some(recall) = primitives.recall(task) else { continue };
        match norms.hkllt.lookup(trial, age, edu) {
            Ok(l) => {
                out.age_clamped |= l.age_clamped;
                let z = hkllt_z(f64::from(recall.n_recall), l.row);
                if trial == 4 {
                    out.z4 = Some(z);
                } else {
                    out.z5 = Some(z);
                }
            }
            Err(e) => warnings.push(format!("HKLLT trial {trial} norms: {e}")),
        }
    }
    match norms.moca.lookup(age, edu) {
        Ok(l) => {
            out.age_clamped |= l.age_clamped;
            out.moca_p16 = Some(l.row.value(Percentile::P16));
        }
        Err(e) => warnings.push(format!("MoCA-SL norms: {e}")),
    }
    if out.age_clamped {
        warnings.push(format!("age {age} is below norm coverage; youngest stratum used"));
    }
    (out, warnings)
}

/// Runs the scoring side of the pipeline for sessions.
pub struct Pipeline<B> {
    examiner: Examiner<B>,
    norms: NormSet,
    zero_shot_mode: ZeroShotMode,
}

impl<B: ChatBackend> Pipeline<B> {
    pub fn new(examiner: Examiner<B>, norms: NormSet, zero_shot_mode: ZeroShotMode) -> Self {
        Pipeline { examiner, norms, zero_shot_mode }
    }

    pub fn examiner(&self) -> &Examiner<B> {
        &self.examiner
    }

    pub fn norms(&self) -> &NormSet {
        &self.norms
    }

    /// Examine every task, derive norms and the zero-shot label. Task
    /// failures are recorded in `errors`; the rest of the session proceeds.
    pub fn score_session(&self, session: &Session) -> ParticipantRecord {
        let mut warnings = session.warnings();
        let mut errors = Vec::new();
        let examinations = match session.assignment() {
            Ok(a) => {
                if !a.missing.is_empty() {
                    let names: Vec<&str> = a.missing.iter().map(|t| t.as_str()).collect();
                    warnings.push(format!("missing tasks: {}", names.join(", ")));
                }
                self.examiner.examine_all(&a)
            }
            Err(e) => {
                errors.push(e.to_string());
                Vec::new()
            }
        };
        let mut primitives = SessionPrimitives::default();
        for ex in &examinations {
            match (ex.primitives(), &ex.error) {
                (Some(p), _) => {
                    primitives.insert(ex.task_id, p.clone());
                }
                (None, err) => errors.push(format!("{}: {}", ex.task_id, err.as_deref().unwrap_or("no result"))),
            }
        }
        let (norms, norm_warnings) = norm_scores(&primitives, session.age, session.edu_year, &self.norms);
        warnings.extend(norm_warnings);
        let screening = match (norms.moca_sl, self.norms.moca.lookup(session.age, session.edu_year)) {
            (Some(total), Ok(l)) => {
                zero_shot_predict(f64::from(total), Some(l.row), norms.z4, norms.z5, self.zero_shot_mode).ok()
            }
            _ => {
                warnings.push("zero-shot screening skipped: MoCA-SL total or norm row unavailable".into());
                None
            }
        };
        ParticipantRecord {
            participant_id: session.participant_id.clone(),
            age: session.age,
            edu_year: session.edu_year,
            primitives,
            norms,
            examinations,
            screening,
            profile: None,
            gold: session.gold.clone(),
            warnings,
            errors,
        }
    }
}

/// A record built from a session's gold primitives without running any
/// examiner. Used for training from labelled data.
pub fn gold_record(session: &Session, norms: &NormSet) -> Option<ParticipantRecord> {
    let gold = session.gold.as_ref()?;
    let (scores, warnings) = norm_scores(&gold.primitives, session.age, session.edu_year, norms);
    Some(ParticipantRecord {
        participant_id: session.participant_id.clone(),
        age: session.age,
        edu_year: session.edu_year,
        primitives: gold.primitives.clone(),
        norms: scores,
        examinations: Vec::new(),
        screening: None,
        profile: None,
        gold: Some(gold.clone()),
        warnings,
        errors: Vec::new(),
    })
}

pub fn record_features(record: &ParticipantRecord) -> PrimitiveSet {
    extract_features(&FeatureInputs {
        primitives: &record.primitives,
        z4: record.norms.z4,
        z5: record.norms.z5,
        age: record.age,
        edu_year: record.edu_year,
    })
}

pub fn case_data(record: &ParticipantRecord, gender: Option<Gender>) -> CaseData {
    CaseData {
        age: record.age,
        edu_year: record.edu_year,
        gender,
        z4: record.norms.z4,
        z5: record.norms.z5,
        primitives: record.primitives.clone(),
    }
}

/// Oracle backend primed with every session's gold extractions.
pub fn oracle_for(sessions: &[Session], stimuli: Stimuli) -> OracleBackend {
    let mut oracle = OracleBackend::new(stimuli);
    for s in sessions {
        let Some(gold) = &s.gold else { continue };
        for (task, extraction) in &gold.extractions {
            if let Some(text) = s.transcripts.get(task.as_str()) {
                oracle.insert(*task, text.clone(), extraction.clone());
            }
        }
    }
    oracle
}

/// Agreement of one task's scores with gold across participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAgreement {
    /// Participants with a gold score.
    pub n_gold: usize,
    /// Of those, how many have no automated score. Each counts as a miss
    /// in `smr`.
    pub n_missing: usize,
    pub smr: f64,
    pub smr_within_1: f64,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub tasks: BTreeMap<TaskId, TaskAgreement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moca_sl: Option<ScoreMetrics>,
}

fn agreement(pairs: &[(Option<f64>, f64)]) -> Result<TaskAgreement, InferenceError> {
    let present: Vec<(f64, f64)> = pairs.iter().filter_map(|(p, g)| p.map(|p| (p, *g))).collect();
    let n_missing = pairs.len() - present.len();
    let (pred, gold): (Vec<f64>, Vec<f64>) = present.iter().copied().unzip();
    let scale = present.len() as f64 / pairs.len() as f64;
    let within = |k| if present.is_empty() { Ok(0.0) } else { smr_within(&pred, &gold, k).map(|v| v * scale) };
    Ok(TaskAgreement {
        n_gold: pairs.len(),
        n_missing,
        smr: within(0.0)?,
        smr_within_1: within(1.0)?,
        mae: (!present.is_empty()).then(|| mae(&pred, &gold)).transpose()?,
        rmse: (!present.is_empty()).then(|| rmse(&pred, &gold)).transpose()?,
    })
}

/// Per-task SMR/MAE/RMSE against gold primitives. Returns `None` when no
/// record carries gold.
pub fn score_report(records: &[ParticipantRecord]) -> Option<ScoreReport> {
    let mut per_task: BTreeMap<TaskId, Vec<(Option<f64>, f64)>> = BTreeMap::new();
    let mut totals = (Vec::new(), Vec::new());
    for r in records {
        let Some(gold) = &r.gold else { continue };
        for task in TaskId::ALL {
            if let Some(g) = gold.primitives.value(task) {
                per_task.entry(task).or_default().push((r.primitives.value(task).map(f64::from), f64::from(g)));
            }
        }
        if let (Some(p), Some(g)) = (r.primitives.moca_sl_total(), gold.primitives.moca_sl_total()) {
            totals.0.push(f64::from(p));
            totals.1.push(f64::from(g));
        }
    }
    if per_task.is_empty() {
        return None;
    }
    let tasks = per_task.into_iter().map(|(t, pairs)| (t, agreement(&pairs).expect("non-empty pairs"))).collect();
    let moca_sl = ScoreMetrics::compute(&totals.0, &totals.1).ok();
    Some(ScoreReport { tasks, moca_sl })
}

/// Feature matrix and gold labels for every record with a gold label.
pub fn training_set(
    records: &[ParticipantRecord],
    include_demographics: bool,
) -> (Vec<Vec<f64>>, Vec<Label>, Vec<String>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut ids = Vec::new();
    for r in records {
        if let Some(label) = r.gold.as_ref().and_then(|g| g.label) {
            x.push(record_features(r).vector(include_demographics));
            y.push(label);
            ids.push(r.participant_id.clone());
        }
    }
    (x, y, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{generate_cohort, CohortSpec};
    use crate::examination::ExaminationConfig;

    #[test]
    fn oracle_pipeline_matches_gold() {
        let stimuli = Stimuli::default();
        let sessions = generate_cohort(&CohortSpec { n_participants: 6, ..CohortSpec::default() }, &stimuli).unwrap();
        let oracle = oracle_for(&sessions, stimuli);
        let pipe = Pipeline::new(
            Examiner::new(oracle, ExaminationConfig::default()),
            NormSet::default(),
            ZeroShotMode::Inclusive,
        );
        let records: Vec<_> = sessions.iter().map(|s| pipe.score_session(s)).collect();
        for r in &records {
            assert!(r.errors.is_empty(), "{:?}", r.errors);
            assert_eq!(Some(&r.primitives), r.gold.as_ref().map(|g| &g.primitives));
            assert!(r.screening.is_some());
            assert!(r.norms.z4.is_some() && r.norms.z5.is_some());
        }
        let report = score_report(&records).unwrap();
        assert_eq!(report.tasks.len(), 8);
        assert!(report.tasks.values().all(|a| a.smr == 100.0 && a.mae == Some(0.0)));
    }

    #[test]
    fn missing_scores_count_against_smr() {
        let a = agreement(&[(Some(1.0), 1.0), (None, 2.0)]).unwrap();
        assert_eq!((a.smr, a.n_missing, a.mae), (50.0, 1, Some(0.0)));
        let b = agreement(&[(None, 2.0)]).unwrap();
        assert_eq!((b.smr, b.mae), (0.0, None));
    }
}
