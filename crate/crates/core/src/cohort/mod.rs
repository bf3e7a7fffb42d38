//! Session documents, the audit trail, and the synthetic cohort generator.

mod audit;
mod generate;
mod reference;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::examination::{assign, Assignment, ExamError};
use crate::primitives::{Extraction, SessionPrimitives};
use crate::task::{Gender, Label, TaskId};

pub use audit::{
    persist_results, read_audit, AuditDocument, NormScores, ParticipantRecord, AUDIT_FORMAT, AUDIT_VERSION,
};
pub use generate::{generate_cohort, CohortSpec, ImpairmentProfile, NoiseKnobs, Performance, ANIMAL_POOL, FILLERS};
pub use reference::reference_extract;

/// Minimum age under the screening inclusion criteria.
pub const INCLUSION_AGE: f64 = 60.0;

#[derive(Debug, thiserror::Error)]
pub enum CohortError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("session schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid session: {0}")]
    Invalid(String),
    #[error("invalid cohort spec: {0}")]
    Spec(String),
    #[error("audit document: {0}")]
    Audit(String),
}

impl CohortError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CohortError::Io { path: path.to_path_buf(), source }
    }
}

/// Reference values for a session, when known.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Gold {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default)]
    pub primitives: SessionPrimitives,
    /// What a careful rater reads out of each transcript.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extractions: BTreeMap<TaskId, Extraction>,
}

/// One participant's structured input. Fields this crate does not know are
/// kept in `extra` and written back unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub participant_id: String,
    pub age: f64,
    pub edu_year: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    /// Task id to verbatim transcript, delimiters included.
    #[serde(default)]
    pub transcripts: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Gold>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, Value>,
}

impl Session {
    pub fn validate(&self) -> Result<(), CohortError> {
        if self.participant_id.trim().is_empty() {
            return Err(CohortError::Invalid("participant_id is empty".into()));
        }
        if !(self.age.is_finite() && self.age >= 0.0) {
            return Err(CohortError::Invalid(format!("{}: age {} is not a valid age", self.participant_id, self.age)));
        }
        if !(self.edu_year.is_finite() && self.edu_year >= 0.0) {
            return Err(CohortError::Invalid(format!(
                "{}: edu_year {} is not a valid number of years",
                self.participant_id, self.edu_year
            )));
        }
        Ok(())
    }

    /// Supported tasks without a transcript.
    pub fn missing_tasks(&self) -> Vec<TaskId> {
        TaskId::ALL.into_iter().filter(|t| !self.transcripts.contains_key(t.as_str())).collect()
    }

    /// Non-fatal issues worth reporting.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.age < INCLUSION_AGE {
            out.push(format!("{}: age {} is below the inclusion age of 60", self.participant_id, self.age));
        }
        for key in self.transcripts.keys() {
            if key.parse::<TaskId>().is_err() {
                out.push(format!("{}: unknown task `{key}` ignored", self.participant_id));
            }
        }
        out
    }

    pub fn assignment(&self) -> Result<Assignment, ExamError> {
        assign(self.transcripts.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("session serializes")
    }
}

/// Parse and validate one session document.
pub fn load_session(document: &str) -> Result<Session, CohortError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let session: Session = serde_path_to_error::deserialize(de)
        .map_err(|e| CohortError::Schema { path: e.path().to_string(), message: e.inner().to_string() })?;
    session.validate()?;
    Ok(session)
}

pub fn load_session_file(path: &Path) -> Result<Session, CohortError> {
    let text = std::fs::read_to_string(path).map_err(|e| CohortError::io(path, e))?;
    load_session(&text).map_err(|e| match e {
        CohortError::Schema { path: p, message } => {
            CohortError::Schema { path: format!("{}:{p}", path.display()), message }
        }
        CohortError::Invalid(m) => CohortError::Invalid(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Load every `*.json` file in `dir`, in file-name order. A single file
/// path loads just that session.
pub fn load_sessions(path: &Path) -> Result<Vec<Session>, CohortError> {
    if path.is_file() {
        return Ok(vec![load_session_file(path)?]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| CohortError::io(path, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files.iter().map(|p| load_session_file(p)).collect()
}

/// Write each session to `<dir>/<participant_id>.json`.
pub fn save_sessions(sessions: &[Session], dir: &Path) -> Result<Vec<PathBuf>, CohortError> {
    std::fs::create_dir_all(dir).map_err(|e| CohortError::io(dir, e))?;
    sessions
        .iter()
        .map(|s| {
            let path = dir.join(format!("{}.json", s.participant_id));
            std::fs::write(&path, s.to_json() + "\n").map_err(|e| CohortError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
