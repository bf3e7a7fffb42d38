use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CohortError, Gold};
use crate::examination::TaskExamination;
use crate::inference::ScreeningResult;
use crate::primitives::SessionPrimitives;
use crate::profiler::CognitiveProfile;

pub const AUDIT_FORMAT: &str = "cogscreen-audit";
pub const AUDIT_VERSION: u32 = 1;

/// Norm-referenced values for one participant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormScores {
    pub z4: Option<f64>,
    pub z5: Option<f64>,
    pub moca_sl: Option<u32>,
    pub moca_p16: Option<f64>,
    #[serde(default)]
    pub age_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: String,
    pub age: f64,
    pub edu_year: f64,
    pub primitives: SessionPrimitives,
    pub norms: NormScores,
    pub examinations: Vec<TaskExamination>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screening: Option<ScreeningResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<CognitiveProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Gold>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

/// Versioned per-participant audit trail, keyed by participant id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditDocument {
    pub format: String,
    pub version: u32,
    pub participants: BTreeMap<String, ParticipantRecord>,
}

impl AuditDocument {
    pub fn new(records: impl IntoIterator<Item = ParticipantRecord>) -> Self {
        AuditDocument {
            format: AUDIT_FORMAT.into(),
            version: AUDIT_VERSION,
            participants: records.into_iter().map(|r| (r.participant_id.clone(), r)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CohortError> {
        let doc: AuditDocument = serde_json::from_str(text).map_err(|e| CohortError::Audit(e.to_string()))?;
        if doc.format != AUDIT_FORMAT || doc.version != AUDIT_VERSION {
            return Err(CohortError::Audit(format!("unsupported audit {} v{}", doc.format, doc.version)));
        }
        Ok(doc)
    }
}

/// Write the audit for `records` to `path` and return it.
pub fn persist_results(records: &[ParticipantRecord], path: &Path) -> Result<AuditDocument, CohortError> {
    let doc = AuditDocument::new(records.iter().cloned());
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CohortError::io(dir, e))?;
    }
    std::fs::write(path, doc.to_json() + "\n").map_err(|e| CohortError::io(path, e))?;
    Ok(doc)
}

pub fn read_audit(path: &Path) -> Result<AuditDocument, CohortError> {
    let text = std::fs::read_to_string(path).map_err(|e| CohortError::io(path, e))?;
    AuditDocument::from_json(&text)
}
