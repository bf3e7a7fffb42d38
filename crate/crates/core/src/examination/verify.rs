use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::template::{ExaminerPromptTemplate, TRANSCRIPT_PREFIX};
use crate::gateway::{ChatBackend, ChatRequest, GatewayError, Message, Sampling};
use crate::primitives::Extraction;
use crate::text;

pub const VERIFIER_MARKER: &str = "# Verifier";
pub const EXAMINER_OUTPUT_HEADER: &str = "## Examiner Output";
pub const RETHINK: &str = "Ignore previous answer and rethink.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingReason {
    NotInTranscript,
    JudgmentError,
    SchemaViolation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub item: String,
    pub reason: FindingReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictSource {
    Parse,
    Grounding,
    Llm,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierVerdict {
    pub passed: bool,
    pub feedback: String,
    pub findings: Vec<Finding>,
    pub source: VerdictSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl VerifierVerdict {
    pub fn pass(source: VerdictSource) -> Self {
        VerifierVerdict { passed: true, feedback: String::new(), findings: vec![], source, warning: None }
    }

    pub fn fail(source: VerdictSource, feedback: String, findings: Vec<Finding>) -> Self {
        VerifierVerdict { passed: false, feedback, findings, source, warning: None }
    }

    pub fn schema_violation(message: &str, fragment: &str) -> Self {
        Self::fail(
            VerdictSource::Parse,
            format!("Output does not follow the required format: {message}. Offending part: {fragment}"),
            vec![Finding { item: fragment.to_string(), reason: FindingReason::SchemaViolation }],
        )
    }
}

/// A surface item an extraction claims the subject said.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SurfaceItem {
    Number(i64),
    Text { label: &'static str, text: String },
}

impl SurfaceItem {
    fn text(label: &'static str, text: &str) -> Option<Self> {
        (!text::normalize(text).is_empty()).then(|| SurfaceItem::Text { label, text: text.to_string() })
    }
}

/// Every surface item in an extraction, in order.
pub fn surface_items(extraction: &Extraction) -> Vec<SurfaceItem> {
    let words = |label, list: &[String]| list.iter().filter_map(|w| SurfaceItem::text(label, w)).collect::<Vec<_>>();
    match extraction {
        Extraction::PictureNaming { items } => items.iter().flat_map(|i| words("Response", &i.response)).collect(),
        Extraction::DigitSpan { forward, backward } => {
            forward.iter().chain(backward).map(|d| SurfaceItem::Number(i64::from(*d))).collect()
        }
        Extraction::Serial7 { responses } => responses.iter().map(|n| SurfaceItem::Number(*n)).collect(),
        Extraction::SentenceRep { responses } => words("Response", responses),
        Extraction::AnimalFluency { animals } => words("Animal", animals),
        Extraction::Abstraction { q1, q2 } => {
            let mut v = words("Response", &q1.response);
            v.extend(words("Response", &q2.response));
            v
        }
        Extraction::HklltRecall { recalled } => words("Word", recalled),
    }
}

/// Deterministic grounding: every surface item must occur in the
/// transcript (numbers via the spoken-number scan, text as a normalized
/// substring).
pub fn ground_check(transcript: &str, extraction: &Extraction) -> VerifierVerdict {
    let spoken = text::spoken_numbers(transcript);
    let mut lines = Vec::new();
    let mut findings: Vec<Finding> = Vec::new();
    for item in surface_items(extraction) {
        let (found, label, shown, key) = match &item {
            SurfaceItem::Number(n) => {
                let found = u32::try_from(*n).is_ok_and(|n| spoken.contains(&n));
                (found, "Number", n.to_string(), n.to_string())
            }
            SurfaceItem::Text { label, text: t } => {
                (text::normalized_contains(transcript, t), *label, format!("\"{t}\""), t.clone())
            }
        };
        if !found && !findings.iter().any(|f| f.item == key) {
            lines.push(format!("{label} {shown} not found in transcript, may be misidentified or fabricated."));
            findings.push(Finding { item: key, reason: FindingReason::NotInTranscript });
        }
    }
    if findings.is_empty() {
        VerifierVerdict::pass(VerdictSource::Grounding)
    } else {
        VerifierVerdict::fail(VerdictSource::Grounding, lines.join("\n"), findings)
    }
}

/// Verifier conversation: task guidelines plus the (transcript, result) pair.
pub fn build_verifier_prompt(
    template: &ExaminerPromptTemplate,
    transcript: &str,
    extraction: &Extraction,
    sampling: Sampling,
) -> Result<ChatRequest, GatewayError> {
    let system = format!(
        "{VERIFIER_MARKER}\nTask ID: {}\n\nYou check an examiner's output against the original transcript.\n\n## Task Guidelines\n{}\n\n## Response Format\nIf every extracted item occurs in the transcript and every judgment is correct, reply starting with \"Pass\".\nOtherwise write one line per problem:\n- <Label> <item> not found in transcript, may be misidentified or fabricated.\n- <Field> Judgment Error (<kind>): <reason>\n  Correction: <what to change>",
        template.task_id, template.guidelines
    );
    let output = serde_json::to_string_pretty(extraction).expect("extractions serialize");
    let user = format!("{EXAMINER_OUTPUT_HEADER}\n{output}\n\n## Transcript\n{TRANSCRIPT_PREFIX}{transcript}\"");
    ChatRequest::new(vec![Message::system(system), Message::user(user)], sampling)
}

/// The extraction embedded in a verifier prompt.
pub fn embedded_extraction(user_text: &str) -> Option<Extraction> {
    let start = user_text.find(EXAMINER_OUTPUT_HEADER)? + EXAMINER_OUTPUT_HEADER.len();
    let end = user_text.find("\n\n## Transcript")?;
    serde_json::from_str(user_text.get(start..end)?.trim()).ok()
}

static JUDGMENT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*(?:-\s*)?(.+?)\s+judgment error\b").expect("valid regex"));
static MISSING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)^\s*(?:-\s*)?(?:(?:number|animal|word|response|item)\s+)?"?(.+?)"?\s+not found in transcript"#)
        .expect("valid regex")
});

/// Interpret free-text verifier output.
pub fn parse_verdict(text: &str) -> VerifierVerdict {
    let trimmed = text.trim();
    if trimmed.to_lowercase().starts_with("pass") {
        return VerifierVerdict::pass(VerdictSource::Llm);
    }
    let mut findings = Vec::new();
    for line in trimmed.lines() {
        if let Some(c) = JUDGMENT.captures(line) {
            findings.push(Finding { item: c[1].trim().to_string(), reason: FindingReason::JudgmentError });
        } else if let Some(c) = MISSING.captures(line) {
            findings.push(Finding { item: c[1].trim().to_string(), reason: FindingReason::NotInTranscript });
        }
    }
    if findings.is_empty() && trimmed.to_lowercase().starts_with("fail") {
        findings.push(Finding { item: "output".into(), reason: FindingReason::JudgmentError });
    }
    if findings.is_empty() {
        let mut v = VerifierVerdict::pass(VerdictSource::Llm);
        v.warning = Some(format!("unparseable verifier output accepted: {trimmed}"));
        v
    } else {
        VerifierVerdict::fail(VerdictSource::Llm, trimmed.to_string(), findings)
    }
}

/// Ask the verifier model. Backend failures and unparseable replies pass
/// with a warning.
pub fn llm_verify<B: ChatBackend + ?Sized>(
    backend: &B,
    template: &ExaminerPromptTemplate,
    transcript: &str,
    extraction: &Extraction,
    sampling: Sampling,
) -> VerifierVerdict {
    let outcome = build_verifier_prompt(template, transcript, extraction, sampling).and_then(|r| backend.complete(&r));
    match outcome {
        Ok(text) => parse_verdict(&text),
        Err(e) => {
            let mut v = VerifierVerdict::pass(VerdictSource::Llm);
            v.warning = Some(format!("verifier unavailable: {e}"));
            v
        }
    }
}

/// Text of the user message that asks the examiner to regenerate.
pub fn feedback_message(verdict: &VerifierVerdict) -> String {
    format!("{}\n\n{RETHINK}", verdict.feedback)
}
