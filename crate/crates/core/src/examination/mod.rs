//! Examiner agents and the verification loop.
//!
//! Each task transcript goes to a dedicated examiner prompt. The output is
//! parsed into an [`Extraction`], scored by the toolbox, checked against the
//! transcript and optionally by a verifier model, and regenerated with
//! feedback until it passes or the retry cap is reached.

mod dispatch;
mod oracle;
mod parse;
mod template;
mod verify;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use dispatch::{dispatch_tools, ToolOutcome, TOOL_NAMES};
pub use oracle::{hallucinate, Hallucination, OracleBackend};
pub use parse::{
    find_json_object, labeled_list, parse_examiner_output, render_examiner_output, ParseError, ParsedOutput,
};
pub use template::{
    build_prompt, embedded_task, embedded_transcript, ExaminerPromptTemplate, TemplateRegistry, EXAMINER_MARKER,
};
pub use verify::{
    build_verifier_prompt, embedded_extraction, feedback_message, ground_check, llm_verify, parse_verdict,
    surface_items, Finding, FindingReason, SurfaceItem, VerdictSource, VerifierVerdict, RETHINK, VERIFIER_MARKER,
};

use crate::gateway::{BlockError, ChatBackend, Message, Sampling, ToolCall};
use crate::primitives::{score_extraction, Extraction, Stimuli, TaskPrimitives};
use crate::task::TaskId;

#[derive(Debug, thiserror::Error)]
pub enum ExamError {
    #[error("template for {task}: {message}")]
    Template { task: TaskId, message: String },
    #[error("session has no transcripts")]
    EmptySession,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierConfig {
    pub n_max: u32,
    pub grounding: bool,
    pub llm_verify: bool,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig { n_max: 3, grounding: true, llm_verify: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExaminationConfig {
    pub verifier: VerifierConfig,
    pub examiner_sampling: Sampling,
    pub verifier_sampling: Sampling,
}

impl Default for ExaminationConfig {
    fn default() -> Self {
        ExaminationConfig {
            verifier: VerifierConfig::default(),
            examiner_sampling: Sampling::examiner(),
            verifier_sampling: Sampling::verifier(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExaminerResult {
    pub task_id: TaskId,
    pub extracted: Extraction,
    pub primitives: TaskPrimitives,
    pub tool_calls: Vec<ToolCall>,
    pub tool_results: Vec<ToolOutcome>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub block_errors: Vec<BlockError>,
    pub raw_text: String,
    pub attempt: u32,
}

/// One generate-parse-verify round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: u32,
    pub raw_text: String,
    pub verdicts: Vec<VerifierVerdict>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskExamination {
    pub task_id: TaskId,
    pub result: Option<ExaminerResult>,
    pub history: Vec<AttemptRecord>,
    pub examiner_calls: u32,
    /// Final verdict passed. False when accepted at the retry cap.
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TaskExamination {
    pub fn primitives(&self) -> Option<&TaskPrimitives> {
        self.result.as_ref().map(|r| &r.primitives)
    }

    pub fn failed(&self) -> bool {
        self.result.is_none()
    }
}

/// Routing of a session's transcripts to examiners.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Assignment {
    pub routings: Vec<(TaskId, String)>,
    pub missing: Vec<TaskId>,
    pub unknown: Vec<String>,
}

/// Map each known task id to its transcript; report absent and unrecognized
/// tasks.
pub fn assign<'a>(transcripts: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Assignment, ExamError> {
    let mut out = Assignment::default();
    let mut seen = BTreeSet::new();
    let mut any = false;
    for (key, text) in transcripts {
        any = true;
        match key.parse::<TaskId>() {
            Ok(task) if seen.insert(task) => out.routings.push((task, text.to_string())),
            Ok(_) => {}
            Err(_) => out.unknown.push(key.to_string()),
        }
    }
    if !any {
        return Err(ExamError::EmptySession);
    }
    out.routings.sort_by_key(|(t, _)| *t);
    out.missing = TaskId::ALL.into_iter().filter(|t| !seen.contains(t)).collect();
    Ok(out)
}

/// Runs examiner prompts for every task against one backend.
pub struct Examiner<B> {
    backend: B,
    templates: TemplateRegistry,
    stimuli: Stimuli,
    config: ExaminationConfig,
}

impl<B: ChatBackend> Examiner<B> {
    pub fn new(backend: B, config: ExaminationConfig) -> Self {
        Examiner { backend, templates: TemplateRegistry::default(), stimuli: Stimuli::default(), config }
    }

    pub fn with_templates(mut self, templates: TemplateRegistry) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_stimuli(mut self, stimuli: Stimuli) -> Self {
        self.stimuli = stimuli;
        self
    }

    pub fn config(&self) -> &ExaminationConfig {
        &self.config
    }

    pub fn stimuli(&self) -> &Stimuli {
        &self.stimuli
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    fn evaluate(
        &self,
        task: TaskId,
        transcript: &str,
        raw: &str,
        attempt: u32,
    ) -> (Option<ExaminerResult>, Vec<VerifierVerdict>) {
        let ParsedOutput { extraction, calls, block_errors } = match parse_examiner_output(task, raw) {
            Ok(p) => p,
            Err(e) => return (None, vec![VerifierVerdict::schema_violation(&e.message, &e.fragment)]),
        };
        let primitives = match score_extraction(task, &extraction, &self.stimuli) {
            Ok(p) => p,
            Err(e) => return (None, vec![VerifierVerdict::schema_violation(&e.to_string(), raw.trim())]),
        };
        let result = ExaminerResult {
            task_id: task,
            tool_results: dispatch_tools(&calls, &self.stimuli.hkllt_targets),
            extracted: extraction,
            primitives,
            tool_calls: calls,
            block_errors,
            raw_text: raw.to_string(),
            attempt,
        };
        let cfg = self.config.verifier;
        let mut verdicts = Vec::new();
        if cfg.grounding {
            verdicts.push(ground_check(transcript, &result.extracted));
        }
        if cfg.llm_verify && verdicts.iter().all(|v| v.passed) {
            let template = self.templates.get(task);
            verdicts.push(llm_verify(
                &self.backend,
                template,
                transcript,
                &result.extracted,
                self.config.verifier_sampling,
            ));
        }
        if verdicts.is_empty() {
            verdicts.push(VerifierVerdict::pass(VerdictSource::Disabled));
        }
        (Some(result), verdicts)
    }

    /// Generate, verify and regenerate until a pass or the retry cap. At the
    /// cap the latest parseable result is accepted as is.
    pub fn examine_task(&self, task: TaskId, transcript: &str) -> TaskExamination {
        let mut exam = TaskExamination {
            task_id: task,
            result: None,
            history: vec![],
            examiner_calls: 0,
            verified: false,
            error: None,
        };
        let mut request = match build_prompt(self.templates.get(task), transcript, self.config.examiner_sampling) {
            Ok(p) => p,
            Err(e) => {
                exam.error = Some(e.to_string());
                return exam;
            }
        };
        let n_max = self.config.verifier.n_max;
        for attempt in 0..=n_max {
            exam.examiner_calls += 1;
            let raw = match self.backend.complete(&request) {
                Ok(raw) => raw,
                Err(e) => {
                    exam.error = Some(format!("examiner backend failed on attempt {attempt}: {e}"));
                    exam.result = None;
                    exam.verified = false;
                    return exam;
                }
            };
            let (result, verdicts) = self.evaluate(task, transcript, &raw, attempt);
            let passed = verdicts.iter().all(|v| v.passed);
            let failed_verdict = verdicts.iter().find(|v| !v.passed).cloned();
            exam.history.push(AttemptRecord { attempt, raw_text: raw.clone(), verdicts, passed });
            if let Some(r) = result {
                exam.result = Some(r);
            }
            exam.verified = passed && exam.result.as_ref().is_some_and(|r| r.attempt == attempt);
            match failed_verdict {
                None => break,
                Some(v) if attempt < n_max => {
                    request.messages.push(Message::assistant(raw));
                    request.messages.push(Message::user(feedback_message(&v)));
                }
                Some(_) => {}
            }
        }
        if exam.result.is_none() {
            exam.error = Some(format!("no parseable examiner output after {} attempts", exam.examiner_calls));
        }
        exam
    }

    pub fn examine_all(&self, assignment: &Assignment) -> Vec<TaskExamination> {
        assignment.routings.iter().map(|(task, text)| self.examine_task(*task, text)).collect()
    }
}
