use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExamError;
use crate::gateway::{ChatRequest, GatewayError, Message, Sampling};
use crate::task::TaskId;

const SECTION_INTRO: &str = "Task Introduction";
const SECTION_GUIDELINES: &str = "Guidelines";
const SECTION_FORMAT: &str = "Output Format";
const SECTION_EXAMPLES: &str = "Examples";

/// Marker opening every examiner system prompt.
pub const EXAMINER_MARKER: &str = "# Examiner";
/// Prefix of the line carrying the transcript in the user message.
pub const TRANSCRIPT_PREFIX: &str = "Transcript: \"";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExaminerPromptTemplate {
    pub task_id: TaskId,
    pub task_introduction: String,
    pub guidelines: String,
    pub output_format: String,
    pub examples: Vec<String>,
}

impl ExaminerPromptTemplate {
    /// Parse a template file: `## Task Introduction`, `## Guidelines`,
    /// `## Output Format` and `## Examples` sections, with individual
    /// examples introduced by `### ` headings.
    pub fn parse(task_id: TaskId, text: &str) -> Result<Self, ExamError> {
        let mut sections: BTreeMap<String, String> = BTreeMap::new();
        let mut current: Option<String> = None;
        for line in text.lines() {
            if let Some(h) = line.strip_prefix("## ") {
                current = Some(h.trim().to_string());
                sections.entry(h.trim().to_string()).or_default();
            } else if let Some(name) = &current {
                let body = sections.get_mut(name).expect("section inserted");
                body.push_str(line);
                body.push('\n');
            }
        }
        let take = |name: &str| -> Result<String, ExamError> {
            let body = sections.get(name).map(|s| s.trim().to_string()).unwrap_or_default();
            if body.is_empty() {
                Err(ExamError::Template { task: task_id, message: format!("missing or empty section `{name}`") })
            } else {
                Ok(body)
            }
        };
        let examples_text = take(SECTION_EXAMPLES)?;
        let mut examples = Vec::new();
        let mut cur = String::new();
        for line in examples_text.lines() {
            if line.starts_with("### ") {
                if !cur.trim().is_empty() {
                    examples.push(cur.trim().to_string());
                }
                cur.clear();
            } else {
                cur.push_str(line);
                cur.push('\n');
            }
        }
        if !cur.trim().is_empty() {
            examples.push(cur.trim().to_string());
        }
        Ok(ExaminerPromptTemplate {
            task_id,
            task_introduction: take(SECTION_INTRO)?,
            guidelines: take(SECTION_GUIDELINES)?,
            output_format: take(SECTION_FORMAT)?,
            examples,
        })
    }

    pub fn builtin(task_id: TaskId) -> Self {
        let text = match task_id {
            TaskId::PictureNaming => include_str!("../../templates/picture_naming.md"),
            TaskId::DigitSpan => include_str!("../../templates/digit_span.md"),
            TaskId::Serial7 => include_str!("../../templates/serial7.md"),
            TaskId::SentenceRep => include_str!("../../templates/sentence_rep.md"),
            TaskId::AnimalFluency => include_str!("../../templates/animal_fluency.md"),
            TaskId::Abstraction => include_str!("../../templates/abstraction.md"),
            TaskId::HklltTrial4 | TaskId::HklltTrial5 => include_str!("../../templates/hkllt.md"),
        };
        Self::parse(task_id, text).expect("builtin templates are well-formed")
    }

    /// System prompt text: marker, task id, then the four sections.
    pub fn system_text(&self) -> String {
        let mut s = format!(
            "{EXAMINER_MARKER}\nTask ID: {}\n\n## {SECTION_INTRO}\n{}\n\n## {SECTION_GUIDELINES}\n{}\n\n## {SECTION_FORMAT}\n{}\n\n## {SECTION_EXAMPLES}",
            self.task_id, self.task_introduction, self.guidelines, self.output_format
        );
        for (i, ex) in self.examples.iter().enumerate() {
            s.push_str(&format!("\n### Example {}\n{ex}", i + 1));
        }
        s
    }
}

/// One template per task; immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateRegistry {
    templates: BTreeMap<TaskId, ExaminerPromptTemplate>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        TemplateRegistry { templates: TaskId::ALL.iter().map(|t| (*t, ExaminerPromptTemplate::builtin(*t))).collect() }
    }
}

impl TemplateRegistry {
    /// Builtin templates, overridden by `<task_id>.md` files found in `dir`.
    /// Both HKLLT trials also pick up `hkllt.md`.
    pub fn load_dir(dir: &Path) -> Result<Self, ExamError> {
        let mut reg = TemplateRegistry::default();
        for task in TaskId::ALL {
            let mut candidates = vec![dir.join(format!("{task}.md"))];
            if task.is_hkllt() {
                candidates.push(dir.join("hkllt.md"));
            }
            if let Some(path) = candidates.into_iter().find(|p| p.is_file()) {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ExamError::Template { task, message: format!("{}: {e}", path.display()) })?;
                reg.templates.insert(task, ExaminerPromptTemplate::parse(task, &text)?);
            }
        }
        Ok(reg)
    }

    pub fn get(&self, task: TaskId) -> &ExaminerPromptTemplate {
        &self.templates[&task]
    }
}

/// Assemble the examiner conversation for one transcript.
pub fn build_prompt(
    template: &ExaminerPromptTemplate,
    transcript: &str,
    sampling: Sampling,
) -> Result<ChatRequest, GatewayError> {
    let mut user = String::from("## Transcript\nPlease output the result in the required format.\n");
    if transcript.trim().is_empty() {
        user.push_str("The transcript is empty: the subject gave no response.\n");
    }
    user.push_str(TRANSCRIPT_PREFIX);
    user.push_str(transcript);
    user.push('"');
    ChatRequest::new(vec![Message::system(template.system_text()), Message::user(user)], sampling)
}

/// Recover the transcript embedded by [`build_prompt`] or the verifier
/// prompt. The transcript is always the last thing in the message.
pub fn embedded_transcript(user_text: &str) -> Option<&str> {
    let start = user_text.find(TRANSCRIPT_PREFIX)? + TRANSCRIPT_PREFIX.len();
    user_text[start..].strip_suffix('"')
}

/// The `Task ID:` line of a system prompt.
pub fn embedded_task(system_text: &str) -> Option<TaskId> {
    system_text.lines().find_map(|l| l.strip_prefix("Task ID: ")?.trim().parse().ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_have_all_sections() {
        for task in TaskId::ALL {
            let t = ExaminerPromptTemplate::builtin(task);
            assert!(!t.task_introduction.is_empty() && !t.guidelines.is_empty());
            assert!(!t.output_format.is_empty());
            assert!(!t.examples.is_empty(), "{task}");
        }
    }

    #[test]
    fn animal_prompt_mentions_list_length() {
        let t = ExaminerPromptTemplate::builtin(TaskId::AnimalFluency);
        let req = build_prompt(&t, "lion, tiger", Sampling::examiner()).unwrap();
        assert!(req.system_text().contains("list_length"));
        assert!(req.system_text().starts_with(EXAMINER_MARKER));
        assert_eq!(req.temperature, 0.3);
        assert_eq!(embedded_transcript(req.last_user_text()), Some("lion, tiger"));
        assert_eq!(embedded_task(req.system_text()), Some(TaskId::AnimalFluency));
    }

    #[test]
    fn abstraction_prompt_has_delimiter_rule() {
        let t = ExaminerPromptTemplate::builtin(TaskId::Abstraction);
        let req = build_prompt(&t, "x", Sampling::examiner()).unwrap();
        assert!(req.system_text().contains("separated by <|question-change|>"));
    }

    #[test]
    fn empty_transcript_is_marked() {
        let t = ExaminerPromptTemplate::builtin(TaskId::Serial7);
        let req = build_prompt(&t, "", Sampling::examiner()).unwrap();
        assert!(req.last_user_text().contains("transcript is empty"));
        assert_eq!(embedded_transcript(req.last_user_text()), Some(""));
    }

    #[test]
    fn missing_section_is_rejected() {
        let err =
            ExaminerPromptTemplate::parse(TaskId::Serial7, "## Task Introduction\nx\n## Guidelines\ny\n").unwrap_err();
        assert!(err.to_string().contains("Examples"), "{err}");
    }

    #[test]
    fn hkllt_trials_share_text_but_not_id() {
        let reg = TemplateRegistry::default();
        let a = reg.get(TaskId::HklltTrial4);
        let b = reg.get(TaskId::HklltTrial5);
        assert_eq!(a.guidelines, b.guidelines);
        assert_ne!(a.system_text(), b.system_text());
    }
}
