//! Examiner-level extractions and the scoring primitives derived from them.
//!
//! An [`Extraction`] is what an examiner reads out of a transcript (named
//! animals, spoken numbers, judged responses). [`TaskPrimitives`] are the
//! verified measurements computed from it by the toolbox.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::task::TaskId;
use crate::text;
use crate::toolbox::{self, HklltParseResult, MatchMode, ScoreDetail, TargetList, TaskScore};

/// Stimulus configuration the deterministic scorers compare against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimuli {
    pub naming_targets: Vec<String>,
    pub digits_forward: Vec<u32>,
    /// Digits as read aloud; the correct answer is this sequence reversed.
    pub digits_backward_presented: Vec<u32>,
    pub sentences: Vec<String>,
    pub animal_threshold: u32,
    pub hkllt_targets: TargetList,
}

impl Default for Stimuli {
    fn default() -> Self {
        Stimuli {
            naming_targets: vec!["lion".into(), "rhino".into(), "camel".into()],
            digits_forward: vec![2, 1, 8, 5, 4],
            digits_backward_presented: vec![7, 4, 2],
            sentences: vec![
                "I only know that John is the one to help today".into(),
                "The cat always hid under the couch when dogs were in the room".into(),
            ],
            animal_threshold: toolbox::ANIMAL_FLUENCY_THRESHOLD,
            hkllt_targets: TargetList::synthetic(),
        }
    }
}

impl Stimuli {
    pub fn digits_backward_expected(&self) -> Vec<u32> {
        self.digits_backward_presented.iter().rev().copied().collect()
    }
}

/// A response with the examiner's correctness judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judged {
    pub response: Vec<String>,
    pub is_correct: bool,
}

impl Judged {
    pub fn new(response: impl Into<String>, is_correct: bool) -> Self {
        Judged { response: vec![response.into()], is_correct }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Extraction {
    PictureNaming { items: Vec<Judged> },
    DigitSpan { forward: Vec<u32>, backward: Vec<u32> },
    Serial7 { responses: Vec<i64> },
    SentenceRep { responses: Vec<String> },
    AnimalFluency { animals: Vec<String> },
    Abstraction { q1: Judged, q2: Judged },
    HklltRecall { recalled: Vec<String> },
}

impl Extraction {
    /// Whether this extraction shape belongs to `task`.
    pub fn fits(&self, task: TaskId) -> bool {
        matches!(
            (self, task),
            (Extraction::PictureNaming { .. }, TaskId::PictureNaming)
                | (Extraction::DigitSpan { .. }, TaskId::DigitSpan)
                | (Extraction::Serial7 { .. }, TaskId::Serial7)
                | (Extraction::SentenceRep { .. }, TaskId::SentenceRep)
                | (Extraction::AnimalFluency { .. }, TaskId::AnimalFluency)
                | (Extraction::Abstraction { .. }, TaskId::Abstraction)
                | (Extraction::HklltRecall { .. }, TaskId::HklltTrial4 | TaskId::HklltTrial5)
        )
    }

    /// An extraction with nothing found, used when a task fails outright.
    pub fn empty(task: TaskId) -> Self {
        match task {
            TaskId::PictureNaming => Extraction::PictureNaming { items: vec![] },
            TaskId::DigitSpan => Extraction::DigitSpan { forward: vec![], backward: vec![] },
            TaskId::Serial7 => Extraction::Serial7 { responses: vec![] },
            TaskId::SentenceRep => Extraction::SentenceRep { responses: vec![] },
            TaskId::AnimalFluency => Extraction::AnimalFluency { animals: vec![] },
            TaskId::Abstraction => Extraction::Abstraction {
                q1: Judged { response: vec![], is_correct: false },
                q2: Judged { response: vec![], is_correct: false },
            },
            TaskId::HklltTrial4 | TaskId::HklltTrial5 => Extraction::HklltRecall { recalled: vec![] },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoringError {
    #[error("extraction shape does not match task {0}")]
    WrongShape(TaskId),
    #[error("{task}: expected {expected} items, got {got}")]
    ItemCount { task: TaskId, expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskPrimitives {
    PictureNaming { flags: Vec<bool> },
    DigitSpan { forward: bool, backward: bool },
    Serial7 { count_correct: u32, score: u32 },
    SentenceRep { flags: Vec<bool> },
    AnimalFluency { n_animals: u32, score: u32 },
    Abstraction { q1: bool, q2: bool },
    HklltRecall(HklltParseResult),
}

impl TaskPrimitives {
    /// Points for the task.
    pub fn value(&self) -> u32 {
        match self {
            TaskPrimitives::PictureNaming { flags } | TaskPrimitives::SentenceRep { flags } => {
                toolbox::score_per_item(flags)
            }
            TaskPrimitives::DigitSpan { forward, backward } => toolbox::score_digit_span(*forward, *backward),
            TaskPrimitives::Serial7 { score, .. } => *score,
            TaskPrimitives::AnimalFluency { score, .. } => *score,
            TaskPrimitives::Abstraction { q1, q2 } => toolbox::score_per_item(&[*q1, *q2]),
            TaskPrimitives::HklltRecall(r) => r.n_recall,
        }
    }

    pub fn to_task_score(&self, task: TaskId) -> Result<TaskScore, toolbox::ToolError> {
        let detail = match self {
            TaskPrimitives::PictureNaming { flags } | TaskPrimitives::SentenceRep { flags } => {
                ScoreDetail::Flags { flags: flags.clone() }
            }
            TaskPrimitives::DigitSpan { forward, backward } => ScoreDetail::Flags { flags: vec![*forward, *backward] },
            TaskPrimitives::Abstraction { q1, q2 } => ScoreDetail::Flags { flags: vec![*q1, *q2] },
            TaskPrimitives::Serial7 { count_correct, .. } => ScoreDetail::Count { count: *count_correct },
            TaskPrimitives::AnimalFluency { n_animals, .. } => ScoreDetail::Count { count: *n_animals },
            TaskPrimitives::HklltRecall(r) => ScoreDetail::Recall(*r),
        };
        TaskScore::new(task, self.value(), detail)
    }
}

fn expect_len(task: TaskId, expected: usize, got: usize) -> Result<(), ScoringError> {
    if expected == got {
        Ok(())
    } else {
        Err(ScoringError::ItemCount { task, expected, got })
    }
}

/// Turn an extraction into primitives using only deterministic tools.
pub fn score_extraction(
    task: TaskId,
    extraction: &Extraction,
    stimuli: &Stimuli,
) -> Result<TaskPrimitives, ScoringError> {
    if !extraction.fits(task) {
        return Err(ScoringError::WrongShape(task));
    }
    Ok(match extraction {
        Extraction::PictureNaming { items } => {
            expect_len(task, stimuli.naming_targets.len(), items.len())?;
            TaskPrimitives::PictureNaming { flags: items.iter().map(|i| i.is_correct).collect() }
        }
        Extraction::DigitSpan { forward, backward } => {
            let exact = |target: &[u32], said: &[u32]| {
                !target.is_empty()
                    && toolbox::keyword_check(target, said, MatchMode::ExactSequence)
                        .map(|m| m.matched)
                        .unwrap_or(false)
            };
            TaskPrimitives::DigitSpan {
                forward: exact(&stimuli.digits_forward, forward),
                backward: exact(&stimuli.digits_backward_expected(), backward),
            }
        }
        Extraction::Serial7 { responses } => {
            let s = toolbox::score_serial7(responses);
            TaskPrimitives::Serial7 { count_correct: s.count_correct, score: s.score }
        }
        Extraction::SentenceRep { responses } => {
            expect_len(task, stimuli.sentences.len(), responses.len())?;
            let flags = stimuli
                .sentences
                .iter()
                .zip(responses)
                .map(|(target, said)| {
                    let target = text::tokens(target);
                    !target.is_empty()
                        && toolbox::keyword_check(&target, &text::tokens(said), MatchMode::ExactSequence)
                            .map(|m| m.matched)
                            .unwrap_or(false)
                })
                .collect();
            TaskPrimitives::SentenceRep { flags }
        }
        Extraction::AnimalFluency { animals } => {
            let normalized: Vec<String> =
                animals.iter().map(|a| text::normalize(a)).filter(|a| !a.is_empty()).collect();
            let n = toolbox::list_length(&toolbox::dedupe_exact(&normalized)) as u32;
            TaskPrimitives::AnimalFluency {
                n_animals: n,
                score: toolbox::score_animal_fluency(n, stimuli.animal_threshold),
            }
        }
        Extraction::Abstraction { q1, q2 } => TaskPrimitives::Abstraction { q1: q1.is_correct, q2: q2.is_correct },
        Extraction::HklltRecall { recalled } => {
            TaskPrimitives::HklltRecall(toolbox::parse_hkllt(recalled, &stimuli.hkllt_targets))
        }
    })
}

/// Verified primitives for one participant, keyed by task.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionPrimitives(pub BTreeMap<TaskId, TaskPrimitives>);

impl SessionPrimitives {
    pub fn get(&self, task: TaskId) -> Option<&TaskPrimitives> {
        self.0.get(&task)
    }

    pub fn insert(&mut self, task: TaskId, p: TaskPrimitives) {
        self.0.insert(task, p);
    }

    pub fn value(&self, task: TaskId) -> Option<u32> {
        self.get(task).map(TaskPrimitives::value)
    }

    /// MoCA-SL total, available only when all six subtasks are present.
    pub fn moca_sl_total(&self) -> Option<u32> {
        let scores =
            TaskId::MOCA_SL.iter().map(|t| self.get(*t)?.to_task_score(*t).ok()).collect::<Option<Vec<_>>>()?;
        toolbox::aggregate_moca_sl(&scores).ok()
    }

    pub fn recall(&self, task: TaskId) -> Option<HklltParseResult> {
        match self.get(task)? {
            TaskPrimitives::HklltRecall(r) => Some(*r),
            _ => None,
        }
    }
}
