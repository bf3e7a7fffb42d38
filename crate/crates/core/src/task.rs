//! Task identifiers and screening labels shared by every stage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The eight spoken tasks scored by the pipeline: six MoCA-SL subtasks and
/// the two delayed-recall trials of the list-learning test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    PictureNaming,
    DigitSpan,
    Serial7,
    SentenceRep,
    AnimalFluency,
    Abstraction,
    HklltTrial4,
    HklltTrial5,
}

impl TaskId {
    pub const ALL: [TaskId; 8] = [
        TaskId::PictureNaming,
        TaskId::DigitSpan,
        TaskId::Serial7,
        TaskId::SentenceRep,
        TaskId::AnimalFluency,
        TaskId::Abstraction,
        TaskId::HklltTrial4,
        TaskId::HklltTrial5,
    ];

    /// The MoCA-SL subset, in aggregation order.
    pub const MOCA_SL: [TaskId; 6] = [
        TaskId::PictureNaming,
        TaskId::DigitSpan,
        TaskId::Serial7,
        TaskId::SentenceRep,
        TaskId::AnimalFluency,
        TaskId::Abstraction,
    ];

    /// Maximum points for the task.
    pub fn max_points(self) -> u32 {
        match self {
            TaskId::PictureNaming => 3,
            TaskId::DigitSpan => 2,
            TaskId::Serial7 => 3,
            TaskId::SentenceRep => 2,
            TaskId::AnimalFluency => 1,
            TaskId::Abstraction => 2,
            TaskId::HklltTrial4 | TaskId::HklltTrial5 => 16,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::PictureNaming => "picture_naming",
            TaskId::DigitSpan => "digit_span",
            TaskId::Serial7 => "serial7",
            TaskId::SentenceRep => "sentence_rep",
            TaskId::AnimalFluency => "animal_fluency",
            TaskId::Abstraction => "abstraction",
            TaskId::HklltTrial4 => "hkllt_trial4",
            TaskId::HklltTrial5 => "hkllt_trial5",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            TaskId::PictureNaming => "MoCA Picture Naming",
            TaskId::DigitSpan => "MoCA Digit Span",
            TaskId::Serial7 => "MoCA Serial 7 Subtraction",
            TaskId::SentenceRep => "MoCA Sentence Repetition",
            TaskId::AnimalFluency => "MoCA Animal Naming Fluency",
            TaskId::Abstraction => "MoCA Abstraction",
            TaskId::HklltTrial4 => "HKLLT Trial 4 (10-min delayed recall)",
            TaskId::HklltTrial5 => "HKLLT Trial 5 (30-min delayed recall)",
        }
    }

    pub fn is_moca_sl(self) -> bool {
        !self.is_hkllt()
    }

    pub fn is_hkllt(self) -> bool {
        matches!(self, TaskId::HklltTrial4 | TaskId::HklltTrial5)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown task id `{0}`")]
pub struct UnknownTask(pub String);

impl FromStr for TaskId {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskId::ALL.iter().copied().find(|t| t.as_str() == s).ok_or_else(|| UnknownTask(s.to_string()))
    }
}

/// Binary screening label. AD is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "AD")]
    Ad,
    #[serde(rename = "HC")]
    Hc,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Ad
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Ad => "AD",
            Label::Hc => "HC",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Other,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
            Gender::Other => "Other",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxima_sum_to_moca_sl_total() {
        let total: u32 = TaskId::MOCA_SL.iter().map(|t| t.max_points()).sum();
        assert_eq!(total, 13);
    }

    #[test]
    fn ids_round_trip_through_strings_and_serde() {
        for t in TaskId::ALL {
            assert_eq!(t.as_str().parse::<TaskId>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.as_str()));
        }
        assert!("clock".parse::<TaskId>().is_err());
    }
}
