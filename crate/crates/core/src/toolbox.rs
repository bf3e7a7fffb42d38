//! Deterministic measurement functions.
//!
//! Every quantity the pipeline reports is computed here. The language model
//! only extracts candidate responses; these functions count, compare and
//! map counts to points. All functions are pure.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::task::TaskId;
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ToolError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Matching rule for [`keyword_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Candidate equals the target sequence exactly.
    ExactSequence,
    /// Targets appear in the candidate in order, gaps allowed.
    OrderedSubsequence,
    /// Every target appears somewhere in the candidate.
    AllPresent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordMatch {
    pub matched: bool,
    pub per_target: Vec<bool>,
}

/// Compare a target sequence against a candidate sequence.
///
/// `per_target` semantics by mode:
/// * exact: target `i` equals candidate `i`;
/// * ordered: target `i` was consumed by a left-to-right greedy scan that
///   skips targets it cannot place after the previous match;
/// * all-present: target `i` occurs anywhere in the candidate.
pub fn keyword_check<T: PartialEq>(targets: &[T], candidate: &[T], mode: MatchMode) -> Result<KeywordMatch, ToolError> {
    if targets.is_empty() {
        return Err(ToolError::InvalidArgument("targets must be non-empty".into()));
    }
    let out = match mode {
        MatchMode::ExactSequence => {
            let per_target = targets.iter().enumerate().map(|(i, t)| candidate.get(i) == Some(t)).collect();
            KeywordMatch { matched: targets == candidate, per_target }
        }
        MatchMode::OrderedSubsequence => {
            let mut pos = 0;
            let per_target: Vec<bool> = targets
                .iter()
                .map(|t| match candidate[pos..].iter().position(|c| c == t) {
                    Some(off) => {
                        pos += off + 1;
                        true
                    }
                    None => false,
                })
                .collect();
            KeywordMatch { matched: per_target.iter().all(|b| *b), per_target }
        }
        MatchMode::AllPresent => {
            let per_target: Vec<bool> = targets.iter().map(|t| candidate.contains(t)).collect();
            KeywordMatch { matched: per_target.iter().all(|b| *b), per_target }
        }
    };
    Ok(out)
}

/// [`keyword_check`] over raw strings, normalizing each token first.
pub fn keyword_check_text<S: AsRef<str>>(
    targets: &[S],
    candidate: &[S],
    mode: MatchMode,
) -> Result<KeywordMatch, ToolError> {
    let norm = |v: &[S]| v.iter().map(|s| text::normalize(s.as_ref())).collect::<Vec<_>>();
    keyword_check(&norm(targets), &norm(candidate), mode)
}

/// Exact element count. Deduplication is not this function's job.
pub fn list_length<T>(items: &[T]) -> usize {
    items.len()
}

/// Drop exact-string repeats, keeping first occurrences in order.
pub fn dedupe_exact<S: AsRef<str>>(items: &[S]) -> Vec<String> {
    let mut seen = HashSet::new();
    items.iter().map(AsRef::as_ref).filter(|s| seen.insert(*s)).map(str::to_string).collect()
}

/// The 16-word, 4-category list-learning target list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TargetListDoc", into = "TargetListDoc")]
pub struct TargetList {
    words: Vec<String>,
    categories: Vec<String>,
    /// normalized word -> category index
    lookup: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TargetListDoc {
    categories: BTreeMap<String, Vec<String>>,
}

impl TryFrom<TargetListDoc> for TargetList {
    type Error = ToolError;

    fn try_from(doc: TargetListDoc) -> Result<Self, Self::Error> {
        let entries = doc
            .categories
            .into_iter()
            .flat_map(|(cat, words)| words.into_iter().map(move |w| (w, cat.clone())))
            .collect::<Vec<_>>();
        TargetList::new(entries)
    }
}

impl From<TargetList> for TargetListDoc {
    fn from(list: TargetList) -> Self {
        let mut categories: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (w, c) in list.words.iter().zip(&list.categories) {
            categories.entry(c.clone()).or_default().push(w.clone());
        }
        TargetListDoc { categories }
    }
}

impl TargetList {
    pub const WORDS: usize = 16;
    pub const CATEGORIES: usize = 4;

    /// Build from `(word, category)` pairs. Requires exactly 16 distinct
    /// words spread as 4 words over each of 4 categories.
    pub fn new<W: Into<String>, C: Into<String>>(entries: impl IntoIterator<Item = (W, C)>) -> Result<Self, ToolError> {
        let mut words = Vec::new();
        let mut categories = Vec::new();
        for (w, c) in entries {
            words.push(w.into());
            categories.push(c.into());
        }
        if words.len() != Self::WORDS {
            return Err(ToolError::InvalidArgument(format!(
                "target list needs {} words, got {}",
                Self::WORDS,
                words.len()
            )));
        }
        let mut per_cat: BTreeMap<&str, usize> = BTreeMap::new();
        for c in &categories {
            *per_cat.entry(c.as_str()).or_default() += 1;
        }
        if per_cat.len() != Self::CATEGORIES || per_cat.values().any(|n| *n != 4) {
            return Err(ToolError::InvalidArgument("target list needs exactly 4 categories of 4 words".into()));
        }
        let cat_names: Vec<&str> = per_cat.keys().copied().collect();
        let mut lookup = BTreeMap::new();
        for (w, c) in words.iter().zip(&categories) {
            let idx = cat_names.iter().position(|n| n == c).expect("category indexed above");
            if lookup.insert(text::normalize(w), idx).is_some() {
                return Err(ToolError::InvalidArgument(format!("duplicate target word `{w}`")));
            }
        }
        Ok(TargetList { words, categories, lookup })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn category_of(&self, word: &str) -> Option<&str> {
        let idx = self.words.iter().position(|w| text::normalize(w) == text::normalize(word))?;
        Some(&self.categories[idx])
    }

    fn category_index(&self, normalized: &str) -> Option<usize> {
        self.lookup.get(normalized).copied()
    }

    /// Synthetic list used by tests and the cohort generator. Clinical word
    /// lists are licensed material and must be supplied as configuration.
    pub fn synthetic() -> Self {
        let cats = [
            ("vegetable", ["carrot", "cabbage", "potato", "onion"]),
            ("transport", ["bus", "ferry", "taxi", "tram"]),
            ("clothing", ["jacket", "scarf", "glove", "sock"]),
            ("furniture", ["sofa", "desk", "shelf", "stool"]),
        ];
        TargetList::new(cats.iter().flat_map(|(c, ws)| ws.iter().map(move |w| (*w, *c))))
            .expect("synthetic list is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HklltParseResult {
    pub n_recall: u32,
    pub n_clustering: u32,
    pub intrusions: u32,
}

/// Recall metrics for one delayed-recall trial.
///
/// Words are compared after normalization. `n_recall` counts distinct
/// target words; `intrusions` counts every recalled word (repeats included)
/// that is not a target; `n_clustering` counts adjacent pairs in the
/// deduplicated recall order where both words are targets of the same
/// category.
pub fn parse_hkllt<S: AsRef<str>>(recalled: &[S], targets: &TargetList) -> HklltParseResult {
    let normalized: Vec<String> = recalled.iter().map(|w| text::normalize(w.as_ref())).collect();
    let intrusions = normalized.iter().filter(|w| targets.category_index(w).is_none()).count();
    let order = dedupe_exact(&normalized);
    let cats: Vec<Option<usize>> = order.iter().map(|w| targets.category_index(w)).collect();
    let n_recall = cats.iter().filter(|c| c.is_some()).count();
    let n_clustering = cats.windows(2).filter(|p| matches!((p[0], p[1]), (Some(a), Some(b)) if a == b)).count();
    HklltParseResult { n_recall: n_recall as u32, n_clustering: n_clustering as u32, intrusions: intrusions as u32 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Serial7Score {
    pub count_correct: u32,
    pub score: u32,
}

/// Only this many subtractions are administered and scored.
pub const SERIAL7_ITEMS: usize = 5;

/// Serial sevens: the first response is correct iff it is 93; each later
/// response is correct iff it is seven less than the response before it,
/// so a single slip costs one point rather than the rest of the chain.
pub fn score_serial7(responses: &[i64]) -> Serial7Score {
    let head = &responses[..responses.len().min(SERIAL7_ITEMS)];
    let count_correct = head
        .iter()
        .enumerate()
        .filter(|(i, r)| match i {
            0 => **r == 93,
            _ => **r == head[i - 1] - 7,
        })
        .count() as u32;
    let score = match count_correct {
        4..=5 => 3,
        2..=3 => 2,
        1 => 1,
        _ => 0,
    };
    Serial7Score { count_correct, score }
}

pub const ANIMAL_FLUENCY_THRESHOLD: u32 = 11;

pub fn score_animal_fluency(n_animals: u32, threshold: u32) -> u32 {
    u32::from(n_animals >= threshold)
}

pub fn score_digit_span(forward_ok: bool, backward_ok: bool) -> u32 {
    u32::from(forward_ok) + u32::from(backward_ok)
}

pub fn score_per_item(flags: &[bool]) -> u32 {
    flags.iter().filter(|f| **f).count() as u32
}

/// Task-specific breakdown kept alongside a [`TaskScore`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreDetail {
    Flags { flags: Vec<bool> },
    Count { count: u32 },
    Recall(HklltParseResult),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task: TaskId,
    pub value: u32,
    pub max: u32,
    pub detail: ScoreDetail,
}

impl TaskScore {
    pub fn new(task: TaskId, value: u32, detail: ScoreDetail) -> Result<Self, ToolError> {
        let max = task.max_points();
        if value > max {
            return Err(ToolError::InvalidArgument(format!("{task} score {value} exceeds maximum {max}")));
        }
        Ok(TaskScore { task, value, max, detail })
    }
}

/// Sum of the six MoCA-SL task scores. Each MoCA-SL task must appear
/// exactly once.
pub fn aggregate_moca_sl(scores: &[TaskScore]) -> Result<u32, ToolError> {
    let mut seen = HashSet::new();
    for s in scores {
        if !s.task.is_moca_sl() {
            return Err(ToolError::InvalidArgument(format!("{} is not a MoCA-SL task", s.task)));
        }
        if !seen.insert(s.task) {
            return Err(ToolError::InvalidArgument(format!("duplicate score for {}", s.task)));
        }
        if s.value > s.task.max_points() {
            return Err(ToolError::InvalidArgument(format!("{} score out of range", s.task)));
        }
    }
    if seen.len() != TaskId::MOCA_SL.len() {
        return Err(ToolError::InvalidArgument(format!(
            "expected {} MoCA-SL scores, got {}",
            TaskId::MOCA_SL.len(),
            seen.len()
        )));
    }
    Ok(scores.iter().map(|s| s.value).sum())
}

/// Recognition discrimination, `(hits - false_alarms) / 16 * 100`.
pub fn recognition_discrimination(hits: u32, false_alarms: u32) -> Result<f64, ToolError> {
    if hits > 16 || false_alarms > 16 {
        return Err(ToolError::InvalidArgument("hits and false alarms must be in 0..=16".into()));
    }
    Ok((f64::from(hits) - f64::from(false_alarms)) / 16.0 * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        text::tokens(s)
    }

    #[test]
    fn keyword_check_examples() {
        let r = keyword_check(&[7, 4, 2], &[7, 4, 2], MatchMode::ExactSequence).unwrap();
        assert!(r.matched);

        let targets = toks("Xishi forty-four");
        let cand = toks("Xishi forty-four years old");
        assert!(keyword_check(&targets, &cand, MatchMode::AllPresent).unwrap().matched);

        let r = keyword_check(&[2, 1, 8, 5, 4], &[2, 1, 8, 5], MatchMode::ExactSequence).unwrap();
        assert!(!r.matched);
        assert_eq!(r.per_target, vec![true, true, true, true, false]);
    }

    #[test]
    fn keyword_check_rejects_empty_targets() {
        let empty: [i32; 0] = [];
        assert!(matches!(keyword_check(&empty, &[1], MatchMode::AllPresent), Err(ToolError::InvalidArgument(_))));
    }

    #[test]
    fn keyword_check_text_normalizes() {
        let r = keyword_check_text(&["Forty-Four"], &["ＦＯＲＴＹ－four,"], MatchMode::ExactSequence).unwrap();
        assert!(r.matched);
    }

    #[test]
    fn ordered_subsequence_skips_unplaceable_targets() {
        let r = keyword_check(&[2, 1, 8, 5, 4], &[2, 8, 5, 4], MatchMode::OrderedSubsequence).unwrap();
        assert!(!r.matched);
        assert_eq!(r.per_target, vec![true, false, true, true, true]);
    }

    #[test]
    fn list_length_counts_without_dedup() {
        assert_eq!(list_length::<String>(&[]), 0);
        assert_eq!(list_length(&["a", "a", "b"]), 3);
        let animals =
            ["Rat", "Cow", "Cat", "Dog", "Sheep", "Camel", "Moth", "Giraffe", "Elephant", "Horse", "Goat", "Turtle"];
        assert_eq!(list_length(&animals), 12);
    }

    #[test]
    fn dedupe_exact_examples() {
        assert_eq!(dedupe_exact(&["dog", "tiger", "dog"]), vec!["dog", "tiger"]);
        assert_eq!(dedupe_exact::<&str>(&[]), Vec::<String>::new());
        assert_eq!(dedupe_exact(&["a", "b", "c"]), vec!["a", "b", "c"]);
    }

    #[test]
    fn target_list_validation() {
        assert!(TargetList::new([("a", "x")]).is_err());
        let mut entries: Vec<(String, String)> = (0..16).map(|i| (format!("w{i}"), format!("c{}", i / 4))).collect();
        assert!(TargetList::new(entries.clone()).is_ok());
        entries[0].1 = "c1".into();
        assert!(TargetList::new(entries.clone()).is_err());
        entries[0].1 = "c0".into();
        entries[1].0 = "w0".into();
        assert!(TargetList::new(entries).is_err());
    }

    #[test]
    fn target_list_serde_round_trip() {
        let list = TargetList::synthetic();
        let json = serde_json::to_string(&list).unwrap();
        let back: TargetList = serde_json::from_str(&json).unwrap();
        assert_eq!(back.category_of("Bus"), Some("transport"));
        assert_eq!(back.words().len(), 16);
    }

    #[test]
    fn parse_hkllt_examples() {
        let list = TargetList::synthetic();
        let empty: [&str; 0] = [];
        assert_eq!(parse_hkllt(&empty, &list), HklltParseResult { n_recall: 0, n_clustering: 0, intrusions: 0 });
        let r = parse_hkllt(&["carrot", "cabbage", "bus", "ferry"], &list);
        assert_eq!(r, HklltParseResult { n_recall: 4, n_clustering: 2, intrusions: 0 });
        let r = parse_hkllt(&["carrot", "bus", "carrot", "unicorn"], &list);
        assert_eq!(r, HklltParseResult { n_recall: 2, n_clustering: 0, intrusions: 1 });
    }

    #[test]
    fn parse_hkllt_matches_case_insensitively() {
        let list = TargetList::synthetic();
        let r = parse_hkllt(&["Carrot", "CABBAGE,"], &list);
        assert_eq!(r.n_recall, 2);
        assert_eq!(r.n_clustering, 1);
    }

    #[test]
    fn serial7_examples() {
        assert_eq!(score_serial7(&[93, 86, 79, 72, 65]), Serial7Score { count_correct: 5, score: 3 });
        assert_eq!(score_serial7(&[93, 84]), Serial7Score { count_correct: 1, score: 1 });
        assert_eq!(score_serial7(&[]), Serial7Score { count_correct: 0, score: 0 });
        // A slip is charged once; the next answer is judged from the slip.
        assert_eq!(score_serial7(&[93, 85, 78, 71, 64]), Serial7Score { count_correct: 4, score: 3 });
        // Only five responses are scored.
        assert_eq!(score_serial7(&[93, 86, 79, 72, 65, 58]).count_correct, 5);
    }

    #[test]
    fn small_scorers() {
        assert_eq!(score_animal_fluency(14, ANIMAL_FLUENCY_THRESHOLD), 1);
        assert_eq!(score_animal_fluency(24, ANIMAL_FLUENCY_THRESHOLD), 1);
        assert_eq!(score_animal_fluency(10, ANIMAL_FLUENCY_THRESHOLD), 0);
        assert_eq!(score_digit_span(true, true), 2);
        assert_eq!(score_digit_span(true, false), 1);
        assert_eq!(score_digit_span(false, false), 0);
        assert_eq!(score_per_item(&[true, true, true]), 3);
        assert_eq!(score_per_item(&[true, false]), 1);
        assert_eq!(score_per_item(&[]), 0);
    }

    fn score(task: TaskId, value: u32) -> TaskScore {
        TaskScore::new(task, value, ScoreDetail::Count { count: value }).unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let fig7 = [
            score(TaskId::PictureNaming, 3),
            score(TaskId::DigitSpan, 1),
            score(TaskId::Serial7, 2),
            score(TaskId::SentenceRep, 2),
            score(TaskId::AnimalFluency, 1),
            score(TaskId::Abstraction, 1),
        ];
        assert_eq!(aggregate_moca_sl(&fig7).unwrap(), 10);
        let max: Vec<_> = TaskId::MOCA_SL.iter().map(|t| score(*t, t.max_points())).collect();
        assert_eq!(aggregate_moca_sl(&max).unwrap(), 13);
        let zero: Vec<_> = TaskId::MOCA_SL.iter().map(|t| score(*t, 0)).collect();
        assert_eq!(aggregate_moca_sl(&zero).unwrap(), 0);
        assert!(aggregate_moca_sl(&fig7[..5]).is_err());
        let mut dup = fig7.to_vec();
        dup[5] = score(TaskId::PictureNaming, 1);
        assert!(aggregate_moca_sl(&dup).is_err());
    }

    #[test]
    fn task_score_bounds() {
        assert!(TaskScore::new(TaskId::AnimalFluency, 2, ScoreDetail::Count { count: 2 }).is_err());
        assert!(TaskScore::new(TaskId::HklltTrial4, 16, ScoreDetail::Count { count: 16 }).is_ok());
    }

    #[test]
    fn recognition_discrimination_examples() {
        assert_eq!(recognition_discrimination(16, 0).unwrap(), 100.0);
        assert_eq!(recognition_discrimination(12, 4).unwrap(), 50.0);
        assert_eq!(recognition_discrimination(0, 16).unwrap(), -100.0);
        assert!(recognition_discrimination(17, 0).is_err());
    }
}
