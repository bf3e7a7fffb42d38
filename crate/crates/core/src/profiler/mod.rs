//! Four-domain cognitive profile: impairment bands, domain statuses with
//! evidence, a heuristic risk level, and the narrative report.
//!
//! The risk level is a non-clinical heuristic. Statuses are always decided
//! here; an analyst model only narrates them.

mod report;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::inference::Trigger;
use crate::primitives::{SessionPrimitives, TaskPrimitives};
use crate::task::{Gender, TaskId};

pub use report::{
    build_analyst_prompt, case_block, generate_report, parse_narrative, render_report, Analyst, CognitiveProfile,
    ParsedNarrative, ReportMode, KNOWLEDGE_DOC, REPORT_TITLE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpairmentBand {
    Normal,
    Mild,
    Moderate,
    Severe,
}

/// Normal above -1.0; each threshold belongs to the more severe band.
pub fn band_z(z: f64) -> ImpairmentBand {
    if z > -1.0 {
        ImpairmentBand::Normal
    } else if z > -1.5 {
        ImpairmentBand::Mild
    } else if z > -2.0 {
        ImpairmentBand::Moderate
    } else {
        ImpairmentBand::Severe
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Memory,
    Executive,
    AttentionWorkingMemory,
    Language,
}

impl Domain {
    pub const ALL: [Domain; 4] = [Domain::Memory, Domain::Executive, Domain::AttentionWorkingMemory, Domain::Language];

    pub fn title(self) -> &'static str {
        match self {
            Domain::Memory => "Memory Function",
            Domain::Executive => "Executive Function",
            Domain::AttentionWorkingMemory => "Attention & Working Memory",
            Domain::Language => "Language Function",
        }
    }

    fn phrase(self) -> &'static str {
        match self {
            Domain::Memory => "memory",
            Domain::Executive => "executive function",
            Domain::AttentionWorkingMemory => "attention and working memory",
            Domain::Language => "language function",
        }
    }
}

/// Memory uses the four z bands; the other domains use normal, mild or
/// impaired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainStatus {
    NotAssessed,
    Normal,
    Mild,
    Moderate,
    Severe,
    Impaired,
}

impl DomainStatus {
    /// 0 for normal or unassessed, higher is worse.
    pub fn severity(self) -> u8 {
        match self {
            DomainStatus::NotAssessed | DomainStatus::Normal => 0,
            DomainStatus::Mild => 1,
            DomainStatus::Moderate | DomainStatus::Impaired => 2,
            DomainStatus::Severe => 3,
        }
    }

    pub fn is_impaired(self) -> bool {
        self.severity() > 0
    }

    pub fn label(self) -> &'static str {
        match self {
            DomainStatus::NotAssessed => "Not assessed",
            DomainStatus::Normal => "Normal",
            DomainStatus::Mild => "Mild impairment",
            DomainStatus::Moderate => "Moderate impairment",
            DomainStatus::Severe => "Severe impairment",
            DomainStatus::Impaired => "Impaired",
        }
    }
}

impl From<ImpairmentBand> for DomainStatus {
    fn from(b: ImpairmentBand) -> Self {
        match b {
            ImpairmentBand::Normal => DomainStatus::Normal,
            ImpairmentBand::Mild => DomainStatus::Mild,
            ImpairmentBand::Moderate => DomainStatus::Moderate,
            ImpairmentBand::Severe => DomainStatus::Severe,
        }
    }
}

impl fmt::Display for DomainStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RiskLevel {
    Low,
    Moderate,
    High,
    VeryHigh,
}

impl fmt::Display for RiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskLevel::Low => "LOW",
            RiskLevel::Moderate => "MODERATE",
            RiskLevel::High => "HIGH",
            RiskLevel::VeryHigh => "VERY_HIGH",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub status: DomainStatus,
    pub evidence: Vec<String>,
    pub interpretation: String,
}

/// Everything the profiler reads for one participant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CaseData {
    pub age: f64,
    pub edu_year: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    pub z4: Option<f64>,
    pub z5: Option<f64>,
    pub primitives: SessionPrimitives,
}

/// Two-decimal rendering without trailing zeros ("-0.71", "-1.7").
pub fn fmt_z(z: f64) -> String {
    let r = (z * 100.0).round() / 100.0;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn plural(n: u32, one: &str, many: &str) -> String {
    format!("{n} {}", if n == 1 { one } else { many })
}

fn recall_evidence(
    label: &str,
    delay: &str,
    z: Option<f64>,
    p: Option<crate::toolbox::HklltParseResult>,
) -> Option<String> {
    if z.is_none() && p.is_none() {
        return None;
    }
    let mut s = format!("{label} ({delay} delayed recall):");
    if let Some(z) = z {
        s.push_str(&format!(" z-score {}", fmt_z(z)));
        if p.is_some() {
            s.push(',');
        }
    }
    if let Some(p) = p {
        s.push_str(&format!(
            " recalled {}, {}",
            plural(p.n_recall, "word", "words"),
            plural(p.n_clustering, "semantic cluster", "semantic clusters")
        ));
    }
    Some(s)
}

fn memory(case: &CaseData) -> DomainEntry {
    let p = &case.primitives;
    let status = [case.z4, case.z5]
        .into_iter()
        .flatten()
        .map(band_z)
        .max()
        .map_or(DomainStatus::NotAssessed, DomainStatus::from);
    let evidence = [
        recall_evidence("HKLLT-4", "10-minute", case.z4, p.recall(TaskId::HklltTrial4)),
        recall_evidence("HKLLT-5", "30-minute", case.z5, p.recall(TaskId::HklltTrial5)),
    ]
    .into_iter()
    .flatten()
    .collect();
    let interpretation = match status {
        DomainStatus::NotAssessed => "Delayed recall z-scores are unavailable, so memory could not be rated.".to_string(),
        DomainStatus::Normal => "Delayed recall is within the normal range (z-score above -1.0).".to_string(),
        s => format!(
            "Delayed recall falls in the {} range; reduced recall points to weaker consolidation and retention of episodic memory.",
            s.label().to_lowercase()
        ),
    };
    DomainEntry { status, evidence, interpretation }
}

fn executive(p: &SessionPrimitives) -> DomainEntry {
    let mut evidence = Vec::new();
    let mut signals = 0;
    let mut assessed = false;
    if let Some(TaskPrimitives::AnimalFluency { n_animals, score }) = p.get(TaskId::AnimalFluency) {
        assessed = true;
        evidence.push(format!(
            "Animal naming: {} within 1 minute ({} criterion of >=11)",
            plural(*n_animals, "animal", "animals"),
            if *score == 1 { "met" } else { "below" }
        ));
        signals += u8::from(*score == 0);
    }
    if let Some(TaskPrimitives::Abstraction { q1, q2 }) = p.get(TaskId::Abstraction) {
        assessed = true;
        let word = |b: bool| if b { "correct" } else { "incorrect" };
        evidence.push(format!("Abstraction: Q1 {}, Q2 {}", word(*q1), word(*q2)));
        signals += u8::from(!q1 && !q2);
    }
    let status = match (assessed, signals) {
        (false, _) => DomainStatus::NotAssessed,
        (true, 0) => DomainStatus::Normal,
        (true, 1) => DomainStatus::Mild,
        _ => DomainStatus::Impaired,
    };
    let interpretation = match status {
        DomainStatus::NotAssessed => "No executive tasks were available.",
        DomainStatus::Normal => "Semantic fluency and conceptual reasoning are preserved.",
        DomainStatus::Mild => {
            "One executive signal is abnormal, suggesting mild weakness in fluency or conceptual reasoning."
        }
        _ => "Both semantic fluency and conceptual reasoning are abnormal.",
    };
    DomainEntry { status, evidence, interpretation: interpretation.into() }
}

/// Rating shared by attention and language: impaired when a sub-measure
/// is at zero (or the attention-specific floor), mild when any sub-measure
/// is below its maximum.
fn two_measure_status(assessed: bool, floor_hit: bool, dropped: bool) -> DomainStatus {
    if !assessed {
        DomainStatus::NotAssessed
    } else if floor_hit {
        DomainStatus::Impaired
    } else if dropped {
        DomainStatus::Mild
    } else {
        DomainStatus::Normal
    }
}

fn attention(p: &SessionPrimitives) -> DomainEntry {
    let mut evidence = Vec::new();
    let (mut assessed, mut floor, mut dropped) = (false, false, false);
    if let Some(TaskPrimitives::Serial7 { count_correct, score }) = p.get(TaskId::Serial7) {
        assessed = true;
        evidence.push(format!("Serial 7s: {score}/3 points ({count_correct}/5 correct)"));
        floor |= *score <= 1;
        dropped |= *score < 3;
    }
    if let Some(TaskPrimitives::DigitSpan { forward, backward }) = p.get(TaskId::DigitSpan) {
        assessed = true;
        let word = |b: bool| if b { "passed" } else { "failed" };
        let total = u32::from(*forward) + u32::from(*backward);
        evidence.push(format!("Digit span: forward {}, backward {}, total {total}/2", word(*forward), word(*backward)));
        floor |= total == 0;
        dropped |= total < 2;
    }
    let status = two_measure_status(assessed, floor, dropped);
    let interpretation = match status {
        DomainStatus::NotAssessed => "No attention tasks were available.",
        DomainStatus::Normal => "Sustained attention and working memory capacity are preserved.",
        DomainStatus::Mild => "A partial drop on serial subtraction or digit span suggests mild attention or working memory weakness.",
        _ => "Serial subtraction or digit span performance is at floor, indicating impaired attention and working memory.",
    };
    DomainEntry { status, evidence, interpretation: interpretation.into() }
}

fn language(p: &SessionPrimitives) -> DomainEntry {
    let mut evidence = Vec::new();
    let (mut assessed, mut floor, mut dropped) = (false, false, false);
    if let Some(naming) = p.value(TaskId::PictureNaming) {
        assessed = true;
        evidence.push(format!("Naming: {naming}/3 points"));
        floor |= naming == 0;
        dropped |= naming < 3;
    }
    if let Some(sentences) = p.value(TaskId::SentenceRep) {
        assessed = true;
        evidence.push(format!("Sentence repetition: {sentences}/2 points"));
        floor |= sentences == 0;
        dropped |= sentences < 2;
    }
    let status = two_measure_status(assessed, floor, dropped);
    let interpretation = match status {
        DomainStatus::NotAssessed => "No language tasks were available.",
        DomainStatus::Normal => "Visual naming and verbal repetition are preserved.",
        DomainStatus::Mild => "A partial drop on naming or repetition suggests mild language weakness.",
        _ => "Naming or repetition is at floor, indicating impaired language function.",
    };
    DomainEntry { status, evidence, interpretation: interpretation.into() }
}

pub fn derive_domain_statuses(case: &CaseData) -> BTreeMap<Domain, DomainEntry> {
    BTreeMap::from([
        (Domain::Memory, memory(case)),
        (Domain::Executive, executive(&case.primitives)),
        (Domain::AttentionWorkingMemory, attention(&case.primitives)),
        (Domain::Language, language(&case.primitives)),
    ])
}

/// Heuristic risk table, monotone in every domain's severity.
pub fn risk_level(statuses: &BTreeMap<Domain, DomainStatus>, triggers: &[Trigger]) -> RiskLevel {
    let memory = statuses.get(&Domain::Memory).copied().unwrap_or(DomainStatus::NotAssessed);
    let others = statuses.iter().filter(|(d, s)| **d != Domain::Memory && s.is_impaired()).count();
    let impaired = others + usize::from(memory.is_impaired());
    if memory == DomainStatus::Severe && others >= 2 {
        RiskLevel::VeryHigh
    } else if memory.severity() >= 2 || impaired >= 2 || !triggers.is_empty() {
        RiskLevel::High
    } else if impaired == 1 {
        RiskLevel::Moderate
    } else {
        RiskLevel::Low
    }
}

pub fn statuses(domains: &BTreeMap<Domain, DomainEntry>) -> BTreeMap<Domain, DomainStatus> {
    domains.iter().map(|(d, e)| (*d, e.status)).collect()
}

fn summary_sentence(domains: &BTreeMap<Domain, DomainEntry>, risk: RiskLevel) -> String {
    let mut impaired = Vec::new();
    let mut normal = Vec::new();
    let mut missing = Vec::new();
    for (d, e) in domains {
        match e.status {
            DomainStatus::NotAssessed => missing.push(d.phrase()),
            DomainStatus::Normal => normal.push(d.phrase()),
            DomainStatus::Impaired => impaired.push(format!("impaired {}", d.phrase())),
            s => impaired.push(format!("{} in {}", s.label().to_lowercase(), d.phrase())),
        }
    }
    let mut s =
        String::from("Integrating performance across cognitive domains, the subject's overall cognitive function ");
    if impaired.is_empty() {
        s.push_str("presents a normal pattern");
    } else {
        s.push_str(&format!("shows {}", impaired.join(", ")));
        if !normal.is_empty() {
            s.push_str(&format!(", while {} remain normal", normal.join(" and ")));
        }
    }
    if !missing.is_empty() {
        s.push_str(&format!("; {} could not be assessed", missing.join(" and ")));
    }
    s.push_str(&format!(
        ". Combined with {risk} risk level, {}",
        match risk {
            RiskLevel::Low => "no further action is indicated beyond routine follow-up.",
            RiskLevel::Moderate => "monitoring and repeat assessment are advisable.",
            RiskLevel::High | RiskLevel::VeryHigh => "further clinical evaluation is recommended.",
        }
    ));
    s.push_str(" This risk level is a screening heuristic, not a diagnosis.");
    s
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::toolbox::HklltParseResult;

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn fixture(
        z: (f64, f64),
        recall: ((u32, u32), (u32, u32)),
        animals: u32,
        serial: (u32, u32),
        digits: (bool, bool),
        naming: u32,
        sentences: u32,
        abstraction: (bool, bool),
    ) -> CaseData {
        let mut p = SessionPrimitives::default();
        let rec = |(n, c): (u32, u32)| {
            TaskPrimitives::HklltRecall(HklltParseResult { n_recall: n, n_clustering: c, intrusions: 0 })
        };
        p.insert(TaskId::HklltTrial4, rec(recall.0));
        p.insert(TaskId::HklltTrial5, rec(recall.1));
        p.insert(
            TaskId::AnimalFluency,
            TaskPrimitives::AnimalFluency { n_animals: animals, score: u32::from(animals >= 11) },
        );
        p.insert(TaskId::Serial7, TaskPrimitives::Serial7 { count_correct: serial.1, score: serial.0 });
        p.insert(TaskId::DigitSpan, TaskPrimitives::DigitSpan { forward: digits.0, backward: digits.1 });
        p.insert(TaskId::PictureNaming, TaskPrimitives::PictureNaming { flags: (0..3).map(|i| i < naming).collect() });
        p.insert(TaskId::SentenceRep, TaskPrimitives::SentenceRep { flags: (0..2).map(|i| i < sentences).collect() });
        p.insert(TaskId::Abstraction, TaskPrimitives::Abstraction { q1: abstraction.0, q2: abstraction.1 });
        CaseData { age: 75.0, edu_year: 6.0, gender: Some(Gender::Male), z4: Some(z.0), z5: Some(z.1), primitives: p }
    }

    pub(crate) fn declining_case() -> CaseData {
        fixture((-1.65, -1.7), ((2, 1), (1, 0)), 16, (3, 4), (true, true), 1, 2, (false, false))
    }

    pub(crate) fn normal_case() -> CaseData {
        fixture((-0.18, 0.08), ((7, 2), (7, 4)), 24, (3, 5), (true, true), 3, 2, (true, false))
    }

    #[test]
    fn bands_at_thresholds() {
        assert_eq!(band_z(-0.18), ImpairmentBand::Normal);
        assert_eq!(band_z(-1.0), ImpairmentBand::Mild);
        assert_eq!(band_z(-1.5), ImpairmentBand::Moderate);
        assert_eq!(band_z(-1.65), ImpairmentBand::Moderate);
        assert_eq!(band_z(-2.0), ImpairmentBand::Severe);
        assert_eq!(band_z(-0.999), ImpairmentBand::Normal);
    }

    #[test]
    fn declining_case_statuses() {
        let d = derive_domain_statuses(&declining_case());
        assert_eq!(d[&Domain::Memory].status, DomainStatus::Moderate);
        assert_eq!(d[&Domain::Executive].status, DomainStatus::Mild);
        assert_eq!(d[&Domain::AttentionWorkingMemory].status, DomainStatus::Normal);
        assert_eq!(d[&Domain::Language].status, DomainStatus::Mild);
        assert_eq!(risk_level(&statuses(&d), &[]), RiskLevel::High);
        assert!(d[&Domain::Memory].evidence[0].contains("z-score -1.65, recalled 2 words, 1 semantic cluster"));
    }

    #[test]
    fn normal_case_statuses() {
        let d = derive_domain_statuses(&normal_case());
        assert!(d.values().all(|e| e.status == DomainStatus::Normal));
        assert_eq!(risk_level(&statuses(&d), &[]), RiskLevel::Low);
        assert_eq!(risk_level(&statuses(&d), &[Trigger::Hkllt5]), RiskLevel::High);
    }

    #[test]
    fn risk_table() {
        use DomainStatus::*;
        let s = |m, e, a, l| {
            BTreeMap::from([
                (Domain::Memory, m),
                (Domain::Executive, e),
                (Domain::AttentionWorkingMemory, a),
                (Domain::Language, l),
            ])
        };
        assert_eq!(risk_level(&s(Severe, Impaired, Normal, Impaired), &[]), RiskLevel::VeryHigh);
        assert_eq!(risk_level(&s(Severe, Normal, Normal, Normal), &[]), RiskLevel::High);
        assert_eq!(risk_level(&s(Normal, Mild, Normal, Normal), &[]), RiskLevel::Moderate);
        assert_eq!(risk_level(&s(Mild, Normal, Normal, Normal), &[]), RiskLevel::Moderate);
        assert_eq!(risk_level(&s(Normal, Mild, Mild, Normal), &[]), RiskLevel::High);
        assert_eq!(risk_level(&s(NotAssessed, NotAssessed, NotAssessed, NotAssessed), &[]), RiskLevel::Low);
    }

    #[test]
    fn empty_session_is_not_assessed() {
        let d = derive_domain_statuses(&CaseData::default());
        assert!(d.values().all(|e| e.status == DomainStatus::NotAssessed && e.evidence.is_empty()));
    }

    #[test]
    fn z_formatting() {
        assert_eq!(fmt_z(-0.71), "-0.71");
        assert_eq!(fmt_z(-1.7), "-1.7");
        assert_eq!(fmt_z(-0.7099999), "-0.71");
        assert_eq!(fmt_z(-0.001), "0");
    }
}
