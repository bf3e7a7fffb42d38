use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    derive_domain_statuses, fmt_z, risk_level, statuses, summary_sentence, CaseData, Domain, DomainEntry, RiskLevel,
};
use crate::gateway::{ChatBackend, ChatRequest, GatewayError, Message, Sampling};
use crate::inference::Trigger;
use crate::primitives::TaskPrimitives;
use crate::task::TaskId;

pub const KNOWLEDGE_DOC: &str = include_str!("../../templates/knowledge.md");
pub const REPORT_TITLE: &str = "[Cognitive Profile Report]";

const OUTPUT_REQUIREMENTS: &str = "\
# Output Requirements
Please write a detailed cognitive profile report for the subject in natural language narrative form. The report should include assessments of the following four cognitive domains, each containing: status judgment, supporting evidence, and clinical interpretation.

Report Format Example:

[Cognitive Profile Report]

1. Memory Function
Status: [Normal/Mild impairment/Moderate impairment/Severe impairment]
Evidence: For example, the subject obtained a z-score of X in HKLLT-4 (10-minute delayed recall), recalled Y words, with Z semantic clusters; obtained a z-score of X in HKLLT-5 (30-minute delayed recall), recalled Y words.
Interpretation: [Based on z-score thresholds and performance patterns, explain the degree of memory impairment and clinical significance...]

2. Executive Function
Status: [Normal/Impaired]
Evidence: In animal naming test, the subject named X animals within 1 minute (criterion: >=11 for normal); in abstraction test, Q1 answered [correctly/incorrectly], Q2 answered [correctly/incorrectly].
Interpretation: [Explain semantic fluency and conceptual reasoning performance]

3. Attention & Working Memory
Status: [Normal/Impaired]
Evidence: In Serial 7s, scored X/3 points (Y/5 correct); in digit span test, forward [passed/failed], backward [passed/failed], total score X/2.
Interpretation: [Explain sustained attention and working memory capacity performance]

4. Language Function
Status: [Normal/Impaired]
Evidence: Scored X/3 in naming test; scored X/2 in sentence repetition test.
Interpretation: [Explain visual naming and verbal repetition abilities]

Overall Summary:
Integrating performance across all cognitive domains, the subject's overall cognitive function presents [describe overall pattern]...Combined with risk level [LOW/MODERATE/HIGH/VERY_HIGH], [provide overall clinical impression].";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportMode {
    Llm,
    #[default]
    Template,
}

/// Model access for narrative generation.
#[derive(Clone, Copy)]
pub struct Analyst<'a> {
    pub backend: &'a dyn ChatBackend,
    pub knowledge_doc: &'a str,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CognitiveProfile {
    pub domains: BTreeMap<Domain, DomainEntry>,
    pub risk_level: RiskLevel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triggers: Vec<Trigger>,
    pub narrative: String,
    pub mode: ReportMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn whole_or_decimal(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

fn recall_line(label: &str, z: Option<f64>, case: &CaseData, task: TaskId) -> String {
    let z = z.map_or_else(|| "missing".to_string(), fmt_z);
    match case.primitives.recall(task) {
        Some(r) => format!(
            "- {label} z-score: {z} (recalled {} {}, {} semantic {})",
            r.n_recall,
            if r.n_recall == 1 { "word" } else { "words" },
            r.n_clustering,
            if r.n_clustering == 1 { "cluster" } else { "clusters" }
        ),
        None => format!("- {label} z-score: {z} (recall missing)"),
    }
}

/// The user-turn case description handed to the analyst.
pub fn case_block(case: &CaseData) -> String {
    let p = &case.primitives;
    let pf = |b: bool| if b { "pass" } else { "fail" };
    let missing = || "missing".to_string();
    let animals = match p.get(TaskId::AnimalFluency) {
        Some(TaskPrimitives::AnimalFluency { n_animals, score }) => {
            format!("{n_animals} ({} criterion)", if *score == 1 { "passed" } else { "failed" })
        }
        _ => missing(),
    };
    let serial = match p.get(TaskId::Serial7) {
        Some(TaskPrimitives::Serial7 { count_correct, score }) => {
            format!("{score}/3 points ({count_correct}/5 correct)")
        }
        _ => missing(),
    };
    let digits = match p.get(TaskId::DigitSpan) {
        Some(TaskPrimitives::DigitSpan { forward, backward }) => format!(
            "{}/2 points (forward {}, backward {})",
            u32::from(*forward) + u32::from(*backward),
            pf(*forward),
            pf(*backward)
        ),
        _ => missing(),
    };
    let naming = p.value(TaskId::PictureNaming).map_or_else(missing, |v| format!("{v}/3 points"));
    let sentences = p.value(TaskId::SentenceRep).map_or_else(missing, |v| format!("{v}/2 points"));
    let abstraction = match p.get(TaskId::Abstraction) {
        Some(TaskPrimitives::Abstraction { q1, q2 }) => format!("Q1 {}, Q2 {}", pf(*q1), pf(*q2)),
        _ => missing(),
    };
    let gender = case.gender.map_or_else(|| "Not recorded".to_string(), |g| g.to_string());
    format!(
        "# Current Case\n\n## Basic Information\n- Age: {} years\n- Gender: {gender}\n- Education: {:.1} years\n\n\
         ## Assessment Results\n\n### HKLLT Metrics\n{}\n{}\n\n### MoCA Cognitive Sub-items\n\
         - Animal naming: {animals}\n- Serial 7s: {serial}\n- Digit span: {digits}\n- Naming test: {naming}\n\
         - Sentence repetition: {sentences}\n- Abstraction: {abstraction}\n",
        whole_or_decimal(case.age),
        case.edu_year,
        recall_line("HKLLT-4", case.z4, case, TaskId::HklltTrial4),
        recall_line("HKLLT-5", case.z5, case, TaskId::HklltTrial5),
    )
}

pub fn build_analyst_prompt(
    case: &CaseData,
    knowledge_doc: &str,
    sampling: Sampling,
) -> Result<ChatRequest, GatewayError> {
    let system =
        format!("# Meta Analyst\n\n# Clinical Protocol Context:\n{}\n\n{OUTPUT_REQUIREMENTS}\n", knowledge_doc.trim());
    ChatRequest::new(vec![Message::system(system), Message::user(case_block(case))], sampling)
}

/// Sections recovered from an analyst narrative.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedNarrative {
    pub statuses: BTreeMap<Domain, String>,
    pub interpretations: BTreeMap<Domain, String>,
    pub summary: String,
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    None,
    Status,
    Evidence,
    Interpretation,
    Summary,
}

fn section_header(line: &str) -> Option<Domain> {
    let (num, rest) = line.split_once('.')?;
    let domain = match num.trim() {
        "1" => Domain::Memory,
        "2" => Domain::Executive,
        "3" => Domain::AttentionWorkingMemory,
        "4" => Domain::Language,
        _ => return None,
    };
    let key = match domain {
        Domain::Memory => "memory",
        Domain::Executive => "executive",
        Domain::AttentionWorkingMemory => "attention",
        Domain::Language => "language",
    };
    rest.to_lowercase().contains(key).then_some(domain)
}

fn strip_markup(line: &str) -> &str {
    line.trim().trim_start_matches('#').trim().trim_matches('*').trim()
}

/// Pull the four domain sections and the summary out of a narrative.
/// Returns `None` unless every domain has an interpretation and the
/// summary is non-empty.
pub fn parse_narrative(text: &str) -> Option<ParsedNarrative> {
    let mut out = ParsedNarrative::default();
    let mut domain: Option<Domain> = None;
    let mut field = Field::None;
    for raw in text.lines() {
        let line = strip_markup(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(d) = section_header(line) {
            domain = Some(d);
            field = Field::None;
            continue;
        }
        let lower = line.to_lowercase();
        if lower.starts_with("overall summary") || lower.starts_with("comprehensive summary") {
            domain = None;
            field = Field::Summary;
            let rest = line.split_once(':').map_or("", |(_, r)| r.trim().trim_start_matches('*').trim());
            out.summary.push_str(rest);
            continue;
        }
        if lower.starts_with("risk level") {
            // The risk level is always derived, never taken from the analyst.
            domain = None;
            field = Field::None;
            continue;
        }
        let labeled =
            [("status:", Field::Status), ("evidence:", Field::Evidence), ("interpretation:", Field::Interpretation)]
                .into_iter()
                .find(|(p, _)| lower.starts_with(p));
        let (value, next) = match labeled {
            Some((p, f)) => (line[p.len()..].trim().trim_start_matches('*').trim(), f),
            None => (line, field),
        };
        field = next;
        let target = match (field, domain) {
            (Field::Summary, _) => &mut out.summary,
            (Field::Status, Some(d)) => out.statuses.entry(d).or_default(),
            (Field::Interpretation, Some(d)) => out.interpretations.entry(d).or_default(),
            _ => continue,
        };
        if !target.is_empty() && !value.is_empty() {
            target.push(' ');
        }
        target.push_str(value);
    }
    let complete = Domain::ALL.iter().all(|d| out.interpretations.get(d).is_some_and(|s| !s.is_empty()));
    (complete && !out.summary.trim().is_empty()).then_some(out)
}

fn template_profile(case: &CaseData, triggers: &[Trigger]) -> CognitiveProfile {
    let domains = derive_domain_statuses(case);
    let risk = risk_level(&statuses(&domains), triggers);
    CognitiveProfile {
        narrative: summary_sentence(&domains, risk),
        domains,
        risk_level: risk,
        triggers: triggers.to_vec(),
        mode: ReportMode::Template,
        warnings: Vec::new(),
    }
}

/// Statuses and evidence always come from [`derive_domain_statuses`]; in
/// LLM mode the analyst supplies only interpretations and the summary.
/// Any analyst failure falls back to the template with a warning.
pub fn generate_report(
    case: &CaseData,
    triggers: &[Trigger],
    mode: ReportMode,
    analyst: Option<&Analyst<'_>>,
) -> CognitiveProfile {
    let mut profile = template_profile(case, triggers);
    if mode == ReportMode::Template {
        return profile;
    }
    let Some(analyst) = analyst else {
        profile.warnings.push("llm report requested without an analyst backend; used template".into());
        return profile;
    };
    let reply = build_analyst_prompt(case, analyst.knowledge_doc, analyst.sampling)
        .and_then(|req| analyst.backend.complete(&req));
    let text = match reply {
        Ok(t) => t,
        Err(e) => {
            profile.warnings.push(format!("analyst call failed ({e}); used template"));
            return profile;
        }
    };
    let Some(parsed) = parse_narrative(&text) else {
        profile.warnings.push("analyst narrative could not be parsed; used template".into());
        return profile;
    };
    for (d, entry) in profile.domains.iter_mut() {
        if let Some(claimed) = parsed.statuses.get(d) {
            let ours = entry.status.label().to_lowercase();
            let first = ours.split_whitespace().next().unwrap_or_default();
            if !claimed.to_lowercase().starts_with(first) {
                profile.warnings.push(format!(
                    "analyst status for {} (\"{claimed}\") differs from derived status \"{}\"; kept derived",
                    d.title(),
                    entry.status
                ));
            }
        }
        entry.interpretation = parsed.interpretations[d].clone();
    }
    profile.narrative = parsed.summary;
    profile.mode = ReportMode::Llm;
    profile
}

/// Plain-text report in the four-section layout.
pub fn render_report(profile: &CognitiveProfile) -> String {
    let mut out = format!("{REPORT_TITLE}\n");
    for (i, (d, e)) in profile.domains.iter().enumerate() {
        let evidence = if e.evidence.is_empty() { "none available".to_string() } else { e.evidence.join("; ") };
        out.push_str(&format!(
            "\n{}. {}\nStatus: {}\nEvidence: {evidence}\nInterpretation: {}\n",
            i + 1,
            d.title(),
            e.status,
            e.interpretation
        ));
    }
    out.push_str(&format!("\nOverall Summary:\n{}\n\nRisk level: {}\n", profile.narrative, profile.risk_level));
    out
}
