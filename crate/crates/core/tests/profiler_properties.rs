use std::collections::BTreeMap;

use cogscreen::gateway::{ChatRequest, FnBackend, GatewayError, Sampling};
use cogscreen::inference::Trigger;
use cogscreen::primitives::{SessionPrimitives, TaskPrimitives};
use cogscreen::profiler::{
    band_z, derive_domain_statuses, fmt_z, generate_report, render_report, risk_level, statuses, Analyst, CaseData,
    Domain, DomainStatus, ImpairmentBand, ReportMode, RiskLevel, KNOWLEDGE_DOC,
};
use cogscreen::task::TaskId;
use cogscreen::toolbox::HklltParseResult;
use proptest::prelude::*;
use regex::Regex;

const CASES: u32 = 1000;

#[derive(Debug, Clone)]
struct Raw {
    naming: Option<[bool; 3]>,
    digits: Option<(bool, bool)>,
    serial: Option<u32>,
    sentences: Option<[bool; 2]>,
    animals: Option<u32>,
    abstraction: Option<(bool, bool)>,
    recall4: Option<(u32, u32)>,
    recall5: Option<(u32, u32)>,
    z4: Option<f64>,
    z5: Option<f64>,
}

fn raw_case() -> impl Strategy<Value = Raw> {
    let recall = (0u32..17).prop_flat_map(|n| (Just(n), 0..n.max(1)));
    (
        (
            prop::option::weighted(0.85, any::<[bool; 3]>()),
            prop::option::weighted(0.85, any::<(bool, bool)>()),
            prop::option::weighted(0.85, 0u32..6),
            prop::option::weighted(0.85, any::<[bool; 2]>()),
            prop::option::weighted(0.85, 0u32..30),
        ),
        (
            prop::option::weighted(0.85, any::<(bool, bool)>()),
            prop::option::weighted(0.85, recall.clone()),
            prop::option::weighted(0.85, recall),
            prop::option::weighted(0.85, -4.0f64..2.0),
            prop::option::weighted(0.85, -4.0f64..2.0),
        ),
    )
        .prop_map(|((naming, digits, serial, sentences, animals), (abstraction, recall4, recall5, z4, z5))| Raw {
            naming,
            digits,
            serial,
            sentences,
            animals,
            abstraction,
            recall4,
            recall5,
            z4,
            z5,
        })
}

fn serial_score(count: u32) -> u32 {
    [0, 1, 2, 2, 3, 3][count as usize]
}

fn build(raw: &Raw) -> CaseData {
    let mut p = SessionPrimitives::default();
    if let Some(flags) = raw.naming {
        p.insert(TaskId::PictureNaming, TaskPrimitives::PictureNaming { flags: flags.to_vec() });
    }
    if let Some((forward, backward)) = raw.digits {
        p.insert(TaskId::DigitSpan, TaskPrimitives::DigitSpan { forward, backward });
    }
    if let Some(c) = raw.serial {
        p.insert(TaskId::Serial7, TaskPrimitives::Serial7 { count_correct: c, score: serial_score(c) });
    }
    if let Some(flags) = raw.sentences {
        p.insert(TaskId::SentenceRep, TaskPrimitives::SentenceRep { flags: flags.to_vec() });
    }
    if let Some(n) = raw.animals {
        p.insert(TaskId::AnimalFluency, TaskPrimitives::AnimalFluency { n_animals: n, score: u32::from(n >= 11) });
    }
    if let Some((q1, q2)) = raw.abstraction {
        p.insert(TaskId::Abstraction, TaskPrimitives::Abstraction { q1, q2 });
    }
    for (task, r) in [(TaskId::HklltTrial4, raw.recall4), (TaskId::HklltTrial5, raw.recall5)] {
        if let Some((n_recall, n_clustering)) = r {
            p.insert(task, TaskPrimitives::HklltRecall(HklltParseResult { n_recall, n_clustering, intrusions: 0 }));
        }
    }
    CaseData { age: 75.0, edu_year: 6.0, gender: None, z4: raw.z4, z5: raw.z5, primitives: p }
}

fn count(flags: &[bool]) -> u32 {
    flags.iter().filter(|f| **f).count() as u32
}

fn num(caps: &regex::Captures<'_>, i: usize) -> u32 {
    caps[i].parse().unwrap()
}

/// Re-reads every number from the evidence strings and compares it with
/// the primitive it claims to describe.
fn check_evidence(raw: &Raw, domains: &BTreeMap<Domain, cogscreen::profiler::DomainEntry>) -> Result<usize, String> {
    let recall = Regex::new(r"^HKLLT-(\d) \((\d+)-minute delayed recall\):(?: z-score (-?[\d.]+),?)?(?: recalled (\d+) words?, (\d+) semantic clusters?)?$").unwrap();
    let animals =
        Regex::new(r"^Animal naming: (\d+) animals? within 1 minute \((met|below) criterion of >=11\)$").unwrap();
    let abstraction = Regex::new(r"^Abstraction: Q1 (correct|incorrect), Q2 (correct|incorrect)$").unwrap();
    let serial = Regex::new(r"^Serial 7s: (\d)/3 points \((\d)/5 correct\)$").unwrap();
    let digits = Regex::new(r"^Digit span: forward (passed|failed), backward (passed|failed), total (\d)/2$").unwrap();
    let naming = Regex::new(r"^Naming: (\d)/3 points$").unwrap();
    let sentences = Regex::new(r"^Sentence repetition: (\d)/2 points$").unwrap();
    let fail = |what: &str, line: &str| Err(format!("{what} mismatch in {line:?} for {raw:?}"));
    let mut checked = 0;
    for entry in domains.values() {
        for line in &entry.evidence {
            checked += 1;
            if let Some(c) = recall.captures(line) {
                let (r, z, delay) = if &c[1] == "4" { (raw.recall4, raw.z4, 10) } else { (raw.recall5, raw.z5, 30) };
                if num(&c, 2) != delay {
                    return fail("delay", line);
                }
                if c.get(3).map(|m| m.as_str().to_string()) != z.map(fmt_z) {
                    return fail("z", line);
                }
                if c.get(4).map(|_| (num(&c, 4), num(&c, 5))) != r {
                    return fail("recall", line);
                }
            } else if let Some(c) = animals.captures(line) {
                let n = raw.animals.unwrap();
                if num(&c, 1) != n || (&c[2] == "met") != (n >= 11) {
                    return fail("animals", line);
                }
            } else if let Some(c) = abstraction.captures(line) {
                let (q1, q2) = raw.abstraction.unwrap();
                if (&c[1] == "correct", &c[2] == "correct") != (q1, q2) {
                    return fail("abstraction", line);
                }
            } else if let Some(c) = serial.captures(line) {
                let n = raw.serial.unwrap();
                if (num(&c, 1), num(&c, 2)) != (serial_score(n), n) {
                    return fail("serial", line);
                }
            } else if let Some(c) = digits.captures(line) {
                let (f, b) = raw.digits.unwrap();
                if (&c[1] == "passed", &c[2] == "passed", num(&c, 3)) != (f, b, u32::from(f) + u32::from(b)) {
                    return fail("digits", line);
                }
            } else if let Some(c) = naming.captures(line) {
                if num(&c, 1) != count(&raw.naming.unwrap()) {
                    return fail("naming", line);
                }
            } else if let Some(c) = sentences.captures(line) {
                if num(&c, 1) != count(&raw.sentences.unwrap()) {
                    return fail("sentences", line);
                }
            } else {
                return Err(format!("unrecognized evidence {line:?}"));
            }
        }
    }
    Ok(checked)
}

fn status_strategy(domain: Domain) -> BoxedStrategy<DomainStatus> {
    use DomainStatus::*;
    let options = if domain == Domain::Memory {
        vec![NotAssessed, Normal, Mild, Moderate, Severe]
    } else {
        vec![NotAssessed, Normal, Mild, Impaired]
    };
    prop::sample::select(options).boxed()
}

fn status_map() -> impl Strategy<Value = BTreeMap<Domain, DomainStatus>> {
    Domain::ALL.map(status_strategy).prop_map(|s| Domain::ALL.into_iter().zip(s).collect())
}

fn triggers() -> impl Strategy<Value = Vec<Trigger>> {
    prop::sample::subsequence(vec![Trigger::MocaBelowP16, Trigger::Hkllt4, Trigger::Hkllt5], 0..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn band_z_is_monotone(z in -10.0f64..10.0, d in 0.0f64..6.0) {
        prop_assert!(band_z(z - d) >= band_z(z));
    }

    #[test]
    fn evidence_matches_primitives(raw in raw_case()) {
        let domains = derive_domain_statuses(&build(&raw));
        prop_assert_eq!(domains.len(), 4);
        check_evidence(&raw, &domains).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn llm_mode_keeps_derived_statuses(raw in raw_case(), trig in triggers(), flip in any::<bool>()) {
        let case = build(&raw);
        let template = generate_report(&case, &trig, ReportMode::Template, None);
        // The scripted analyst may even claim different statuses.
        let mut narrative = render_report(&template);
        if flip {
            narrative = narrative.replace("Status: Normal", "Status: Severe impairment");
        }
        let backend = FnBackend(move |_: &ChatRequest| Ok::<_, GatewayError>(narrative.clone()));
        let analyst = Analyst { backend: &backend, knowledge_doc: KNOWLEDGE_DOC, sampling: Sampling::examiner() };
        let llm = generate_report(&case, &trig, ReportMode::Llm, Some(&analyst));
        prop_assert_eq!(statuses(&llm.domains), statuses(&template.domains));
        prop_assert_eq!(llm.risk_level, template.risk_level);
    }

    #[test]
    fn worsening_a_domain_never_lowers_risk(
        base in status_map(),
        trig in triggers(),
        change in prop::sample::select(Domain::ALL.to_vec()).prop_flat_map(|d| (Just(d), status_strategy(d))),
    ) {
        let (domain, candidate) = change;
        let worse = if candidate.severity() >= base[&domain].severity() { candidate } else { base[&domain] };
        let mut next = base.clone();
        next.insert(domain, worse);
        prop_assert!(risk_level(&next, &trig) >= risk_level(&base, &trig));
        let mut more = trig.clone();
        more.push(Trigger::Hkllt4);
        prop_assert!(risk_level(&base, &more) >= risk_level(&base, &trig));
    }
}

#[test]
fn band_z_grid_matches_interval_definition() {
    for i in 0..=600 {
        let z = -4.0 + f64::from(i) / 100.0;
        let z = (z * 100.0).round() / 100.0;
        let expected = match z {
            z if z > -1.0 => ImpairmentBand::Normal,
            z if z > -1.5 => ImpairmentBand::Mild,
            z if z > -2.0 => ImpairmentBand::Moderate,
            _ => ImpairmentBand::Severe,
        };
        assert_eq!(band_z(z), expected, "z = {z}");
    }
    assert_eq!(band_z(-1.0), ImpairmentBand::Mild);
    assert_eq!(band_z(-1.5), ImpairmentBand::Moderate);
    assert_eq!(band_z(-2.0), ImpairmentBand::Severe);
}

#[test]
fn all_normal_without_triggers_is_low() {
    let normal = Domain::ALL.into_iter().map(|d| (d, DomainStatus::Normal)).collect();
    assert_eq!(risk_level(&normal, &[]), RiskLevel::Low);
}
