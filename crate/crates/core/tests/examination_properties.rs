use std::sync::atomic::{AtomicUsize, Ordering};

use cogscreen::examination::{
    ground_check, render_examiner_output, ExaminationConfig, Examiner, FindingReason, VerdictSource, VerifierConfig,
    EXAMINER_MARKER, VERIFIER_MARKER,
};
use cogscreen::gateway::{ChatRequest, FnBackend, GatewayError, RecordingBackend, ScriptedBackend};
use cogscreen::primitives::Extraction;
use cogscreen::task::TaskId;
use cogscreen::text::number_to_words;
use proptest::prelude::*;

const CASES: u32 = 1000;
const WORDS: [&str; 8] = ["camel", "lion", "rhino", "bus", "ferry", "Sofa", "scarf", "zebra"];

fn reply_for(kind: u8) -> String {
    match kind {
        0 => render_examiner_output(&Extraction::AnimalFluency { animals: vec!["camel".into(), "lion".into()] }),
        1 => render_examiner_output(&Extraction::AnimalFluency { animals: vec!["unicorn".into()] }),
        2 => "I am not sure what to output.".into(),
        _ => "<tool_call>{\"name\": \"list_length\", \"arguments\": {\"items\": [\"camel\"]}}</tool_call>".into(),
    }
}

fn fold(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn examiner_calls_never_exceed_retry_cap(
        n_max in 0u32..6,
        replies in prop::collection::vec(0u8..4, 1..10),
        verdicts in prop::collection::vec(prop::option::of(any::<bool>()), 1..10),
        grounding in any::<bool>(),
        llm_verify in any::<bool>(),
        transport_failures in prop::collection::vec(any::<bool>(), 1..6),
    ) {
        let examiner_calls = AtomicUsize::new(0);
        let verifier_calls = AtomicUsize::new(0);
        let backend = FnBackend(|req: &ChatRequest| -> Result<String, GatewayError> {
            if req.system_text().starts_with(VERIFIER_MARKER) {
                let i = verifier_calls.fetch_add(1, Ordering::SeqCst);
                return Ok(match verdicts[i % verdicts.len()] {
                    Some(true) => "Pass".into(),
                    Some(false) => "Fail: camel is not in the transcript".into(),
                    None => "gibberish".into(),
                });
            }
            let i = examiner_calls.fetch_add(1, Ordering::SeqCst);
            if transport_failures[i % transport_failures.len()] && i % 3 == 2 {
                return Err(GatewayError::Transport("connection reset".into()));
            }
            Ok(reply_for(replies[i % replies.len()]))
        });
        let config = ExaminationConfig { verifier: VerifierConfig { n_max, grounding, llm_verify }, ..ExaminationConfig::default() };
        let ex = Examiner::new(&backend, config).examine_task(TaskId::AnimalFluency, "camel, um, lion, camel");
        prop_assert!(ex.examiner_calls <= n_max + 1);
        prop_assert!(examiner_calls.load(Ordering::SeqCst) <= (n_max + 1) as usize);
        prop_assert!(ex.history.len() <= (n_max + 1) as usize);
        if ex.error.is_none() {
            prop_assert!(ex.result.is_some());
        }
    }

    #[test]
    fn grounding_flags_exactly_the_absent_items(
        spoken_numbers in prop::collection::vec(0u32..1000, 0..6),
        claimed_numbers in prop::collection::vec(0i64..1000, 0..6),
        spoken_words in prop::collection::vec(prop::sample::select(WORDS.to_vec()), 0..5),
        claimed_words in prop::collection::vec(prop::sample::select(WORDS.to_vec()), 0..5),
    ) {
        let mut parts: Vec<String> = spoken_numbers.iter().map(|n| number_to_words(*n)).collect();
        parts.extend(spoken_words.iter().map(|w| w.to_string()));
        let transcript = parts.join(", um, ");

        let numbers = ground_check(&transcript, &Extraction::Serial7 { responses: claimed_numbers.clone() });
        prop_assert_eq!(numbers.source, VerdictSource::Grounding);
        for n in &claimed_numbers {
            let present = spoken_numbers.iter().any(|s| i64::from(*s) == *n);
            let flagged = numbers.findings.iter().any(|f| f.item == n.to_string());
            prop_assert_eq!(flagged, !present, "number {}", n);
        }

        let claimed: Vec<String> = claimed_words.iter().map(|w| w.to_string()).collect();
        let words = ground_check(&transcript, &Extraction::AnimalFluency { animals: claimed.clone() });
        for f in &words.findings {
            prop_assert_eq!(f.reason, FindingReason::NotInTranscript);
            prop_assert!(!fold(&transcript).contains(&fold(&f.item)), "{} was flagged but is present", f.item);
        }
        for w in &claimed {
            if !fold(&transcript).contains(&fold(w)) {
                prop_assert!(words.findings.iter().any(|f| &f.item == w));
            }
        }
        prop_assert_eq!(words.passed, words.findings.is_empty());
    }
}

#[test]
fn requests_carry_role_temperatures() {
    let backend = RecordingBackend::new(FnBackend(|req: &ChatRequest| -> Result<String, GatewayError> {
        Ok(if req.system_text().starts_with(VERIFIER_MARKER) { "Fail: please recheck".into() } else { reply_for(0) })
    }));
    let ex = Examiner::new(&backend, ExaminationConfig::default()).examine_task(TaskId::AnimalFluency, "camel, lion");
    assert_eq!(ex.examiner_calls, 4);
    let requests = backend.requests();
    let (mut examiner, mut verifier) = (0, 0);
    for r in &requests {
        if r.system_text().starts_with(VERIFIER_MARKER) {
            assert_eq!(r.temperature, 0.1);
            verifier += 1;
        } else {
            assert!(r.system_text().starts_with(EXAMINER_MARKER));
            assert_eq!(r.temperature, 0.3);
            examiner += 1;
        }
    }
    assert_eq!((examiner, verifier), (4, 4));
}

#[test]
fn scripted_runs_are_byte_identical() {
    let transcript = "camel, um, lion";
    let live = RecordingBackend::new(FnBackend(|req: &ChatRequest| -> Result<String, GatewayError> {
        Ok(if req.system_text().starts_with(VERIFIER_MARKER) { "Pass".into() } else { reply_for(0) })
    }));
    Examiner::new(&live, ExaminationConfig::default()).examine_task(TaskId::AnimalFluency, transcript);
    let mut script = ScriptedBackend::default();
    for req in live.requests() {
        let reply = if req.system_text().starts_with(VERIFIER_MARKER) { "Pass".to_string() } else { reply_for(0) };
        script.insert(&req, reply);
    }
    let run = || {
        let ex = Examiner::new(&script, ExaminationConfig::default()).examine_task(TaskId::AnimalFluency, transcript);
        serde_json::to_string(&ex).unwrap()
    };
    let first = run();
    assert!(first.contains("\"verified\":true"));
    assert_eq!(first, run());
}
