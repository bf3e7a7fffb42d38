use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::parse::render_examiner_output;
use super::template::{embedded_task, embedded_transcript};
use super::verify::{embedded_extraction, VERIFIER_MARKER};
use crate::gateway::{ChatBackend, ChatRequest, GatewayError, Role};
use crate::primitives::{score_extraction, Extraction, Judged, Stimuli};
use crate::task::TaskId;
use crate::text;

/// Probability and seed for injected examiner errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hallucination {
    pub rate: f64,
    pub seed: u64,
}

/// Answers examiner prompts with the gold extraction for the transcript and
/// verifier prompts by comparing against the same gold.
///
/// With [`Hallucination`] set, each examiner request is corrupted with the
/// given probability. Whether a request is corrupted depends on its
/// fingerprint; how it is corrupted depends only on (seed, task, transcript).
#[derive(Debug, Clone, Default)]
pub struct OracleBackend {
    gold: HashMap<(TaskId, String), Extraction>,
    stimuli: Stimuli,
    hallucination: Option<Hallucination>,
}

fn hash64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

impl OracleBackend {
    pub fn new(stimuli: Stimuli) -> Self {
        OracleBackend { gold: HashMap::new(), stimuli, hallucination: None }
    }

    pub fn with_hallucination(mut self, h: Hallucination) -> Self {
        self.hallucination = Some(h);
        self
    }

    pub fn insert(&mut self, task: TaskId, transcript: impl Into<String>, gold: Extraction) {
        self.gold.insert((task, transcript.into()), gold);
    }

    pub fn len(&self) -> usize {
        self.gold.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gold.is_empty()
    }

    fn lookup(&self, task: TaskId, transcript: &str, request: &ChatRequest) -> Result<&Extraction, GatewayError> {
        self.gold.get(&(task, transcript.to_string())).ok_or_else(|| GatewayError::Unscripted(request.fingerprint()))
    }

    fn examine(&self, task: TaskId, request: &ChatRequest) -> Result<String, GatewayError> {
        let first_user =
            request.messages.iter().find(|m| m.role == Role::User).map(|m| m.content.as_str()).unwrap_or("");
        let transcript = embedded_transcript(first_user)
            .ok_or_else(|| GatewayError::Protocol("examiner prompt carries no transcript".into()))?;
        let gold = self.lookup(task, transcript, request)?;
        if let Some(h) = self.hallucination {
            let u = hash64(&[&h.seed.to_le_bytes(), request.fingerprint().as_bytes()]) as f64 / 2f64.powi(64);
            if u < h.rate {
                if let Some(bad) = hallucinate(task, gold, transcript, &self.stimuli, h.seed) {
                    return Ok(render_examiner_output(&bad));
                }
            }
        }
        Ok(render_examiner_output(gold))
    }

    fn verify(&self, task: TaskId, request: &ChatRequest) -> Result<String, GatewayError> {
        let user = request.last_user_text();
        let transcript = embedded_transcript(user)
            .ok_or_else(|| GatewayError::Protocol("verifier prompt carries no transcript".into()))?;
        let claimed = embedded_extraction(user)
            .ok_or_else(|| GatewayError::Protocol("verifier prompt carries no examiner output".into()))?;
        let gold = self.lookup(task, transcript, request)?;
        Ok(verdict_text(gold, &claimed))
    }
}

/// Field-by-field comparison in the verifier's reply format.
fn verdict_text(gold: &Extraction, claimed: &Extraction) -> String {
    if gold == claimed {
        return "Pass, all responses found in transcript and correctly judged.".into();
    }
    let (Ok(Value::Object(g)), Ok(Value::Object(c))) = (serde_json::to_value(gold), serde_json::to_value(claimed))
    else {
        return "Output Judgment Error (Mismatch): examiner output could not be compared".into();
    };
    let mut lines = Vec::new();
    for (key, gv) in &g {
        let cv = c.get(key).unwrap_or(&Value::Null);
        if cv == gv {
            continue;
        }
        let field = if key.len() == 2 && key.starts_with('q') { key.to_uppercase() } else { key.clone() };
        let kind = match (cv.get("is_correct"), gv.get("is_correct")) {
            (Some(Value::Bool(false)), Some(Value::Bool(true))) => "False Negative",
            (Some(Value::Bool(true)), Some(Value::Bool(false))) => "False Positive",
            _ => "Mismatch",
        };
        lines.push(format!("{field} Judgment Error ({kind}): examiner output {cv} does not match the transcript"));
        lines.push(format!("Correction: Change {field} to {gv}."));
    }
    lines.join("\n")
}

impl ChatBackend for OracleBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        let system = request.system_text();
        let task = embedded_task(system).ok_or_else(|| GatewayError::Protocol("prompt names no task".into()))?;
        if system.starts_with(VERIFIER_MARKER) {
            self.verify(task, request)
        } else {
            self.examine(task, request)
        }
    }
}

const FABRICATED: [&str; 10] =
    ["unicorn", "dragon", "phoenix", "griffin", "kraken", "pegasus", "mermaid", "basilisk", "chimera", "hydra"];

fn absent_words<'a>(transcript: &'a str, avoid: &'a [String]) -> impl Iterator<Item = String> + 'a {
    FABRICATED
        .iter()
        .filter(move |w| !text::normalized_contains(transcript, w) && !avoid.iter().any(|a| text::normalize(a) == **w))
        .map(|w| w.to_string())
}

/// A corrupted version of `gold` whose task score differs from gold's.
/// Fabricated items never occur in the transcript. `None` when no
/// score-changing corruption exists.
pub fn hallucinate(
    task: TaskId,
    gold: &Extraction,
    transcript: &str,
    stimuli: &Stimuli,
    seed: u64,
) -> Option<Extraction> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(hash64(&[&seed.to_le_bytes(), task.as_str().as_bytes(), transcript.as_bytes()]));
    let mut candidates: Vec<Extraction> = Vec::new();
    match gold {
        Extraction::PictureNaming { items } => {
            for i in 0..items.len() {
                let mut items = items.clone();
                let fake = absent_words(transcript, &[]).next()?;
                items[i] = if items[i].is_correct {
                    Judged::new(fake, false)
                } else {
                    Judged { response: items[i].response.clone(), is_correct: true }
                };
                candidates.push(Extraction::PictureNaming { items });
            }
        }
        Extraction::DigitSpan { forward, backward } => {
            let corrupt = |said: &[u32], target: &[u32]| -> Vec<u32> {
                if said == target {
                    let mut v = said.to_vec();
                    if let Some(last) = v.last_mut() {
                        *last = (*last + 1) % 10;
                    }
                    v
                } else {
                    target.to_vec()
                }
            };
            let backward_target = stimuli.digits_backward_expected();
            candidates.push(Extraction::DigitSpan {
                forward: corrupt(forward, &stimuli.digits_forward),
                backward: backward.clone(),
            });
            candidates.push(Extraction::DigitSpan {
                forward: forward.clone(),
                backward: corrupt(backward, &backward_target),
            });
        }
        Extraction::Serial7 { responses } => {
            candidates.push(Extraction::Serial7 { responses: vec![93, 86, 79, 72, 65] });
            for k in 0..responses.len().min(5) {
                let mut r = responses.clone();
                r[k] += 3;
                candidates.push(Extraction::Serial7 { responses: r });
            }
            candidates.push(Extraction::Serial7 { responses: vec![] });
        }
        Extraction::SentenceRep { responses } => {
            for (i, target) in stimuli.sentences.iter().enumerate().take(responses.len()) {
                let mut r = responses.clone();
                if text::tokens(&r[i]) == text::tokens(target) {
                    let mut words: Vec<String> = r[i].split_whitespace().map(str::to_string).collect();
                    if words.is_empty() {
                        continue;
                    }
                    let j = rng.random_range(0..words.len());
                    words[j] = absent_words(transcript, &[]).next()?;
                    r[i] = words.join(" ");
                } else {
                    r[i] = target.clone();
                }
                candidates.push(Extraction::SentenceRep { responses: r });
            }
        }
        Extraction::AnimalFluency { animals } => {
            let threshold = stimuli.animal_threshold as usize;
            let mut distinct: Vec<String> = Vec::new();
            for a in animals {
                if !distinct.iter().any(|d| text::normalize(d) == text::normalize(a)) {
                    distinct.push(a.clone());
                }
            }
            let mut list = distinct.clone();
            if distinct.len() >= threshold {
                list.truncate(threshold.saturating_sub(2));
                list.extend(absent_words(transcript, &distinct).take(1));
            } else {
                let need = threshold - distinct.len();
                list.extend(absent_words(transcript, &distinct).take(need));
            }
            candidates.push(Extraction::AnimalFluency { animals: list });
        }
        Extraction::Abstraction { q1, q2 } => {
            let flip = |j: &Judged| Judged { response: j.response.clone(), is_correct: !j.is_correct };
            candidates.push(Extraction::Abstraction { q1: flip(q1), q2: q2.clone() });
            candidates.push(Extraction::Abstraction { q1: q1.clone(), q2: flip(q2) });
        }
        Extraction::HklltRecall { recalled } => {
            let missing: Vec<&String> =
                stimuli.hkllt_targets.words().iter().filter(|w| !text::normalized_contains(transcript, w)).collect();
            for w in missing {
                let mut r = recalled.clone();
                let at = rng.random_range(0..=r.len());
                r.insert(at, w.clone());
                candidates.push(Extraction::HklltRecall { recalled: r });
            }
            if !recalled.is_empty() {
                let mut r = recalled.clone();
                r.pop();
                candidates.push(Extraction::HklltRecall { recalled: r });
            }
        }
    }
    candidates.shuffle(&mut rng);
    let gold_value = score_extraction(task, gold, stimuli).ok()?.value();
    candidates.into_iter().find(|c| score_extraction(task, c, stimuli).is_ok_and(|p| p.value() != gold_value))
}
