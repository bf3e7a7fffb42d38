//! Seeded synthetic cohorts. Each transcript is rendered from a sampled
//! gold extraction, so gold primitives are known exactly.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CohortError, Gold, Session};
use crate::primitives::{score_extraction, Extraction, Judged, SessionPrimitives, Stimuli};
use crate::task::{Gender, Label, TaskId};
use crate::text::{number_to_words, QUESTION_CHANGE};

/// Hesitation tokens the renderer may insert. None of them is a number
/// word, an animal, or a recall target.
pub const FILLERS: [&str; 5] = ["um", "uh", "er", "hmm", "ah"];

pub const ANIMAL_POOL: [&str; 40] = [
    "dog",
    "cat",
    "horse",
    "cow",
    "pig",
    "sheep",
    "goat",
    "chicken",
    "duck",
    "goose",
    "rabbit",
    "mouse",
    "rat",
    "tiger",
    "lion",
    "elephant",
    "monkey",
    "giraffe",
    "zebra",
    "bear",
    "wolf",
    "fox",
    "deer",
    "camel",
    "kangaroo",
    "panda",
    "snake",
    "frog",
    "turtle",
    "whale",
    "shark",
    "dolphin",
    "eagle",
    "owl",
    "parrot",
    "crocodile",
    "leopard",
    "squirrel",
    "hippo",
    "donkey",
];

const NAMING_FRAMES: [&str; 4] = ["{}", "it's a {}", "that is a {}", "a {}"];
const NAMING_WRONG: [&str; 6] = ["tiger", "horse", "dog", "cow", "leopard", "donkey"];
const NO_ANSWER: &str = "I don't know";
const ABSTRACTION: [(&[&str], &[&str]); 2] = [
    (
        &["both are means of transport", "they are used for transport"],
        &["both have wheels", "one is faster", NO_ANSWER],
    ),
    (&["both measure things", "they are measuring tools"], &["both are long", "they have numbers", NO_ANSWER]),
];
const SENTENCE_SUBSTITUTES: [&str; 4] = ["the", "a", "it", "some"];
const INTRUSIONS: [&str; 6] = ["apple", "chair", "lamp", "banana", "hat", "pencil"];

/// Task performance parameters for one diagnostic group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub p_naming: f64,
    pub p_digit_forward: f64,
    pub p_digit_backward: f64,
    /// Chance each serial subtraction is carried out correctly.
    pub p_serial_step: f64,
    pub p_sentence: f64,
    pub p_abstraction: f64,
    pub animals: (u32, u32),
    pub recall4: (u32, u32),
    /// Words lost between the two delayed recalls.
    pub recall5_drop: (u32, u32),
    /// Chance a recall is organized by category.
    pub p_cluster: f64,
    pub p_intrusion: f64,
}

impl Performance {
    pub fn healthy() -> Self {
        Performance {
            p_naming: 0.95,
            p_digit_forward: 0.95,
            p_digit_backward: 0.85,
            p_serial_step: 0.9,
            p_sentence: 0.85,
            p_abstraction: 0.85,
            animals: (11, 22),
            recall4: (6, 12),
            recall5_drop: (0, 2),
            p_cluster: 0.6,
            p_intrusion: 0.1,
        }
    }

    pub fn impaired() -> Self {
        Performance {
            p_naming: 0.6,
            p_digit_forward: 0.7,
            p_digit_backward: 0.4,
            p_serial_step: 0.5,
            p_sentence: 0.45,
            p_abstraction: 0.4,
            animals: (4, 13),
            recall4: (0, 5),
            recall5_drop: (0, 3),
            p_cluster: 0.2,
            p_intrusion: 0.4,
        }
    }

    fn validate(&self, group: &str) -> Result<(), CohortError> {
        let probs = [
            self.p_naming,
            self.p_digit_forward,
            self.p_digit_backward,
            self.p_serial_step,
            self.p_sentence,
            self.p_abstraction,
            self.p_cluster,
            self.p_intrusion,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(CohortError::Spec(format!("{group}: probabilities must lie in [0, 1]")));
        }
        for (name, (lo, hi), max) in [
            ("animals", self.animals, ANIMAL_POOL.len() as u32),
            ("recall4", self.recall4, 16),
            ("recall5_drop", self.recall5_drop, 16),
        ] {
            if lo > hi || hi > max {
                return Err(CohortError::Spec(format!(
                    "{group}: {name} range ({lo}, {hi}) must satisfy lo <= hi <= {max}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentProfile {
    pub hc: Performance,
    pub ad: Performance,
}

impl Default for ImpairmentProfile {
    fn default() -> Self {
        ImpairmentProfile { hc: Performance::healthy(), ad: Performance::impaired() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseKnobs {
    /// Chance of a filler before each rendered item.
    pub filler_rate: f64,
    /// Chance of repeating an item in list tasks.
    pub disfluency_rate: f64,
}

impl Default for NoiseKnobs {
    fn default() -> Self {
        NoiseKnobs { filler_rate: 0.2, disfluency_rate: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_participants: usize,
    pub ad_fraction: f64,
    pub seed: u64,
    pub id_prefix: String,
    pub age_range: (u32, u32),
    pub edu_range: (u32, u32),
    pub profile: ImpairmentProfile,
    pub noise: NoiseKnobs,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_participants: 50,
            ad_fraction: 0.5,
            seed: 7,
            id_prefix: "S".into(),
            age_range: (65, 89),
            edu_range: (0, 16),
            profile: ImpairmentProfile::default(),
            noise: NoiseKnobs::default(),
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<(), CohortError> {
        if !(0.0..=1.0).contains(&self.ad_fraction) {
            return Err(CohortError::Spec(format!("ad_fraction {} outside [0, 1]", self.ad_fraction)));
        }
        if !(0.0..=1.0).contains(&self.noise.filler_rate) || !(0.0..=1.0).contains(&self.noise.disfluency_rate) {
            return Err(CohortError::Spec("noise rates must lie in [0, 1]".into()));
        }
        if self.age_range.0 > self.age_range.1 || self.edu_range.0 > self.edu_range.1 {
            return Err(CohortError::Spec("age_range and edu_range need lo <= hi".into()));
        }
        if self.id_prefix.contains(['/', '\\']) {
            return Err(CohortError::Spec("id_prefix must not contain path separators".into()));
        }
        self.profile.hc.validate("hc")?;
        self.profile.ad.validate("ad")
    }

    /// Exact number of AD participants.
    pub fn n_ad(&self) -> usize {
        (self.n_participants as f64 * self.ad_fraction).round() as usize
    }
}

struct Renderer<'a> {
    rng: ChaCha8Rng,
    noise: NoiseKnobs,
    stimuli: &'a Stimuli,
}

impl Renderer<'_> {
    fn filler(&mut self) -> Option<&'static str> {
        let rate = self.noise.filler_rate;
        self.rng.random_bool(rate).then(|| *FILLERS.choose(&mut self.rng).expect("non-empty"))
    }

    fn with_filler(&mut self, s: &str) -> String {
        match self.filler() {
            Some(f) => format!("{f}, {s}"),
            None => s.to_string(),
        }
    }

    /// Items joined by commas, each possibly preceded by a filler.
    fn list(&mut self, items: &[String]) -> String {
        let parts: Vec<String> = items.iter().map(|i| self.with_filler(i)).collect();
        parts.join(", ")
    }

    fn maybe_repeat(&mut self, items: &mut Vec<String>) {
        if !items.is_empty() && self.rng.random_bool(self.noise.disfluency_rate) {
            let i = self.rng.random_range(0..items.len());
            let at = self.rng.random_range(i + 1..=items.len());
            let word = items[i].clone();
            items.insert(at, word);
        }
    }

    fn naming(&mut self, perf: &Performance) -> (String, Extraction) {
        let mut segments = Vec::new();
        let mut items = Vec::new();
        for target in &self.stimuli.naming_targets {
            let frame = *NAMING_FRAMES.choose(&mut self.rng).expect("non-empty");
            let (phrase, judged) = if self.rng.random_bool(perf.p_naming) {
                (frame.replace("{}", target), Judged::new(target.clone(), true))
            } else if self.rng.random_bool(0.7) {
                let wrong = *NAMING_WRONG.choose(&mut self.rng).expect("non-empty");
                (frame.replace("{}", wrong), Judged::new(wrong, false))
            } else {
                (NO_ANSWER.to_string(), Judged { response: vec![], is_correct: false })
            };
            segments.push(self.with_filler(&phrase));
            items.push(judged);
        }
        (segments.join(&format!(" {QUESTION_CHANGE} ")), Extraction::PictureNaming { items })
    }

    fn digit_attempt(&mut self, target: &[u32], p: f64, alternative: Option<&[u32]>) -> Vec<u32> {
        if self.rng.random_bool(p) {
            return target.to_vec();
        }
        let mut said = target.to_vec();
        match (self.rng.random_range(0..3), alternative) {
            (0, Some(alt)) => said = alt.to_vec(),
            (0 | 1, _) => {
                let i = self.rng.random_range(0..said.len());
                let old = said[i];
                said[i] = (old + self.rng.random_range(1..10)) % 10;
            }
            _ => {
                said.pop();
            }
        }
        said
    }

    fn digits(&mut self, perf: &Performance) -> (String, Extraction) {
        let forward = self.digit_attempt(&self.stimuli.digits_forward.clone(), perf.p_digit_forward, None);
        let presented = self.stimuli.digits_backward_presented.clone();
        let backward =
            self.digit_attempt(&self.stimuli.digits_backward_expected(), perf.p_digit_backward, Some(&presented));
        let words = |ds: &[u32]| ds.iter().map(|d| number_to_words(*d)).collect::<Vec<_>>().join(" ");
        let f = self.with_filler(&words(&forward));
        let b = self.with_filler(&words(&backward));
        (format!("{f} {QUESTION_CHANGE} {b}"), Extraction::DigitSpan { forward, backward })
    }

    fn serial7(&mut self, perf: &Performance) -> (String, Extraction) {
        let mut responses = Vec::new();
        let mut prev = 100i64;
        for _ in 0..5 {
            let mut next = prev - 7;
            if !self.rng.random_bool(perf.p_serial_step) {
                let off = *[-3i64, -2, -1, 1, 2, 3].choose(&mut self.rng).expect("non-empty");
                next += off;
            }
            responses.push(next);
            prev = next;
        }
        let words: Vec<String> = responses.iter().map(|r| number_to_words(*r as u32)).collect();
        (self.list(&words), Extraction::Serial7 { responses })
    }

    fn sentences(&mut self, perf: &Performance) -> (String, Extraction) {
        let mut segments = Vec::new();
        let mut responses = Vec::new();
        for sentence in &self.stimuli.sentences {
            let mut words: Vec<String> = sentence.split_whitespace().map(str::to_string).collect();
            if !self.rng.random_bool(perf.p_sentence) {
                let i = self.rng.random_range(0..words.len());
                if self.rng.random_bool(0.5) {
                    words.remove(i);
                } else {
                    let sub = SENTENCE_SUBSTITUTES
                        .iter()
                        .find(|s| !words[i].eq_ignore_ascii_case(s))
                        .expect("substitutes differ");
                    words[i] = sub.to_string();
                }
            }
            let said = words.join(" ");
            segments.push(self.with_filler(&said));
            responses.push(said);
        }
        (segments.join(&format!(" {QUESTION_CHANGE} ")), Extraction::SentenceRep { responses })
    }

    fn animals(&mut self, perf: &Performance) -> (String, Extraction) {
        let n = self.rng.random_range(perf.animals.0..=perf.animals.1) as usize;
        let mut pool = ANIMAL_POOL.to_vec();
        pool.shuffle(&mut self.rng);
        let mut said: Vec<String> = pool[..n].iter().map(|s| s.to_string()).collect();
        self.maybe_repeat(&mut said);
        (self.list(&said), Extraction::AnimalFluency { animals: said })
    }

    fn abstraction(&mut self, perf: &Performance) -> (String, Extraction) {
        let mut judged = Vec::new();
        for (right, wrong) in ABSTRACTION {
            let correct = self.rng.random_bool(perf.p_abstraction);
            let phrase = *(if correct { right } else { wrong }).choose(&mut self.rng).expect("non-empty");
            judged.push(Judged::new(phrase, correct));
        }
        let q2 = judged.pop().expect("two items");
        let q1 = judged.pop().expect("two items");
        let a = self.with_filler(&q1.response[0]);
        let b = self.with_filler(&q2.response[0]);
        (format!("{a} {QUESTION_CHANGE} {b}"), Extraction::Abstraction { q1, q2 })
    }

    /// Order recalled targets either grouped by category or at random.
    fn order_recall(&mut self, mut words: Vec<String>, perf: &Performance) -> Vec<String> {
        words.shuffle(&mut self.rng);
        if self.rng.random_bool(perf.p_cluster) {
            let targets = &self.stimuli.hkllt_targets;
            let mut seen: Vec<&str> = Vec::new();
            for w in &words {
                if let Some(c) = targets.category_of(w) {
                    if !seen.contains(&c) {
                        seen.push(c);
                    }
                }
            }
            words.sort_by_key(|w| targets.category_of(w).and_then(|c| seen.iter().position(|s| *s == c)));
        }
        if self.rng.random_bool(perf.p_intrusion) {
            let at = self.rng.random_range(0..=words.len());
            words.insert(at, INTRUSIONS.choose(&mut self.rng).expect("non-empty").to_string());
        }
        self.maybe_repeat(&mut words);
        words
    }

    fn hkllt(&mut self, perf: &Performance) -> [(String, Extraction); 2] {
        let mut all: Vec<String> = self.stimuli.hkllt_targets.words().to_vec();
        all.shuffle(&mut self.rng);
        let n4 = self.rng.random_range(perf.recall4.0..=perf.recall4.1) as usize;
        let drop = self.rng.random_range(perf.recall5_drop.0..=perf.recall5_drop.1) as usize;
        let n5 = n4.saturating_sub(drop);
        let first: Vec<String> = all[..n4].to_vec();
        let mut second = first.clone();
        second.shuffle(&mut self.rng);
        second.truncate(n5);
        [first, second].map(|words| {
            let recalled = self.order_recall(words, perf);
            (self.list(&recalled), Extraction::HklltRecall { recalled })
        })
    }
}

/// Render one participant. Gold primitives are scored from the sampled
/// extractions with the deterministic scorers.
fn participant(id: String, label: Label, rng: ChaCha8Rng, spec: &CohortSpec, stimuli: &Stimuli) -> Session {
    let perf = match label {
        Label::Ad => &spec.profile.ad,
        Label::Hc => &spec.profile.hc,
    };
    let mut r = Renderer { rng, noise: spec.noise, stimuli };
    let age = r.rng.random_range(spec.age_range.0..=spec.age_range.1) as f64;
    let edu_year = r.rng.random_range(spec.edu_range.0..=spec.edu_range.1) as f64;
    let gender = if r.rng.random_bool(0.5) { Gender::Female } else { Gender::Male };
    let mut rendered = vec![
        (TaskId::PictureNaming, r.naming(perf)),
        (TaskId::DigitSpan, r.digits(perf)),
        (TaskId::Serial7, r.serial7(perf)),
        (TaskId::SentenceRep, r.sentences(perf)),
        (TaskId::AnimalFluency, r.animals(perf)),
        (TaskId::Abstraction, r.abstraction(perf)),
    ];
    let [t4, t5] = r.hkllt(perf);
    rendered.push((TaskId::HklltTrial4, t4));
    rendered.push((TaskId::HklltTrial5, t5));

    let mut transcripts = BTreeMap::new();
    let mut gold = Gold { label: Some(label), primitives: SessionPrimitives::default(), extractions: BTreeMap::new() };
    for (task, (text, extraction)) in rendered {
        let prims = score_extraction(task, &extraction, stimuli).expect("rendered extractions fit their task");
        gold.primitives.insert(task, prims);
        gold.extractions.insert(task, extraction);
        transcripts.insert(task.as_str().to_string(), text);
    }
    Session {
        participant_id: id,
        age,
        edu_year,
        gender: Some(gender),
        transcripts,
        gold: Some(gold),
        extra: Default::default(),
    }
}

/// A pure function of `spec`: the same spec always yields the same cohort.
pub fn generate_cohort(spec: &CohortSpec, stimuli: &Stimuli) -> Result<Vec<Session>, CohortError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_participants;
    let n_ad = spec.n_ad();
    let mut labels: Vec<Label> = (0..n).map(|i| if i < n_ad { Label::Ad } else { Label::Hc }).collect();
    labels.shuffle(&mut rng);
    let width = n.to_string().len().max(3);
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let mut prng = ChaCha8Rng::seed_from_u64(spec.seed);
            prng.set_stream(i as u64 + 1);
            participant(format!("{}{:0width$}", spec.id_prefix, i + 1), label, prng, spec, stimuli)
        })
        .collect())
}
