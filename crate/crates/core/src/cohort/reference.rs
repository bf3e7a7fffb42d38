//! Rule-based extractor for generated transcripts. It stands in for a
//! perfect examiner and lets tests check the generator against the
//! scorers without any model in the loop.

use super::generate::{ANIMAL_POOL, FILLERS};
use crate::primitives::{Extraction, Judged, Stimuli};
use crate::task::TaskId;
use crate::text::{normalize, segments, spoken_numbers, tokens};

fn content(s: &str) -> Vec<String> {
    tokens(s).into_iter().filter(|t| !FILLERS.contains(&t.as_str())).collect()
}

fn segment(text: &str, i: usize) -> &str {
    segments(text).get(i).copied().unwrap_or("")
}

fn judged(seg: &str, correct: impl Fn(&[String]) -> bool) -> Judged {
    let toks = content(seg);
    let is_correct = correct(&toks);
    if toks.is_empty() || toks == ["i", "dont", "know"] {
        return Judged { response: vec![], is_correct };
    }
    Judged::new(toks.join(" "), is_correct)
}

pub fn reference_extract(task: TaskId, transcript: &str, stimuli: &Stimuli) -> Extraction {
    match task {
        TaskId::PictureNaming => Extraction::PictureNaming {
            items: stimuli
                .naming_targets
                .iter()
                .enumerate()
                .map(|(i, target)| {
                    let target = normalize(target);
                    judged(segment(transcript, i), |t| t.contains(&target))
                })
                .collect(),
        },
        TaskId::DigitSpan => Extraction::DigitSpan {
            forward: spoken_numbers(segment(transcript, 0)),
            backward: spoken_numbers(segment(transcript, 1)),
        },
        TaskId::Serial7 => {
            Extraction::Serial7 { responses: spoken_numbers(transcript).into_iter().map(i64::from).collect() }
        }
        TaskId::SentenceRep => Extraction::SentenceRep {
            responses: (0..stimuli.sentences.len()).map(|i| content(segment(transcript, i)).join(" ")).collect(),
        },
        TaskId::AnimalFluency => Extraction::AnimalFluency {
            animals: content(transcript).into_iter().filter(|t| ANIMAL_POOL.contains(&t.as_str())).collect(),
        },
        TaskId::Abstraction => Extraction::Abstraction {
            q1: judged(segment(transcript, 0), |t| t.iter().any(|w| w == "transport")),
            q2: judged(segment(transcript, 1), |t| t.iter().any(|w| w.starts_with("measur"))),
        },
        TaskId::HklltTrial4 | TaskId::HklltTrial5 => Extraction::HklltRecall { recalled: content(transcript) },
    }
}

#[cfg(test)]
mod tests {
    use super::super::{generate_cohort, CohortSpec};
    use super::*;
    use crate::primitives::score_extraction;

    #[test]
    fn reference_recovers_gold_primitives() {
        let stimuli = Stimuli::default();
        let spec = CohortSpec {
            n_participants: 60,
            noise: super::super::NoiseKnobs { filler_rate: 0.5, disfluency_rate: 0.5 },
            ..CohortSpec::default()
        };
        for s in generate_cohort(&spec, &stimuli).unwrap() {
            let gold = s.gold.as_ref().unwrap();
            for task in TaskId::ALL {
                let e = reference_extract(task, &s.transcripts[task.as_str()], &stimuli);
                let p = score_extraction(task, &e, &stimuli).unwrap();
                assert_eq!(Some(&p), gold.primitives.get(task), "{} {task}", s.participant_id);
            }
        }
    }
}
