use cogscreen::cohort::{
    generate_cohort, load_session, load_sessions, reference_extract, save_sessions, CohortSpec, NoiseKnobs,
};
use cogscreen::primitives::{score_extraction, Stimuli};
use cogscreen::task::TaskId;
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = CohortSpec> {
    (1usize..8, 0.0f64..=1.0, any::<u64>(), 0.0f64..0.6, 0.0f64..0.4).prop_map(
        |(n, ad_fraction, seed, filler_rate, disfluency_rate)| CohortSpec {
            n_participants: n,
            ad_fraction,
            seed,
            noise: NoiseKnobs { filler_rate, disfluency_rate },
            ..CohortSpec::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generation_is_a_pure_function_of_the_spec(spec in spec()) {
        let stimuli = Stimuli::default();
        let a = generate_cohort(&spec, &stimuli).unwrap();
        prop_assert_eq!(&a, &generate_cohort(&spec.clone(), &stimuli).unwrap());
        prop_assert_eq!(a.len(), spec.n_participants);
        let n_ad = a.iter().filter(|s| s.gold.as_ref().unwrap().label.unwrap().is_positive()).count();
        prop_assert_eq!(n_ad, spec.n_ad());
    }

    #[test]
    fn transcripts_rederive_gold_primitives(spec in spec()) {
        let stimuli = Stimuli::default();
        for s in generate_cohort(&spec, &stimuli).unwrap() {
            let gold = s.gold.as_ref().unwrap();
            for task in TaskId::ALL {
                let text = &s.transcripts[task.as_str()];
                let extraction = reference_extract(task, text, &stimuli);
                let primitives = score_extraction(task, &extraction, &stimuli).unwrap();
                prop_assert_eq!(Some(&primitives), gold.primitives.get(task), "{} {}", s.participant_id, task);
            }
        }
    }

    #[test]
    fn sessions_round_trip_through_json(spec in spec()) {
        for s in generate_cohort(&spec, &Stimuli::default()).unwrap() {
            s.validate().unwrap();
            prop_assert_eq!(load_session(&s.to_json()).unwrap(), s);
        }
    }
}

#[test]
fn sessions_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let sessions =
        generate_cohort(&CohortSpec { n_participants: 25, seed: 99, ..CohortSpec::default() }, &Stimuli::default())
            .unwrap();
    let written = save_sessions(&sessions, dir.path()).unwrap();
    assert_eq!(written.len(), 25);
    assert_eq!(load_sessions(dir.path()).unwrap(), sessions);
}
