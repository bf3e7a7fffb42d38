use std::collections::BTreeMap;

use cogscreen::cohort::{generate_cohort, CohortSpec};
use cogscreen::inference::{
    mae, pearson_r, rmse, smr, svm_fit, svm_predict, zero_shot_predict, KernelSvmModel, SvmParams, ZeroShotMode,
};
use cogscreen::norms::NormTable;
use cogscreen::pipeline::{gold_record, record_features, NormSet};
use cogscreen::primitives::Stimuli;
use cogscreen::task::Label;
use proptest::prelude::*;

fn labelled_points() -> impl Strategy<Value = Vec<(Vec<f64>, bool)>> {
    prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 3), any::<bool>()), 6..24)
        .prop_filter("both classes", |v| v.iter().any(|p| p.1) && v.iter().any(|p| !p.1))
}

fn split(points: &[(Vec<f64>, bool)]) -> (Vec<Vec<f64>>, Vec<Label>) {
    points.iter().map(|(x, ad)| (x.clone(), if *ad { Label::Ad } else { Label::Hc })).unzip()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn lowering_scores_never_flips_ad_to_hc(
        row in 0usize..12,
        moca in 0.0f64..13.0,
        z4 in -4.0f64..2.0,
        z5 in -4.0f64..2.0,
        drops in (0.0f64..4.0, 0.0f64..3.0, 0.0f64..3.0),
        strict in any::<bool>(),
    ) {
        let table = NormTable::moca_sl();
        let row = &table.rows()[row];
        let mode = if strict { ZeroShotMode::Strict } else { ZeroShotMode::Inclusive };
        let before = zero_shot_predict(moca, Some(row), Some(z4), Some(z5), mode).unwrap();
        let after = zero_shot_predict(moca - drops.0, Some(row), Some(z4 - drops.1), Some(z5 - drops.2), mode).unwrap();
        prop_assert!(before.label == Label::Hc || after.label == Label::Ad);
        prop_assert_eq!(before.label == Label::Ad, !before.triggers.is_empty());
        prop_assert!(before.triggers.iter().all(|t| after.triggers.contains(t)));
    }

    #[test]
    fn score_metrics_identities(
        pairs in prop::collection::vec((0u32..17, 0u32..17), 1..40),
    ) {
        let (p, g): (Vec<f64>, Vec<f64>) = pairs.iter().map(|(a, b)| (f64::from(*a), f64::from(*b))).unzip();
        prop_assert_eq!(smr(&g, &g).unwrap(), 100.0);
        prop_assert_eq!(mae(&g, &g).unwrap(), 0.0);
        prop_assert!(rmse(&p, &g).unwrap() + 1e-12 >= mae(&p, &g).unwrap());
    }

    #[test]
    fn pearson_is_affine_invariant(
        xy in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..40),
        a in 0.1f64..20.0,
        b in -100.0f64..100.0,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        prop_assume!(pearson_r(&x, &y).is_ok());
        let r = pearson_r(&x, &y).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        prop_assert!((pearson_r(&x2, &y).unwrap() - r).abs() < 1e-9);
        prop_assert!((pearson_r(&y, &x).unwrap() - r).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn svm_ignores_training_order(points in labelled_points(), rotate in 1usize..23, probe in prop::collection::vec(-3.0f64..3.0, 3)) {
        let (x, y) = split(&points);
        let mut rotated = points.clone();
        rotated.rotate_left(rotate % points.len());
        rotated.reverse();
        let (x2, y2) = split(&rotated);
        let a = svm_fit(&x, &y, &[], SvmParams::default()).unwrap();
        let b = svm_fit(&x2, &y2, &[], SvmParams::default()).unwrap();
        let da = svm_predict(&a, &probe).unwrap().decision_value;
        let db = svm_predict(&b, &probe).unwrap().decision_value;
        prop_assert!((da - db).abs() < 1e-6, "{} vs {}", da, db);
        prop_assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn dual_coefficients_are_boxed_and_serialization_is_exact(points in labelled_points(), c in 0.1f64..10.0) {
        let (x, y) = split(&points);
        let model = svm_fit(&x, &y, &[], SvmParams { c, ..SvmParams::default() }).unwrap();
        prop_assert!(model.dual_coef.iter().all(|a| a.abs() <= c + 1e-12));
        let back = KernelSvmModel::from_json(&model.to_json()).unwrap();
        for row in &x {
            let d1 = svm_predict(&model, row).unwrap().decision_value;
            let d2 = svm_predict(&back, row).unwrap().decision_value;
            prop_assert_eq!(d1.to_bits(), d2.to_bits());
        }
    }
}

#[test]
fn feature_vectors_do_not_depend_on_session_order() {
    let sessions =
        generate_cohort(&CohortSpec { n_participants: 30, seed: 3, ..CohortSpec::default() }, &Stimuli::default())
            .unwrap();
    let norms = NormSet::default();
    let vectors = |order: &[usize]| -> BTreeMap<String, Vec<f64>> {
        order
            .iter()
            .map(|i| {
                let r = gold_record(&sessions[*i], &norms).unwrap();
                (r.participant_id.clone(), record_features(&r).vector(true))
            })
            .collect()
    };
    let forward: Vec<usize> = (0..sessions.len()).collect();
    let shuffled: Vec<usize> = (0..sessions.len()).map(|i| (i * 7 + 3) % sessions.len()).collect();
    assert_eq!(vectors(&forward), vectors(&shuffled));
}
