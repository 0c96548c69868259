use actdet::classify::{
    rf_positive_score, stack_scores, topk_normalize, train_random_forest, train_svm_ovr,
    TrainConfig,
};
use actdet::{FeatureMatrix, ScoreKind, ScoreVector};
use proptest::prelude::*;

fn sv(values: &[f64], kind: ScoreKind) -> ScoreVector {
    ScoreVector::new("v", values.to_vec(), kind).unwrap()
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

#[test]
fn topk_normalize_examples() {
    let out = topk_normalize(&sv(&[0.5, 0.3, 0.2, 0.1], ScoreKind::Meta), 3).unwrap();
    assert!(
        close(out.values(), &[0.4 / 0.7, 0.2 / 0.7, 0.1 / 0.7, 0.0]),
        "{out:?}"
    );
    assert_eq!(out.kind(), ScoreKind::Fused);

    let out = topk_normalize(&sv(&[5.0, 5.0, 5.0], ScoreKind::Meta), 3).unwrap();
    assert!(close(out.values(), &[1.0 / 3.0; 3]));

    let out = topk_normalize(&sv(&[-1.0, -3.0], ScoreKind::Meta), 1).unwrap();
    assert!(close(out.values(), &[1.0, 0.0]));

    assert!(topk_normalize(&sv(&[1.0, 2.0], ScoreKind::Meta), 0).is_err());
    assert!(topk_normalize(&sv(&[1.0, 2.0], ScoreKind::Meta), 3).is_err());
}

#[test]
fn stacking_requires_matching_streams() {
    let ins = ScoreVector::new("v", vec![1.0, 2.0], ScoreKind::Ins).unwrap();
    let mbh = ScoreVector::new("v", vec![3.0, 4.0], ScoreKind::Mbh).unwrap();
    let c3d = ScoreVector::new("v", vec![5.0, 6.0], ScoreKind::C3d).unwrap();
    let stacked = stack_scores(&[ins.clone(), mbh.clone(), c3d]).unwrap();
    assert_eq!(stacked.values(), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert_eq!(stacked.kind(), ScoreKind::Stacked);

    let other_video = ScoreVector::new("w", vec![5.0, 6.0], ScoreKind::C3d).unwrap();
    assert!(stack_scores(&[ins, mbh, other_video]).is_err());
}

fn one_dimensional() -> (FeatureMatrix, Vec<u8>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..10 {
        rows.push(vec![-1.0 - i as f64 * 0.3]);
        y.push(0);
        rows.push(vec![1.0 + i as f64 * 0.3]);
        y.push(1);
    }
    (FeatureMatrix::from_rows("x", &rows).unwrap(), y)
}

fn forest_config() -> TrainConfig {
    TrainConfig {
        n_trees: 10,
        max_depth: 3,
        feature_subsample: 1,
        ..TrainConfig::default()
    }
}

#[test]
fn forest_separates_one_dimensional_data() {
    let (x, y) = one_dimensional();
    let model = train_random_forest(&x, &y, &forest_config()).unwrap();
    for (row, &label) in x.iter_rows().zip(&y) {
        let score = rf_positive_score(&model, row).unwrap();
        assert_eq!(u8::from(score > 0.5), label, "x = {row:?}, score {score}");
    }
    assert!(rf_positive_score(&model, &[2.0]).unwrap() >= 0.9);
    assert!(rf_positive_score(&model, &[1.0, 2.0]).is_err());
}

#[test]
fn forest_is_deterministic_and_rejects_single_class() {
    let (x, y) = one_dimensional();
    let a = train_random_forest(&x, &y, &forest_config()).unwrap();
    let b = train_random_forest(&x, &y, &forest_config()).unwrap();
    assert_eq!(a, b);
    assert!(train_random_forest(&x, &vec![1; y.len()], &forest_config()).is_err());
}

#[test]
fn svm_training_is_order_independent_of_thread_count() {
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let c = i % 4;
            let mut r = vec![0.0; 4];
            r[c] = 1.0 + 0.01 * i as f64;
            r
        })
        .collect();
    let y: Vec<usize> = (0..40).map(|i| i % 4).collect();
    let x = FeatureMatrix::from_rows("x", &rows).unwrap();
    let cfg = TrainConfig::default();
    let parallel = train_svm_ovr(&x, &y, 4, &cfg).unwrap();
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| train_svm_ovr(&x, &y, 4, &cfg).unwrap());
    assert_eq!(parallel, serial);
}

fn score_vector() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        prop::collection::vec(-5.0..5.0f64, 1..12),
        prop::collection::vec(-5.0..-0.1f64, 1..12),
        (1usize..12, -3.0..3.0f64).prop_map(|(n, v)| vec![v; n]),
        prop::collection::vec((0i32..4).prop_map(f64::from), 1..12),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn topk_normalize_preserves_ranking(values in score_vector(), k_seed in 0usize..100) {
        let k = 1 + k_seed % values.len();
        let input = sv(&values, ScoreKind::Meta);
        let out = topk_normalize(&input, k).unwrap();
        prop_assert_eq!(out.ranked_classes(), input.ranked_classes());
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] > values[j] {
                    prop_assert!(out.values()[i] > out.values()[j]);
                }
                if values[i] == values[j] {
                    prop_assert_eq!(out.values()[i], out.values()[j]);
                }
            }
        }
        prop_assert!(out.values().iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn topk_sum_is_one_unless_degenerate(values in score_vector(), k_seed in 0usize..100) {
        let k = 1 + k_seed % values.len();
        let out = topk_normalize(&sv(&values, ScoreKind::Meta), k).unwrap();
        let mut sorted = out.values().to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let top: f64 = sorted[..k].iter().sum();
        let all_equal = values.iter().all(|v| *v == values[0]);
        if !all_equal {
            prop_assert!((top - 1.0).abs() < 1e-12, "{top}");
        }
    }

    #[test]
    fn forest_scores_stay_in_unit_interval(probe in prop::collection::vec(-1e6..1e6f64, 1)) {
        let (x, y) = one_dimensional();
        let model = train_random_forest(&x, &y, &forest_config()).unwrap();
        let s = rf_positive_score(&model, &probe).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
    }
}
