use std::collections::BTreeMap;

use actdet::evaluate::{
    classification_map, detection_ap, detection_map, tiou, topk_accuracy, GtInstance,
};
use actdet::{
    Annotation, Detection, GroundTruth, LabelTable, ScoreKind, ScoreVector, Segment,
    VideoAnnotations,
};
use proptest::prelude::*;

fn seg(a: f64, b: f64) -> Segment {
    Segment::new(a, b).unwrap()
}

fn det(video: &str, class_id: usize, a: f64, b: f64, score: f64) -> Detection {
    Detection {
        video_id: video.into(),
        class_id,
        segment: seg(a, b),
        score,
    }
}

fn gt(video: &str, a: f64, b: f64) -> GtInstance {
    GtInstance {
        video_id: video.into(),
        segment: seg(a, b),
    }
}

/// Overlap computed from the endpoint case analysis rather than from a
/// hull.
fn tiou_oracle(a: &Segment, b: &Segment) -> f64 {
    let (a0, a1, b0, b1) = (a.start(), a.end(), b.start(), b.end());
    if a1 <= b0 || b1 <= a0 {
        return 0.0;
    }
    let inter = a1.min(b1) - a0.max(b0);
    inter / ((a1 - a0) + (b1 - b0) - inter)
}

/// AP from first principles: rank detections, match greedily, then average
/// the interpolated precision at each recall level j / n_gt.
fn ap_oracle(dets: &[Detection], gts: &[GtInstance], delta: f64) -> f64 {
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    // Insertion sort: strictly better detections move forward, equal keys
    // keep input order.
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && ranks_before(&dets[idx[j]], &dets[idx[j - 1]]) {
            idx.swap(j, j - 1);
            j -= 1;
        }
    }
    let mut taken = vec![false; gts.len()];
    let mut tp = 0usize;
    let mut curve = Vec::new();
    for (rank, &i) in idx.iter().enumerate() {
        let d = &dets[i];
        let mut choice: Option<usize> = None;
        let mut choice_overlap = -1.0;
        for (g, inst) in gts.iter().enumerate() {
            if taken[g] || inst.video_id != d.video_id {
                continue;
            }
            let o = tiou_oracle(&d.segment, &inst.segment);
            if o > choice_overlap {
                choice = Some(g);
                choice_overlap = o;
            }
        }
        if let Some(g) = choice {
            if choice_overlap >= delta {
                taken[g] = true;
                tp += 1;
            }
        }
        curve.push((tp as f64 / gts.len() as f64, tp as f64 / (rank + 1) as f64));
    }
    let mut total = 0.0;
    for j in 1..=gts.len() {
        let level = j as f64 / gts.len() as f64;
        let best = curve
            .iter()
            .filter(|(r, _)| *r >= level - 1e-15)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
        total += best;
    }
    total / gts.len() as f64
}

fn ranks_before(a: &Detection, b: &Detection) -> bool {
    if a.score != b.score {
        return a.score > b.score;
    }
    if a.video_id != b.video_id {
        return a.video_id < b.video_id;
    }
    a.segment.start() < b.segment.start()
}

fn segment_strategy() -> impl Strategy<Value = Segment> {
    (0u8..10, 1u8..6).prop_map(|(s, l)| seg(f64::from(s), f64::from(s + l)))
}

fn micro_case() -> impl Strategy<Value = (Vec<Detection>, Vec<GtInstance>, f64)> {
    let d = (0u8..2, segment_strategy(), 0u8..5).prop_map(|(v, s, score)| Detection {
        video_id: format!("v{v}"),
        class_id: 0,
        segment: s,
        score: f64::from(score) / 4.0,
    });
    let g = (0u8..2, segment_strategy()).prop_map(|(v, s)| GtInstance {
        video_id: format!("v{v}"),
        segment: s,
    });
    (
        prop::collection::vec(d, 0..=4),
        prop::collection::vec(g, 1..=3),
        prop_oneof![Just(0.1), Just(0.3), Just(0.5), Just(0.7), Just(1.0)],
    )
}

#[test]
fn tiou_analytic_cases() {
    assert_eq!(tiou(&seg(2.0, 5.0), &seg(2.0, 5.0)), 1.0);
    assert_eq!(tiou(&seg(0.0, 1.0), &seg(2.0, 3.0)), 0.0);
    assert!((tiou(&seg(0.0, 10.0), &seg(5.0, 15.0)) - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(tiou(&seg(0.0, 1.0), &seg(1.0, 2.0)), 0.0);
}

#[test]
fn ap_fixtures() {
    let truth = [gt("v", 2.0, 5.0)];
    let ap = detection_ap(&[det("v", 0, 2.0, 5.0, 0.9)], &truth, 0.5).unwrap();
    assert_eq!(ap, Some(1.0));

    let ranked_miss_first = [det("v", 0, 20.0, 25.0, 0.9), det("v", 0, 2.0, 5.0, 0.5)];
    let ap = detection_ap(&ranked_miss_first, &truth, 0.5)
        .unwrap()
        .unwrap();
    assert!((ap - 0.5).abs() < 1e-12);

    let two = [gt("v", 2.0, 5.0), gt("v", 10.0, 14.0)];
    let duplicates = [det("v", 0, 2.0, 5.0, 0.9), det("v", 0, 2.0, 5.0, 0.8)];
    let ap = detection_ap(&duplicates, &two, 0.5).unwrap().unwrap();
    assert!((ap - 0.5).abs() < 1e-12);
}

#[test]
fn ap_edge_cases() {
    assert_eq!(detection_ap(&[], &[], 0.5).unwrap(), None);
    assert_eq!(
        detection_ap(&[det("v", 0, 0.0, 1.0, 0.3)], &[], 0.5).unwrap(),
        Some(0.0)
    );
    assert_eq!(
        detection_ap(&[], &[gt("v", 0.0, 1.0)], 0.5).unwrap(),
        Some(0.0)
    );
    assert!(detection_ap(&[], &[gt("v", 0.0, 1.0)], 0.0).is_err());
    assert!(detection_ap(&[], &[gt("v", 0.0, 1.0)], 1.5).is_err());
}

#[test]
fn detections_in_other_videos_never_match() {
    let ap = detection_ap(&[det("w", 0, 2.0, 5.0, 0.9)], &[gt("v", 2.0, 5.0)], 0.1).unwrap();
    assert_eq!(ap, Some(0.0));
}

/// `(class_id, start, end)` per annotation.
type Instances = Vec<(usize, f64, f64)>;

fn corpus(videos: &[(&str, Instances)], labels: &[&str]) -> GroundTruth {
    let videos = videos
        .iter()
        .map(|(id, anns)| {
            let annotations = anns
                .iter()
                .map(|&(class_id, a, b)| Annotation {
                    class_id,
                    segment: seg(a, b),
                })
                .collect();
            (
                (*id).to_owned(),
                VideoAnnotations {
                    duration: 100.0,
                    subset: "validation".into(),
                    annotations,
                },
            )
        })
        .collect();
    GroundTruth {
        videos,
        labels: LabelTable::from_labels(labels.iter().copied()),
    }
}

#[test]
fn detection_map_averages_classes_with_instances() {
    let truth = corpus(
        &[("v1", vec![(0, 2.0, 5.0)]), ("v2", vec![(1, 10.0, 20.0)])],
        &["a", "b", "c"],
    );
    let dets = [det("v1", 0, 2.0, 5.0, 0.9), det("v2", 1, 40.0, 50.0, 0.9)];
    let results = detection_map(&dets, &truth, &[0.5]).unwrap();
    assert!((results[0].map - 0.5).abs() < 1e-12);
    assert_eq!(results[0].per_class_ap, [Some(1.0), Some(0.0), None]);

    let perfect = detection_map(
        &dets[..1],
        &corpus(&[("v1", vec![(0, 2.0, 5.0)])], &["a"]),
        &[0.5],
    )
    .unwrap();
    assert_eq!(perfect[0].map, 1.0);
}

#[test]
fn detection_map_without_instances_is_an_error() {
    let truth = corpus(&[("v1", vec![])], &["a"]);
    assert!(detection_map(&[], &truth, &[0.5]).is_err());
}

fn fused(values: &[f64]) -> ScoreVector {
    ScoreVector::new("x", values.to_vec(), ScoreKind::Fused).unwrap()
}

#[test]
fn topk_accuracy_examples() {
    let mut scores = BTreeMap::new();
    scores.insert("v1".to_owned(), fused(&[0.6, 0.4]));
    let mut labels = BTreeMap::new();
    labels.insert("v1".to_owned(), vec![0]);
    assert_eq!(topk_accuracy(&scores, &labels, 1).unwrap(), 1.0);
    labels.insert("v1".to_owned(), vec![1]);
    assert_eq!(topk_accuracy(&scores, &labels, 1).unwrap(), 0.0);
    assert_eq!(topk_accuracy(&scores, &labels, 2).unwrap(), 1.0);

    scores.insert("v2".to_owned(), fused(&[0.6, 0.4]));
    scores.insert("v3".to_owned(), fused(&[0.2, 0.8]));
    labels.insert("v1".to_owned(), vec![0]);
    labels.insert("v2".to_owned(), vec![1]);
    labels.insert("v3".to_owned(), vec![1]);
    assert!((topk_accuracy(&scores, &labels, 1).unwrap() - 2.0 / 3.0).abs() < 1e-12);

    labels.insert("v4".to_owned(), vec![0]);
    let err = topk_accuracy(&scores, &labels, 1).unwrap_err();
    assert!(err.to_string().contains("v4"), "{err}");
}

#[test]
fn classification_map_examples() {
    let mut scores = BTreeMap::new();
    scores.insert("v1".to_owned(), fused(&[0.9, 0.1]));
    scores.insert("v2".to_owned(), fused(&[0.2, 0.8]));
    let mut labels = BTreeMap::new();
    labels.insert("v1".to_owned(), vec![0]);
    labels.insert("v2".to_owned(), vec![1]);
    let (map, per_class) = classification_map(&scores, &labels, 2).unwrap();
    assert_eq!(map, 1.0);
    assert_eq!(per_class, [Some(1.0), Some(1.0)]);

    // Class 0's only positive now ranks second of two.
    labels.insert("v1".to_owned(), vec![1]);
    labels.insert("v2".to_owned(), vec![0]);
    let (_, per_class) = classification_map(&scores, &labels, 2).unwrap();
    assert!((per_class[0].unwrap() - 0.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn tiou_is_symmetric_and_bounded(a in segment_strategy(), b in segment_strategy()) {
        let ab = tiou(&a, &b);
        prop_assert_eq!(ab, tiou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab == 1.0, a == b);
        prop_assert!((ab - tiou_oracle(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn ap_matches_oracle((dets, gts, delta) in micro_case()) {
        let got = detection_ap(&dets, &gts, delta).unwrap().unwrap();
        let want = ap_oracle(&dets, &gts, delta);
        prop_assert!((got - want).abs() < 1e-12, "got {got}, oracle {want}");
    }

    #[test]
    fn ap_non_increasing_in_threshold((dets, gts, _) in micro_case()) {
        let mut previous = f64::INFINITY;
        for delta in [0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 0.9, 1.0] {
            let ap = detection_ap(&dets, &gts, delta).unwrap().unwrap();
            prop_assert!(ap <= previous + 1e-12, "delta {delta}: {ap} > {previous}");
            previous = ap;
        }
    }

    #[test]
    fn ap_depends_only_on_score_ranking((dets, gts, delta) in micro_case(), scale in 0.1..10.0f64) {
        let transformed: Vec<Detection> = dets
            .iter()
            .map(|d| Detection { score: (scale * d.score).exp() - 3.0, ..d.clone() })
            .collect();
        let a = detection_ap(&dets, &gts, delta).unwrap();
        let b = detection_ap(&transformed, &gts, delta).unwrap();
        prop_assert_eq!(a, b);
    }
}
