//! Classification and detection metrics: top-k accuracy, classification
//! mAP, and detection mAP at temporal IoU thresholds.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Detection, GroundTruth, LabelTable, ScoreVector, Segment};

/// Default TIoU thresholds for detection mAP.
pub const DEFAULT_TIOU_THRESHOLDS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

pub fn tiou(a: &Segment, b: &Segment) -> f64 {
    let inter = (a.end().min(b.end()) - a.start().max(b.start())).max(0.0);
    let union = a.end().max(b.end()) - a.start().min(b.start());
    if inter <= 0.0 {
        return 0.0;
    }
    // With overlap, the hull equals the union.
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtInstance {
    pub video_id: String,
    pub segment: Segment,
}

/// All-point interpolated AP from hit flags in rank order: the area under
/// the precision envelope `p(r) = max precision at recall >= r`.
pub fn average_precision(hits: &[bool], n_positives: usize) -> f64 {
    if n_positives == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (i, &hit) in hits.iter().enumerate() {
        tp += usize::from(hit);
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / n_positives as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        if *r > prev_recall {
            ap += (r - prev_recall) * p;
            prev_recall = *r;
        }
    }
    ap
}

/// Marks each detection as a hit or a false positive. Detections are taken
/// in descending score order (ties by video id, then start); each claims
/// the unmatched same-video instance of highest TIoU when that TIoU reaches
/// `threshold`. Returns hit flags in that order.
pub fn match_detections(dets: &[Detection], gt: &[GtInstance], threshold: f64) -> Vec<bool> {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.video_id.cmp(&b.video_id))
            .then_with(|| a.segment.start().total_cmp(&b.segment.start()))
    });
    let mut by_video: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, g) in gt.iter().enumerate() {
        by_video.entry(g.video_id.as_str()).or_default().push(i);
    }
    let mut matched = vec![false; gt.len()];
    order
        .iter()
        .map(|det| {
            let mut best: Option<(usize, f64)> = None;
            for &g in by_video.get(det.video_id.as_str()).into_iter().flatten() {
                if matched[g] {
                    continue;
                }
                let overlap = tiou(&det.segment, &gt[g].segment);
                if best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((g, overlap));
                }
            }
            match best {
                Some((g, overlap)) if overlap >= threshold => {
                    matched[g] = true;
                    true
                }
                _ => false,
            }
        })
        .collect()
}

/// AP of one class's detections against that class's instances. `None`
/// when both are empty, since the class then carries no information.
pub fn detection_ap(dets: &[Detection], gt: &[GtInstance], threshold: f64) -> Result<Option<f64>> {
    check_threshold(threshold)?;
    if gt.is_empty() {
        return Ok(if dets.is_empty() { None } else { Some(0.0) });
    }
    let hits = match_detections(dets, gt, threshold);
    Ok(Some(average_precision(&hits, gt.len())))
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "TIoU threshold must lie in (0, 1], got {threshold}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub tiou: f64,
    pub map: f64,
    /// AP per class id; `None` for classes without instances.
    pub per_class_ap: Vec<Option<f64>>,
}

/// Detection mAP at each threshold, averaged over classes that have at
/// least one ground-truth instance.
pub fn detection_map(
    dets: &[Detection],
    gt: &GroundTruth,
    thresholds: &[f64],
) -> Result<Vec<ThresholdResult>> {
    for &t in thresholds {
        check_threshold(t)?;
    }
    let n_classes = gt.labels.len();
    let mut instances: Vec<Vec<GtInstance>> = vec![Vec::new(); n_classes];
    for (video_id, video) in &gt.videos {
        for ann in &video.annotations {
            instances[ann.class_id].push(GtInstance {
                video_id: video_id.clone(),
                segment: ann.segment,
            });
        }
    }
    if instances.iter().all(Vec::is_empty) {
        return Err(Error::Validation(
            "no class has a ground-truth instance; detection mAP is undefined".into(),
        ));
    }
    let mut per_class_dets: Vec<Vec<Detection>> = vec![Vec::new(); n_classes];
    for d in dets {
        let bucket = per_class_dets
            .get_mut(d.class_id)
            .ok_or_else(|| Error::UnknownClass(format!("class id {}", d.class_id)))?;
        bucket.push(d.clone());
    }

    thresholds
        .iter()
        .map(|&threshold| {
            let per_class_ap = (0..n_classes)
                .map(|c| {
                    if instances[c].is_empty() {
                        Ok(None)
                    } else {
                        detection_ap(&per_class_dets[c], &instances[c], threshold)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let aps: Vec<f64> = per_class_ap.iter().flatten().copied().collect();
            Ok(ThresholdResult {
                tiou: threshold,
                map: aps.iter().sum::<f64>() / aps.len() as f64,
                per_class_ap,
            })
        })
        .collect()
}

fn scores_for<'a>(
    fused: &'a BTreeMap<String, ScoreVector>,
    video_id: &str,
) -> Result<&'a ScoreVector> {
    fused
        .get(video_id)
        .ok_or_else(|| Error::Validation(format!("no scores for video {video_id:?}")))
}

/// Fraction of videos whose `k` best classes include a ground-truth class.
/// Videos without labels are skipped.
pub fn topk_accuracy(
    fused: &BTreeMap<String, ScoreVector>,
    gt_labels: &BTreeMap<String, Vec<usize>>,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let mut total = 0usize;
    let mut hits = 0usize;
    for (video_id, labels) in gt_labels {
        if labels.is_empty() {
            continue;
        }
        let scores = scores_for(fused, video_id)?;
        total += 1;
        if scores
            .ranked_classes()
            .iter()
            .take(k)
            .any(|c| labels.contains(c))
        {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::Validation("no labeled videos to evaluate".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Mean over classes of the AP of ranking all videos by that class's score
/// (ties by video id). Classes with no positive video are left out.
/// Returns the mean and the per-class APs.
pub fn classification_map(
    fused: &BTreeMap<String, ScoreVector>,
    gt_labels: &BTreeMap<String, Vec<usize>>,
    n_classes: usize,
) -> Result<(f64, Vec<Option<f64>>)> {
    let mut rows: Vec<(&str, &ScoreVector, &Vec<usize>)> = Vec::with_capacity(gt_labels.len());
    for (video_id, labels) in gt_labels {
        let scores = scores_for(fused, video_id)?;
        if scores.len() != n_classes {
            return Err(Error::DimensionMismatch {
                expected: n_classes,
                got: scores.len(),
            });
        }
        rows.push((video_id, scores, labels));
    }
    let per_class: Vec<Option<f64>> = (0..n_classes)
        .map(|c| {
            let positives = rows.iter().filter(|(_, _, l)| l.contains(&c)).count();
            if positives == 0 {
                return None;
            }
            let mut order: Vec<&(&str, &ScoreVector, &Vec<usize>)> = rows.iter().collect();
            order.sort_by(|a, b| {
                b.1.values()[c]
                    .total_cmp(&a.1.values()[c])
                    .then_with(|| a.0.cmp(b.0))
            });
            let hits: Vec<bool> = order.iter().map(|(_, _, l)| l.contains(&c)).collect();
            Some(average_precision(&hits, positives))
        })
        .collect();
    let aps: Vec<f64> = per_class.iter().flatten().copied().collect();
    if aps.is_empty() {
        return Err(Error::Validation("no class has a positive video".into()));
    }
    Ok((aps.iter().sum::<f64>() / aps.len() as f64, per_class))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub videos: usize,
    pub top1: f64,
    pub top3: f64,
    pub map: f64,
    pub per_class_ap: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionThresholdReport {
    pub tiou: f64,
    pub map: f64,
    pub per_class_ap: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub videos: usize,
    pub thresholds: Vec<DetectionThresholdReport>,
}

/// Metrics in the layout written by the evaluation commands.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub classification: Option<ClassificationReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detection: Option<DetectionReport>,
}

fn named(per_class: &[Option<f64>], labels: &LabelTable) -> BTreeMap<String, f64> {
    per_class
        .iter()
        .enumerate()
        .filter_map(|(c, ap)| Some((labels.name(c)?.to_owned(), (*ap)?)))
        .collect()
}

pub fn classification_report(
    fused: &BTreeMap<String, ScoreVector>,
    gt: &GroundTruth,
) -> Result<ClassificationReport> {
    let gt_labels = video_labels(gt);
    let k3 = 3.min(gt.labels.len()).max(1);
    let (map, per_class) = classification_map(fused, &gt_labels, gt.labels.len())?;
    Ok(ClassificationReport {
        videos: gt_labels.values().filter(|l| !l.is_empty()).count(),
        top1: topk_accuracy(fused, &gt_labels, 1)?,
        top3: topk_accuracy(fused, &gt_labels, k3)?,
        map,
        per_class_ap: named(&per_class, &gt.labels),
    })
}

pub fn detection_report(
    dets: &[Detection],
    gt: &GroundTruth,
    thresholds: &[f64],
) -> Result<DetectionReport> {
    let results = detection_map(dets, gt, thresholds)?;
    Ok(DetectionReport {
        videos: gt.videos.len(),
        thresholds: results
            .into_iter()
            .map(|r| DetectionThresholdReport {
                tiou: r.tiou,
                map: r.map,
                per_class_ap: named(&r.per_class_ap, &gt.labels),
            })
            .collect(),
    })
}

/// Distinct annotated class ids per video.
pub fn video_labels(gt: &GroundTruth) -> BTreeMap<String, Vec<usize>> {
    gt.videos
        .iter()
        .map(|(id, v)| (id.clone(), v.class_ids()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Annotation, ScoreKind, VideoAnnotations};

    fn seg(a: f64, b: f64) -> Segment {
        Segment::new(a, b).unwrap()
    }

    fn det(video: &str, a: f64, b: f64, score: f64) -> Detection {
        Detection {
            video_id: video.into(),
            class_id: 0,
            segment: seg(a, b),
            score,
        }
    }

    fn inst(video: &str, a: f64, b: f64) -> GtInstance {
        GtInstance {
            video_id: video.into(),
            segment: seg(a, b),
        }
    }

    #[test]
    fn tiou_basics() {
        assert_eq!(tiou(&seg(2.0, 5.0), &seg(2.0, 5.0)), 1.0);
        assert!((tiou(&seg(0.0, 10.0), &seg(5.0, 15.0)) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(tiou(&seg(0.0, 1.0), &seg(2.0, 3.0)), 0.0);
        assert_eq!(tiou(&seg(0.0, 1.0), &seg(1.0, 3.0)), 0.0);
    }

    #[test]
    fn perfect_detection() {
        let ap = detection_ap(&[det("v", 2.0, 5.0, 0.9)], &[inst("v", 2.0, 5.0)], 0.5).unwrap();
        assert_eq!(ap, Some(1.0));
    }

    #[test]
    fn miss_ranked_before_hit() {
        let dets = [det("v", 20.0, 25.0, 0.9), det("v", 2.0, 5.0, 0.5)];
        let ap = detection_ap(&dets, &[inst("v", 2.0, 5.0)], 0.5)
            .unwrap()
            .unwrap();
        assert!((ap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn duplicate_is_a_false_positive() {
        let gt = [inst("v", 2.0, 5.0), inst("v", 10.0, 12.0)];
        let dets = [det("v", 2.0, 5.0, 0.9), det("v", 2.1, 5.0, 0.8)];
        let ap = detection_ap(&dets, &gt, 0.5).unwrap().unwrap();
        assert!((ap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_cases() {
        assert_eq!(detection_ap(&[], &[], 0.5).unwrap(), None);
        assert_eq!(
            detection_ap(&[det("v", 0.0, 1.0, 0.3)], &[], 0.5).unwrap(),
            Some(0.0)
        );
        assert_eq!(
            detection_ap(&[], &[inst("v", 0.0, 1.0)], 0.5).unwrap(),
            Some(0.0)
        );
    }

    #[test]
    fn threshold_range_checked() {
        let gt = [inst("v", 0.0, 1.0)];
        assert!(detection_ap(&[], &gt, 0.0).is_err());
        assert!(detection_ap(&[], &gt, 1.5).is_err());
        assert!(detection_ap(&[], &gt, 1.0).is_ok());
    }

    #[test]
    fn detections_in_other_videos_do_not_match() {
        let ap = detection_ap(&[det("w", 2.0, 5.0, 0.9)], &[inst("v", 2.0, 5.0)], 0.5).unwrap();
        assert_eq!(ap, Some(0.0));
    }

    fn two_class_gt() -> GroundTruth {
        let mut videos = BTreeMap::new();
        for (id, class) in [("a", 0), ("b", 1)] {
            videos.insert(
                id.to_string(),
                VideoAnnotations {
                    duration: 10.0,
                    subset: "validation".into(),
                    annotations: vec![Annotation {
                        class_id: class,
                        segment: seg(2.0, 5.0),
                    }],
                },
            );
        }
        GroundTruth {
            videos,
            labels: LabelTable::from_labels(["jump", "run"]),
        }
    }

    #[test]
    fn map_over_classes() {
        let gt = two_class_gt();
        let dets = [Detection {
            video_id: "a".into(),
            class_id: 0,
            segment: seg(2.0, 5.0),
            score: 0.7,
        }];
        let r = detection_map(&dets, &gt, &[0.5]).unwrap();
        assert_eq!(r[0].per_class_ap, [Some(1.0), Some(0.0)]);
        assert_eq!(r[0].map, 0.5);
    }

    #[test]
    fn map_requires_some_ground_truth() {
        let gt = GroundTruth::default();
        assert!(detection_map(&[], &gt, &[0.5]).is_err());
    }

    #[test]
    fn single_class_perfect_map() {
        let mut gt = two_class_gt();
        gt.videos.remove("b");
        let dets = [Detection {
            video_id: "a".into(),
            class_id: 0,
            segment: seg(2.0, 5.0),
            score: 0.7,
        }];
        let r = detection_map(&dets, &gt, &[0.5]).unwrap();
        assert_eq!(r[0].map, 1.0);
        assert_eq!(r[0].per_class_ap[1], None);
    }

    fn fused(entries: &[(&str, &[f64])]) -> BTreeMap<String, ScoreVector> {
        entries
            .iter()
            .map(|(id, v)| {
                (
                    id.to_string(),
                    ScoreVector::new(*id, v.to_vec(), ScoreKind::Fused).unwrap(),
                )
            })
            .collect()
    }

    fn labels(entries: &[(&str, &[usize])]) -> BTreeMap<String, Vec<usize>> {
        entries
            .iter()
            .map(|(id, l)| (id.to_string(), l.to_vec()))
            .collect()
    }

    #[test]
    fn topk_examples() {
        let f = fused(&[("v", &[0.6, 0.4])]);
        assert_eq!(topk_accuracy(&f, &labels(&[("v", &[0])]), 1).unwrap(), 1.0);
        assert_eq!(topk_accuracy(&f, &labels(&[("v", &[1])]), 1).unwrap(), 0.0);
        assert_eq!(topk_accuracy(&f, &labels(&[("v", &[1])]), 2).unwrap(), 1.0);

        let f = fused(&[("a", &[0.6, 0.4]), ("b", &[0.6, 0.4]), ("c", &[0.1, 0.9])]);
        let l = labels(&[("a", &[0]), ("b", &[1]), ("c", &[1])]);
        assert!((topk_accuracy(&f, &l, 1).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn topk_names_missing_video() {
        let f = fused(&[("a", &[0.6, 0.4])]);
        let err = topk_accuracy(&f, &labels(&[("a", &[0]), ("zz", &[1])]), 1).unwrap_err();
        assert!(err.to_string().contains("zz"));
    }

    #[test]
    fn classification_ap_examples() {
        // Class 0 positive ranked first.
        let f = fused(&[("a", &[0.9, 0.1]), ("b", &[0.2, 0.8])]);
        let l = labels(&[("a", &[0]), ("b", &[1])]);
        let (map, per) = classification_map(&f, &l, 2).unwrap();
        assert_eq!(per, [Some(1.0), Some(1.0)]);
        assert_eq!(map, 1.0);

        // Class 0 positive ranked second of two.
        let l = labels(&[("a", &[1]), ("b", &[0])]);
        let (_, per) = classification_map(&f, &l, 2).unwrap();
        assert_eq!(per[0], Some(0.5));
    }

    #[test]
    fn interpolated_ap() {
        assert_eq!(average_precision(&[true], 1), 1.0);
        assert_eq!(average_precision(&[false, true], 1), 0.5);
        let ap = average_precision(&[true, false, true], 2);
        assert!((ap - (0.5 * 1.0 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(average_precision(&[], 3), 0.0);
    }
}
