use std::collections::BTreeMap;
use std::path::Path;

use actdet::evaluate::{tiou, DEFAULT_TIOU_THRESHOLDS};
use actdet::io;
use actdet::pipeline::{self, PipelineConfig};
use actdet::segment::{propose, SegmenterConfig};
use actdet::synth::{generate_corpus, saturated_video, write_corpus, SynthConfig};
use actdet::Detection;
use proptest::prelude::*;

fn corpus_dir(cfg: &SynthConfig) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&generate_corpus(cfg).unwrap(), dir.path()).unwrap();
    dir
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn training_fits_the_default_corpus() {
    let dir = corpus_dir(&SynthConfig::default());
    let cfg = PipelineConfig::for_data_dir(dir.path());
    let summary = pipeline::train(&cfg).unwrap();
    assert_eq!(summary.files.len(), 5);
    let meta = summary
        .accuracies
        .iter()
        .find(|a| a.model == "meta_svm")
        .unwrap();
    assert!(meta.accuracy >= 0.95, "{:?}", summary.accuracies);

    let first: Vec<Vec<u8>> = summary.files.iter().map(|f| read(f)).collect();
    pipeline::train(&cfg).unwrap();
    let second: Vec<Vec<u8>> = summary.files.iter().map(|f| read(f)).collect();
    assert_eq!(first, second);
}

#[test]
fn detect_then_evaluate() {
    let synth = SynthConfig {
        n_videos: 30,
        segments_per_video: [0, 2],
        ..SynthConfig::default()
    };
    let dir = corpus_dir(&synth);
    let cfg = PipelineConfig::for_data_dir(dir.path());
    pipeline::train(&cfg).unwrap();
    let out = pipeline::detect(&cfg).unwrap();

    let gt = io::load_ground_truth(&cfg.gt).unwrap();
    let cap = cfg.detect.n_classes * cfg.detect.n_proposals;
    assert_eq!(out.per_video.len(), gt.videos.len());
    for (id, &n) in &out.per_video {
        assert!(n <= cap);
        if gt.videos[id].annotations.is_empty() {
            assert_eq!(n, 0, "background-only video {id} got detections");
        }
    }
    assert!(out
        .detections
        .iter()
        .all(|d| d.score.is_finite() && d.score >= 0.0));

    let dets =
        pipeline::load_results(&cfg.results_dir.join(pipeline::RESULTS_FILE), &gt.labels).unwrap();
    assert_eq!(dets.len(), out.detections.len());
    let eval = pipeline::evaluate_detection(&gt, &dets, &DEFAULT_TIOU_THRESHOLDS, "all").unwrap();
    assert_eq!(eval.report.thresholds.len(), 5);
    for t in &eval.report.thresholds {
        assert!((0.0..=1.0).contains(&t.map));
    }

    let (labels, fused) =
        pipeline::load_scores(&cfg.results_dir.join(pipeline::SCORES_FILE)).unwrap();
    let report = pipeline::evaluate_classification(&gt, &labels, &fused, "validation").unwrap();
    assert!(report.top1 <= report.top3, "{report:?}");
    assert!((0.0..=1.0).contains(&report.map), "{report:?}");
}

#[test]
fn perfect_and_empty_results() {
    let dir = corpus_dir(&SynthConfig {
        n_videos: 12,
        ..SynthConfig::default()
    });
    let gt = io::load_ground_truth(&dir.path().join("gt.json")).unwrap();
    let perfect: Vec<Detection> = gt
        .videos
        .iter()
        .flat_map(|(id, v)| {
            v.annotations.iter().map(move |a| Detection {
                video_id: id.clone(),
                class_id: a.class_id,
                segment: a.segment,
                score: 1.0,
            })
        })
        .collect();
    let eval =
        pipeline::evaluate_detection(&gt, &perfect, &DEFAULT_TIOU_THRESHOLDS, "all").unwrap();
    assert!(eval.report.thresholds.iter().all(|t| t.map == 1.0));
    assert!(eval.missing_videos.is_empty());

    let path = dir.path().join("empty.json");
    std::fs::write(&path, "").unwrap();
    let none = pipeline::load_results(&path, &gt.labels).unwrap();
    let eval = pipeline::evaluate_detection(&gt, &none, &DEFAULT_TIOU_THRESHOLDS, "all").unwrap();
    assert!(eval.report.thresholds.iter().all(|t| t.map == 0.0));
    assert_eq!(eval.missing_videos.len(), gt.videos.len());
}

#[test]
fn saturated_video_gives_one_spanning_proposal() {
    let corpus = saturated_video(&SynthConfig::default()).unwrap();
    let track = &corpus.tracks["v_saturated"];
    let video = &corpus.gt.videos["v_saturated"];
    let props = propose(track, &SegmenterConfig::default()).unwrap();
    assert_eq!(props.len(), 1);
    assert!(props[0].segment.duration() >= 0.9 * video.duration);
    for a in &video.annotations {
        assert!(tiou(&props[0].segment, &a.segment) < 0.5);
    }
}

#[test]
fn generation_does_not_depend_on_thread_count() {
    let cfg = SynthConfig {
        n_videos: 10,
        ..SynthConfig::default()
    };
    let parallel = generate_corpus(&cfg).unwrap();
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| generate_corpus(&cfg).unwrap());
    assert_eq!(parallel.gt, serial.gt);
    assert_eq!(parallel.tracks, serial.tracks);
    assert_eq!(parallel.c3d, serial.c3d);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_segments_are_disjoint_and_in_range(
        seed in any::<u64>(),
        n_videos in 1usize..8,
        max_segments in 0usize..4,
    ) {
        let cfg = SynthConfig {
            n_videos,
            segments_per_video: [0, max_segments],
            segment_length: [3.0, 15.0],
            seed,
            ..SynthConfig::default()
        };
        let corpus = generate_corpus(&cfg).unwrap();
        let mut per_subset: BTreeMap<&str, usize> = BTreeMap::new();
        for (id, v) in &corpus.gt.videos {
            *per_subset.entry(v.subset.as_str()).or_default() += 1;
            prop_assert!(v.duration >= cfg.duration[0] && v.duration <= cfg.duration[1]);
            for a in &v.annotations {
                prop_assert!(a.segment.start() >= 0.0 && a.segment.end() <= v.duration);
            }
            for pair in v.annotations.windows(2) {
                prop_assert!(pair[0].segment.end() + 1.0 <= pair[1].segment.start() + 1e-9);
            }
            let track = &corpus.tracks[id];
            prop_assert_eq!(corpus.c3d[id].rows(), track.len());
            prop_assert!(track.scores().iter().all(|s| (0.0..=1.0).contains(s)));
        }
        prop_assert_eq!(per_subset.values().sum::<usize>(), n_videos);
    }
}
