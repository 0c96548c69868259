//! File-level composition of the full pipeline: training, scoring,
//! proposal generation, detection and evaluation.
//!
//! Inputs are a ground-truth file plus three feature manifests:
//! `ins` and `mbh` (video-level descriptors) and `c3d` (frame-level
//! features, which also drive the frame classifier that produces score
//! tracks).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    derive_seed, frame_scores, mean_pool_l1, rf_positive_score, stack_scores, svm_scores,
    topk_normalize, train_random_forest, train_svm_ovr, LinearSvmModel, RandomForestModel,
    TrainConfig, DEFAULT_TOPK,
};
use crate::detect::{assemble_detections, DetectConfig};
use crate::error::{Error, Result};
use crate::evaluate::{
    classification_report, detection_report, ClassificationReport, DetectionReport, EvalReport,
    DEFAULT_TIOU_THRESHOLDS,
};
use crate::io::{self, Manifest, ManifestEntry, ProposalRecord};
use crate::segment::{propose, SegmenterConfig};
use crate::synth;
use crate::types::{
    Detection, FeatureMatrix, FrameScoreTrack, GroundTruth, LabelTable, Proposal, ScoreKind,
    ScoreVector,
};

pub const MODEL_FORMAT: u32 = 1;

pub const INS_MODEL: &str = "ins_svm.json";
pub const MBH_MODEL: &str = "mbh_svm.json";
pub const C3D_MODEL: &str = "c3d_svm.json";
pub const META_MODEL: &str = "meta_svm.json";
pub const FOREST_MODEL: &str = "frame_rf.json";

pub const SCORES_FILE: &str = "scores.json";
pub const TRACKS_MANIFEST: &str = "tracks.json";
pub const PROPOSALS_FILE: &str = "proposals.jsonl";
pub const RESULTS_FILE: &str = "results.json";
pub const EVAL_CLS_FILE: &str = "eval_cls.json";
pub const EVAL_DET_FILE: &str = "eval_det.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamManifests {
    pub ins: PathBuf,
    pub mbh: PathBuf,
    pub c3d: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub gt: PathBuf,
    pub manifests: StreamManifests,
    pub model_dir: PathBuf,
    pub results_dir: PathBuf,
    pub train: TrainConfig,
    pub segmenter: SegmenterConfig,
    pub detect: DetectConfig,
    pub tiou: Vec<f64>,
    /// `k` of the top-k score normalization.
    pub topk: usize,
    pub train_subset: String,
    /// Subset evaluated by the eval commands; `"all"` for every video.
    pub eval_subset: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::for_data_dir(Path::new("."))
    }
}

impl PipelineConfig {
    /// Paths laid out the way `synth` writes a corpus, with models and
    /// results in subdirectories.
    pub fn for_data_dir(dir: &Path) -> Self {
        Self {
            gt: dir.join(synth::GT_FILE),
            manifests: StreamManifests {
                ins: dir.join(synth::INS_MANIFEST),
                mbh: dir.join(synth::MBH_MANIFEST),
                c3d: dir.join(synth::C3D_MANIFEST),
            },
            model_dir: dir.join("models"),
            results_dir: dir.join("results"),
            train: TrainConfig::default(),
            segmenter: SegmenterConfig::default(),
            detect: DetectConfig::default(),
            tiou: DEFAULT_TIOU_THRESHOLDS.to_vec(),
            topk: DEFAULT_TOPK,
            train_subset: "training".into(),
            eval_subset: "validation".into(),
        }
    }

    /// Reads a JSON config. Relative paths resolve against the config
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::json_parse(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.gt,
            &mut cfg.manifests.ins,
            &mut cfg.manifests.mbh,
            &mut cfg.manifests.c3d,
            &mut cfg.model_dir,
            &mut cfg.results_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.segmenter.validate()?;
        if self.detect.n_classes == 0 || self.detect.n_proposals == 0 {
            return Err(Error::InvalidArgument(
                "detect.n_classes and detect.n_proposals must be >= 1".into(),
            ));
        }
        if self.topk == 0 {
            return Err(Error::InvalidArgument("topk must be >= 1".into()));
        }
        if let Some(t) = self.tiou.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "TIoU threshold {t} outside (0, 1]"
            )));
        }
        Ok(())
    }

    /// Training settings for one model, with a seed derived from the
    /// master seed in `train.seed`.
    fn train_config(&self, stream: u64) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.train.seed, stream),
            ..self.train.clone()
        }
    }
}

/// On-disk model envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile<M> {
    pub format: u32,
    pub kind: String,
    pub labels: LabelTable,
    pub config: TrainConfig,
    pub model: M,
}

impl<M: Serialize + for<'de> Deserialize<'de>> ModelFile<M> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("cannot serialize model: {e}")))?;
        text.push('\n');
        io::write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path, kind: &str) -> Result<Self> {
        let text = io::read_to_string(path)?;
        let file: Self = serde_json::from_str(&text).map_err(|e| Error::json_parse(path, e))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Validation(format!(
                "{}: unsupported model format {}",
                path.display(),
                file.format
            )));
        }
        if file.kind != kind {
            return Err(Error::Validation(format!(
                "{}: expected a {kind} model, found {}",
                path.display(),
                file.kind
            )));
        }
        Ok(file)
    }
}

#[derive(Debug, Clone)]
pub struct Models {
    pub labels: LabelTable,
    pub ins: LinearSvmModel,
    pub mbh: LinearSvmModel,
    pub c3d: LinearSvmModel,
    pub meta: LinearSvmModel,
    pub forest: RandomForestModel,
}

impl Models {
    pub fn load(dir: &Path) -> Result<Self> {
        let svm = |name: &str| ModelFile::<LinearSvmModel>::load(&dir.join(name), "linear_svm_ovr");
        let ins = svm(INS_MODEL)?;
        let mbh = svm(MBH_MODEL)?;
        let c3d = svm(C3D_MODEL)?;
        let meta = svm(META_MODEL)?;
        let forest =
            ModelFile::<RandomForestModel>::load(&dir.join(FOREST_MODEL), "random_forest")?;
        let labels = meta.labels.clone();
        for other in [&ins.labels, &mbh.labels, &c3d.labels, &forest.labels] {
            if *other != labels {
                return Err(Error::Validation(format!(
                    "{}: models were trained with different label tables",
                    dir.display()
                )));
            }
        }
        Ok(Self {
            labels,
            ins: ins.model,
            mbh: mbh.model,
            c3d: c3d.model,
            meta: meta.model,
            forest: forest.model,
        })
    }
}

struct Streams {
    ins: Manifest,
    mbh: Manifest,
    c3d: Manifest,
}

impl Streams {
    fn load(cfg: &PipelineConfig) -> Result<Self> {
        Ok(Self {
            ins: Manifest::load(&cfg.manifests.ins)?,
            mbh: Manifest::load(&cfg.manifests.mbh)?,
            c3d: Manifest::load(&cfg.manifests.c3d)?,
        })
    }

    /// Video ids present in every stream.
    fn videos(&self) -> Vec<String> {
        self.c3d
            .entries
            .keys()
            .filter(|id| self.ins.entries.contains_key(*id) && self.mbh.entries.contains_key(*id))
            .cloned()
            .collect()
    }
}

/// Training accuracy of one model, as printed by `train`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelAccuracy {
    pub model: String,
    pub samples: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub accuracies: Vec<ModelAccuracy>,
    pub files: Vec<PathBuf>,
}

fn frame_activity(video: &crate::types::VideoAnnotations, t: usize, fps: f64) -> Option<usize> {
    let center = (t as f64 + 0.5) / fps;
    video
        .annotations
        .iter()
        .find(|a| a.segment.contains(center))
        .map(|a| a.class_id)
}

fn stack_rows(rows: &[Vec<f64>], name: &str) -> Result<FeatureMatrix> {
    FeatureMatrix::from_rows(name, rows)
}

fn accuracy(model: &LinearSvmModel, x: &FeatureMatrix, y: &[usize]) -> Result<f64> {
    let mut hits = 0;
    for (row, &label) in x.iter_rows().zip(y) {
        hits += usize::from(model.predict(row)? == label);
    }
    Ok(hits as f64 / y.len().max(1) as f64)
}

/// Video-level score vectors `[ins, mbh, c3d]` of one video.
fn video_scores(
    models: (&LinearSvmModel, &LinearSvmModel, &LinearSvmModel),
    ins: &FeatureMatrix,
    mbh: &FeatureMatrix,
    c3d: &FeatureMatrix,
) -> Result<ScoreVector> {
    let id = c3d.video_id();
    let s_ins = svm_scores(models.0, id, ScoreKind::Ins, &mean_pool_l1(ins)?)?;
    let s_mbh = svm_scores(models.1, id, ScoreKind::Mbh, &mean_pool_l1(mbh)?)?;
    let (_, s_c3d) = frame_scores(c3d, models.2)?;
    stack_scores(&[s_ins, s_mbh, s_c3d])
}

/// Trains the video-level SVMs, the frame SVM, the meta SVM and the frame
/// forest on the training subset, and writes them to `model_dir`.
pub fn train(cfg: &PipelineConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let gt = io::load_ground_truth(&cfg.gt)?;
    let streams = Streams::load(cfg)?;
    let labels = gt.labels.clone();
    let n_classes = labels.len();

    let mut train_ids = Vec::new();
    for (id, video) in &gt.subset(&cfg.train_subset).videos {
        if let Some(&class) = video.class_ids().first() {
            train_ids.push((id.clone(), class));
        }
    }
    if train_ids.is_empty() {
        return Err(Error::Validation(format!(
            "no annotated videos in subset {:?}",
            cfg.train_subset
        )));
    }

    struct Loaded {
        ins: FeatureMatrix,
        mbh: FeatureMatrix,
        c3d: FeatureMatrix,
        fps: f64,
    }
    let loaded = train_ids
        .par_iter()
        .map(|(id, _)| {
            Ok(Loaded {
                ins: streams.ins.load_features(id)?,
                mbh: streams.mbh.load_features(id)?,
                c3d: streams.c3d.load_features(id)?,
                fps: streams.c3d.get(id)?.fps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let y_video: Vec<usize> = train_ids.iter().map(|(_, c)| *c).collect();

    let pooled = |pick: fn(&Loaded) -> &FeatureMatrix| -> Result<FeatureMatrix> {
        let rows = loaded
            .iter()
            .map(|l| mean_pool_l1(pick(l)))
            .collect::<Result<Vec<_>>>()?;
        stack_rows(&rows, "pooled")
    };
    let x_ins = pooled(|l| &l.ins)?;
    let x_mbh = pooled(|l| &l.mbh)?;
    let ins = train_svm_ovr(&x_ins, &y_video, n_classes, &cfg.train_config(1))?;
    let mbh = train_svm_ovr(&x_mbh, &y_video, n_classes, &cfg.train_config(2))?;

    // Frame-level training sets: active frames labeled by class for the
    // frame SVM, every frame labeled active/background for the forest.
    let mut svm_rows = Vec::new();
    let mut svm_labels = Vec::new();
    let mut rf_rows = Vec::new();
    let mut rf_labels = Vec::new();
    for (l, (id, _)) in loaded.iter().zip(&train_ids) {
        let video = &gt.videos[id];
        for (t, row) in l.c3d.iter_rows().enumerate() {
            let active = frame_activity(video, t, l.fps);
            if let Some(class) = active {
                svm_rows.push(row.to_vec());
                svm_labels.push(class);
            }
            rf_rows.push(row.to_vec());
            rf_labels.push(u8::from(active.is_some()));
        }
    }
    if svm_rows.is_empty() {
        return Err(Error::Validation(
            "no active frames in the training subset".into(),
        ));
    }
    let x_frames = stack_rows(&svm_rows, "frames")?;
    let c3d = train_svm_ovr(&x_frames, &svm_labels, n_classes, &cfg.train_config(3))?;
    let x_rf = stack_rows(&rf_rows, "frames")?;
    let forest = train_random_forest(&x_rf, &rf_labels, &cfg.train_config(4))?;

    let stacked = loaded
        .iter()
        .map(|l| {
            video_scores((&ins, &mbh, &c3d), &l.ins, &l.mbh, &l.c3d).map(|s| s.values().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let x_meta = stack_rows(&stacked, "stacked")?;
    let meta = train_svm_ovr(&x_meta, &y_video, n_classes, &cfg.train_config(5))?;

    let rf_hits = rf_rows
        .iter()
        .zip(&rf_labels)
        .map(|(row, &label)| Ok(u8::from(rf_positive_score(&forest, row)? > 0.5) == label))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&h| h)
        .count();

    let accuracies = vec![
        ModelAccuracy {
            model: "ins_svm".into(),
            samples: y_video.len(),
            accuracy: accuracy(&ins, &x_ins, &y_video)?,
        },
        ModelAccuracy {
            model: "mbh_svm".into(),
            samples: y_video.len(),
            accuracy: accuracy(&mbh, &x_mbh, &y_video)?,
        },
        ModelAccuracy {
            model: "c3d_svm".into(),
            samples: svm_labels.len(),
            accuracy: accuracy(&c3d, &x_frames, &svm_labels)?,
        },
        ModelAccuracy {
            model: "meta_svm".into(),
            samples: y_video.len(),
            accuracy: accuracy(&meta, &x_meta, &y_video)?,
        },
        ModelAccuracy {
            model: "frame_rf".into(),
            samples: rf_labels.len(),
            accuracy: rf_hits as f64 / rf_labels.len() as f64,
        },
    ];

    let mut files = Vec::new();
    for (name, stream, model) in [
        (INS_MODEL, 1, ins),
        (MBH_MODEL, 2, mbh),
        (C3D_MODEL, 3, c3d),
        (META_MODEL, 5, meta),
    ] {
        let path = cfg.model_dir.join(name);
        ModelFile {
            format: MODEL_FORMAT,
            kind: "linear_svm_ovr".into(),
            labels: labels.clone(),
            config: cfg.train_config(stream),
            model,
        }
        .save(&path)?;
        files.push(path);
    }
    let path = cfg.model_dir.join(FOREST_MODEL);
    ModelFile {
        format: MODEL_FORMAT,
        kind: "random_forest".into(),
        labels,
        config: cfg.train_config(4),
        model: forest,
    }
    .save(&path)?;
    files.push(path);

    Ok(TrainSummary { accuracies, files })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoScores {
    pub fused: ScoreVector,
    pub track: FrameScoreTrack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutput {
    pub labels: LabelTable,
    pub videos: BTreeMap<String, VideoScores>,
}

/// Fused class scores and forest score tracks for every video in the
/// manifests. Does not write anything.
pub fn compute_scores(cfg: &PipelineConfig, models: &Models) -> Result<ScoreOutput> {
    let streams = Streams::load(cfg)?;
    let ids = streams.videos();
    let k = cfg.topk.min(models.labels.len());
    let videos = ids
        .par_iter()
        .map(|id| {
            let ins = streams.ins.load_features(id)?;
            let mbh = streams.mbh.load_features(id)?;
            let c3d = streams.c3d.load_features(id)?;
            let stacked = video_scores((&models.ins, &models.mbh, &models.c3d), &ins, &mbh, &c3d)?;
            let meta = svm_scores(&models.meta, id, ScoreKind::Meta, stacked.values())?;
            let fused = topk_normalize(&meta, k)?;
            let track_scores = c3d
                .iter_rows()
                .map(|row| rf_positive_score(&models.forest, row))
                .collect::<Result<Vec<_>>>()?;
            let track = FrameScoreTrack::new(id.as_str(), track_scores, streams.c3d.get(id)?.fps)?;
            Ok((id.clone(), VideoScores { fused, track }))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(ScoreOutput {
        labels: models.labels.clone(),
        videos,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoresFile {
    labels: LabelTable,
    topk: usize,
    videos: BTreeMap<String, Vec<f64>>,
}

/// Writes `scores.json`, per-video track CSVs and `tracks.json`.
pub fn write_scores(cfg: &PipelineConfig, scores: &ScoreOutput) -> Result<()> {
    let file = ScoresFile {
        labels: scores.labels.clone(),
        topk: cfg.topk,
        videos: scores
            .videos
            .iter()
            .map(|(id, v)| (id.clone(), v.fused.values().to_vec()))
            .collect(),
    };
    let mut text = io::to_json_string(&file, true)?;
    text.push('\n');
    io::write_atomic(&cfg.results_dir.join(SCORES_FILE), text.as_bytes())?;

    let mut manifest = Manifest::default();
    for (id, v) in &scores.videos {
        let rel = PathBuf::from("tracks").join(format!("{id}.csv"));
        io::save_track(&v.track, &cfg.results_dir.join(&rel))?;
        manifest.entries.insert(
            id.clone(),
            ManifestEntry {
                path: rel,
                fps: v.track.fps(),
                duration: v.track.len() as f64 / v.track.fps(),
            },
        );
    }
    manifest.save(&cfg.results_dir.join(TRACKS_MANIFEST))
}

/// Loads fused scores written by [`write_scores`].
pub fn load_scores(path: &Path) -> Result<(LabelTable, BTreeMap<String, ScoreVector>)> {
    let text = io::read_to_string(path)?;
    let file: ScoresFile = serde_json::from_str(&text).map_err(|e| Error::json_parse(path, e))?;
    let videos = file
        .videos
        .into_iter()
        .map(|(id, values)| {
            let sv = ScoreVector::new(id.as_str(), values, ScoreKind::Fused)?;
            Ok((id, sv))
        })
        .collect::<Result<_>>()?;
    Ok((file.labels, videos))
}

pub fn score(cfg: &PipelineConfig) -> Result<ScoreOutput> {
    cfg.validate()?;
    let models = Models::load(&cfg.model_dir)?;
    let scores = compute_scores(cfg, &models)?;
    write_scores(cfg, &scores)?;
    Ok(scores)
}

/// Proposals for each track, keyed by video id.
pub fn propose_tracks(
    tracks: &BTreeMap<String, FrameScoreTrack>,
    seg: &SegmenterConfig,
) -> Result<BTreeMap<String, Vec<Proposal>>> {
    tracks
        .par_iter()
        .map(|(id, track)| Ok((id.clone(), propose(track, seg)?)))
        .collect()
}

pub fn proposals_to_records(proposals: &BTreeMap<String, Vec<Proposal>>) -> Vec<ProposalRecord> {
    proposals
        .iter()
        .flat_map(|(id, ps)| ps.iter().map(move |p| ProposalRecord::new(id, p)))
        .collect()
}

/// Reads every track of a manifest, segments it, and writes the proposals
/// as JSON lines to `out`.
pub fn propose_manifest(
    manifest_path: &Path,
    seg: &SegmenterConfig,
    out: &Path,
) -> Result<BTreeMap<String, Vec<Proposal>>> {
    seg.validate()?;
    let manifest = Manifest::load(manifest_path)?;
    let tracks = manifest
        .entries
        .keys()
        .map(|id| Ok((id.clone(), manifest.load_track(id)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let proposals = propose_tracks(&tracks, seg)?;
    let text = io::proposals_to_jsonl(&proposals_to_records(&proposals))?;
    io::write_atomic(out, text.as_bytes())?;
    Ok(proposals)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectOutput {
    pub labels: LabelTable,
    pub detections: Vec<Detection>,
    /// Detection count per scored video, including zeros.
    pub per_video: BTreeMap<String, usize>,
}

/// Scores, proposes and assembles detections for every video, writing
/// `scores.json`, tracks, `proposals.jsonl` and `results.json`.
pub fn detect(cfg: &PipelineConfig) -> Result<DetectOutput> {
    cfg.validate()?;
    let models = Models::load(&cfg.model_dir)?;
    let scores = compute_scores(cfg, &models)?;
    write_scores(cfg, &scores)?;

    let tracks: BTreeMap<String, FrameScoreTrack> = scores
        .videos
        .iter()
        .map(|(id, v)| (id.clone(), v.track.clone()))
        .collect();
    let proposals = propose_tracks(&tracks, &cfg.segmenter)?;
    let text = io::proposals_to_jsonl(&proposals_to_records(&proposals))?;
    io::write_atomic(&cfg.results_dir.join(PROPOSALS_FILE), text.as_bytes())?;

    let mut detections = Vec::new();
    let mut per_video = BTreeMap::new();
    for (id, v) in &scores.videos {
        let dets = assemble_detections(&v.fused, &proposals[id], &cfg.detect)?;
        per_video.insert(id.clone(), dets.len());
        detections.extend(dets);
    }
    io::save_detections(
        &detections,
        &scores.labels,
        &cfg.results_dir.join(RESULTS_FILE),
    )?;
    Ok(DetectOutput {
        labels: scores.labels,
        detections,
        per_video,
    })
}

/// Classification metrics over the configured evaluation subset.
pub fn evaluate_classification(
    gt: &GroundTruth,
    scores_labels: &LabelTable,
    fused: &BTreeMap<String, ScoreVector>,
    subset: &str,
) -> Result<ClassificationReport> {
    if *scores_labels != gt.labels {
        return Err(Error::Validation(
            "score file and ground truth use different label tables".into(),
        ));
    }
    classification_report(fused, &gt.subset(subset))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEval {
    pub report: DetectionReport,
    /// Evaluated videos that have no detections at all.
    pub missing_videos: Vec<String>,
    /// Detections dropped because their video is outside the evaluated set.
    pub ignored_detections: usize,
}

/// Detection metrics over the configured subset. Detections for videos
/// outside the subset are ignored.
pub fn evaluate_detection(
    gt: &GroundTruth,
    detections: &[Detection],
    thresholds: &[f64],
    subset: &str,
) -> Result<DetectionEval> {
    let gt = gt.subset(subset);
    let kept: Vec<Detection> = detections
        .iter()
        .filter(|d| gt.videos.contains_key(&d.video_id))
        .cloned()
        .collect();
    let ignored_detections = detections.len() - kept.len();
    let missing_videos = gt
        .videos
        .keys()
        .filter(|id| !kept.iter().any(|d| &d.video_id == *id))
        .cloned()
        .collect();
    Ok(DetectionEval {
        report: detection_report(&kept, &gt, thresholds)?,
        missing_videos,
        ignored_detections,
    })
}

/// Reads a results file; an empty file counts as no detections.
pub fn load_results(path: &Path, labels: &LabelTable) -> Result<Vec<Detection>> {
    let text = io::read_to_string(path)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    io::parse_detections(&text, path, labels)
}

pub fn save_report(report: &EvalReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidArgument(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    io::write_atomic(path, text.as_bytes())
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

/// Classification summary in a TOP-1 / TOP-3 / mAP table.
pub fn format_classification_table(report: &ClassificationReport, subset: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Untrimmed classification ({subset}, {} videos)",
        report.videos
    );
    let _ = writeln!(
        out,
        "{:<10} {:>8} {:>8} {:>8}",
        "Method", "TOP-1", "TOP-3", "mAP"
    );
    let _ = writeln!(
        out,
        "{:<10} {:>8} {:>8} {:>8}",
        "proposed",
        pct(report.top1),
        pct(report.top3),
        pct(report.map)
    );
    out
}

/// Detection mAP with one column per TIoU threshold.
pub fn format_detection_table(report: &DetectionReport, subset: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Activity detection ({subset}, {} videos)",
        report.videos
    );
    let mut header = format!("{:<22}", "TIoU threshold δ =");
    let mut row = format!("{:<22}", "mAP");
    for t in &report.thresholds {
        let _ = write!(header, " {:>8}", format!("{:.1}", t.tiou));
        let _ = write!(row, " {:>8}", pct(t.map));
    }
    let _ = writeln!(out, "{}", header.trim_end());
    let _ = writeln!(out, "{}", row.trim_end());
    out
}
