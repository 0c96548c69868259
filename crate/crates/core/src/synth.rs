//! Seeded synthetic corpora: ground truth, ideal frame-score tracks, and
//! feature streams shaped like the real inputs.
//!
//! Each video shows one activity class. Per video the generator emits
//!
//! * a frame-score track: clipped Gaussian scores around `in_score_mean`
//!   inside annotated segments and `out_score_mean` elsewhere;
//! * `ins`: a 1 x D appearance descriptor, the class one-hot at index `c`
//!   plus Gaussian noise;
//! * `mbh`: a 1 x D motion descriptor, one-hot at index `D - 1 - c` plus noise;
//! * `c3d`: T x D frame features. Column 0 carries the frame score, column
//!   `1 + c` carries the frame score plus noise, the rest is noise.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::derive_seed;
use crate::error::{Error, Result};
use crate::io::{self, Manifest, ManifestEntry};
use crate::types::{
    Annotation, FeatureMatrix, FrameScoreTrack, GroundTruth, LabelTable, Segment, VideoAnnotations,
};

const MAX_PLACEMENT_ATTEMPTS: usize = 1000;
const MIN_GAP_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_videos: usize,
    pub n_classes: usize,
    /// Video duration range in seconds, inclusive.
    pub duration: [f64; 2],
    pub segments_per_video: [usize; 2],
    /// Annotated segment length range in seconds.
    pub segment_length: [f64; 2],
    pub fps: f64,
    pub in_score_mean: f64,
    pub out_score_mean: f64,
    pub score_sigma: f64,
    pub feature_dim: usize,
    pub feature_noise_sigma: f64,
    /// Leading fraction of videos assigned to the training subset; the rest
    /// are validation videos.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_videos: 50,
            n_classes: 5,
            duration: [30.0, 120.0],
            segments_per_video: [1, 2],
            segment_length: [8.0, 30.0],
            fps: 2.0,
            in_score_mean: 0.85,
            out_score_mean: 0.15,
            score_sigma: 0.05,
            feature_dim: 16,
            feature_noise_sigma: 0.3,
            train_fraction: 0.6,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_videos == 0 {
            return bad("n_videos must be >= 1".into());
        }
        if self.n_classes < 2 {
            return bad(format!("n_classes must be >= 2, got {}", self.n_classes));
        }
        let [dmin, dmax] = self.duration;
        if !(dmin.is_finite() && dmax.is_finite() && dmin > 0.0 && dmin <= dmax) {
            return bad(format!("invalid duration range [{dmin}, {dmax}]"));
        }
        let [lmin, lmax] = self.segment_length;
        if !(lmin.is_finite() && lmax.is_finite() && lmin > 0.0 && lmin <= lmax) {
            return bad(format!("invalid segment length range [{lmin}, {lmax}]"));
        }
        if self.segments_per_video[0] > self.segments_per_video[1] {
            return bad("segments_per_video range is inverted".into());
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps must be > 0, got {}", self.fps));
        }
        if !(0.0 <= self.out_score_mean
            && self.out_score_mean < self.in_score_mean
            && self.in_score_mean <= 1.0)
        {
            return bad(format!(
                "need 0 <= out_score_mean < in_score_mean <= 1, got {} and {}",
                self.out_score_mean, self.in_score_mean
            ));
        }
        if !(self.score_sigma >= 0.0 && self.feature_noise_sigma >= 0.0) {
            return bad("noise levels must be >= 0".into());
        }
        if self.feature_dim < self.n_classes + 1 {
            return bad(format!(
                "feature_dim must be at least n_classes + 1 = {}",
                self.n_classes + 1
            ));
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return bad("train_fraction must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn label_names(&self) -> Vec<String> {
        let width = (self.n_classes - 1).to_string().len().max(2);
        (0..self.n_classes)
            .map(|c| format!("activity_{c:0width$}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub gt: GroundTruth,
    pub tracks: BTreeMap<String, FrameScoreTrack>,
    pub ins: BTreeMap<String, FeatureMatrix>,
    pub mbh: BTreeMap<String, FeatureMatrix>,
    pub c3d: BTreeMap<String, FeatureMatrix>,
    pub labels: LabelTable,
}

struct SynthVideo {
    id: String,
    annotations: VideoAnnotations,
    track: FrameScoreTrack,
    ins: FeatureMatrix,
    mbh: FeatureMatrix,
    c3d: FeatureMatrix,
}

fn round_to(v: f64, step: f64) -> f64 {
    let inv = step.recip();
    (v * inv).round() / inv
}

/// Draws segment lengths until they fit with the minimum gaps, then spreads
/// the leftover time uniformly before, between and after them.
fn place_segments(
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    n_segments: usize,
    duration: f64,
) -> Option<Vec<Segment>> {
    if n_segments == 0 {
        return Some(Vec::new());
    }
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let lengths: Vec<f64> = (0..n_segments)
            .map(|_| {
                round_to(
                    rng.random_range(cfg.segment_length[0]..=cfg.segment_length[1]),
                    0.01,
                )
            })
            .collect();
        let slack =
            duration - lengths.iter().sum::<f64>() - MIN_GAP_SECONDS * (n_segments - 1) as f64;
        if lengths.iter().any(|&l| l <= 0.0) || slack < 0.0 {
            continue;
        }
        let mut offsets: Vec<f64> = (0..n_segments)
            .map(|_| (rng.random_range(0.0..=slack) * 100.0).floor() / 100.0)
            .collect();
        offsets.sort_by(f64::total_cmp);
        let mut segments = Vec::with_capacity(n_segments);
        let mut used = 0.0;
        for (i, (offset, length)) in offsets.iter().zip(&lengths).enumerate() {
            let start = round_to(offset + used + MIN_GAP_SECONDS * i as f64, 0.01);
            let end = round_to(start + length, 0.01).min(duration);
            segments.push(Segment::new(start, end).ok()?);
            used += length;
        }
        return Some(segments);
    }
    None
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn gaussian(rng: &mut ChaCha8Rng, mean: f64, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + sigma * z
}

fn frame_count(duration: f64, fps: f64) -> usize {
    ((duration * fps - 1e-9).ceil() as usize).max(1)
}

/// Whether the center of frame `t` falls inside any segment.
fn frame_active(t: usize, fps: f64, segments: &[Segment]) -> bool {
    let center = (t as f64 + 0.5) / fps;
    segments.iter().any(|s| s.contains(center))
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let n_train = (cfg.train_fraction * cfg.n_videos as f64).round() as usize;
    let videos = (0..cfg.n_videos)
        .into_par_iter()
        .map(|i| {
            let subset = if i < n_train {
                "training"
            } else {
                "validation"
            };
            generate_video(cfg, i, subset)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(cfg, videos))
}

fn generate_video(cfg: &SynthConfig, index: usize, subset: &str) -> Result<SynthVideo> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, index as u64));
    let class_id = rng.random_range(0..cfg.n_classes);
    let duration = round_to(rng.random_range(cfg.duration[0]..=cfg.duration[1]), 0.01).max(0.01);
    let n_segments = rng.random_range(cfg.segments_per_video[0]..=cfg.segments_per_video[1]);
    let video_id = format!("v_{index:04}");

    let segments = place_segments(cfg, &mut rng, n_segments, duration).ok_or_else(|| {
        Error::Infeasible(format!(
            "could not place {n_segments} segments in video {video_id} ({duration} s) after \
             {MAX_PLACEMENT_ATTEMPTS} attempts; shorten segment_length or reduce segments_per_video"
        ))
    })?;

    let n_frames = frame_count(duration, cfg.fps);
    let scores: Vec<f64> = (0..n_frames)
        .map(|t| {
            let mean = if frame_active(t, cfg.fps, &segments) {
                cfg.in_score_mean
            } else {
                cfg.out_score_mean
            };
            round6(gaussian(&mut rng, mean, cfg.score_sigma).clamp(0.0, 1.0))
        })
        .collect();

    build_video(
        cfg, &mut rng, video_id, class_id, duration, subset, segments, scores,
    )
}

#[allow(clippy::too_many_arguments)]
fn build_video(
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    video_id: String,
    class_id: usize,
    duration: f64,
    subset: &str,
    segments: Vec<Segment>,
    scores: Vec<f64>,
) -> Result<SynthVideo> {
    let d = cfg.feature_dim;
    let sigma = cfg.feature_noise_sigma;
    let descriptor = |hot: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d)
            .map(|j| round6(f64::from(u8::from(j == hot)) + gaussian(rng, 0.0, sigma)))
            .collect()
    };
    let ins = descriptor(class_id, rng);
    let mbh = descriptor(d - 1 - class_id, rng);

    let mut c3d = Vec::with_capacity(scores.len() * d);
    for &s in &scores {
        c3d.push(s);
        for j in 1..d {
            let base = if j == 1 + class_id { s } else { 0.0 };
            c3d.push(round6(base + gaussian(rng, 0.0, sigma)));
        }
    }

    Ok(SynthVideo {
        annotations: VideoAnnotations {
            duration,
            subset: subset.to_owned(),
            annotations: segments
                .into_iter()
                .map(|segment| Annotation { class_id, segment })
                .collect(),
        },
        track: FrameScoreTrack::new(&video_id, scores.clone(), cfg.fps)?,
        ins: FeatureMatrix::new(&video_id, 1, d, ins)?,
        mbh: FeatureMatrix::new(&video_id, 1, d, mbh)?,
        c3d: FeatureMatrix::new(&video_id, scores.len(), d, c3d)?,
        id: video_id,
    })
}

fn assemble(cfg: &SynthConfig, videos: Vec<SynthVideo>) -> SynthCorpus {
    let labels = LabelTable::from_labels(cfg.label_names());
    let mut corpus = SynthCorpus {
        gt: GroundTruth {
            videos: BTreeMap::new(),
            labels: labels.clone(),
        },
        tracks: BTreeMap::new(),
        ins: BTreeMap::new(),
        mbh: BTreeMap::new(),
        c3d: BTreeMap::new(),
        labels,
    };
    for v in videos {
        corpus.gt.videos.insert(v.id.clone(), v.annotations);
        corpus.tracks.insert(v.id.clone(), v.track);
        corpus.ins.insert(v.id.clone(), v.ins);
        corpus.mbh.insert(v.id.clone(), v.mbh);
        corpus.c3d.insert(v.id, v.c3d);
    }
    corpus
}

/// A single video whose scores stay high across its whole duration while
/// its ground truth holds two separate instances. Segmenting it yields one
/// proposal spanning both.
pub fn saturated_video(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, u64::MAX));
    let duration = round_to(0.5 * (cfg.duration[0] + cfg.duration[1]), 0.01);
    let segments = vec![
        Segment::new(
            round_to(0.10 * duration, 0.01),
            round_to(0.35 * duration, 0.01),
        )?,
        Segment::new(
            round_to(0.60 * duration, 0.01),
            round_to(0.85 * duration, 0.01),
        )?,
    ];
    let scores = (0..frame_count(duration, cfg.fps))
        .map(|_| round6(gaussian(&mut rng, cfg.in_score_mean, cfg.score_sigma).clamp(0.0, 1.0)))
        .collect();
    let video = build_video(
        cfg,
        &mut rng,
        "v_saturated".to_owned(),
        0,
        duration,
        "validation",
        segments,
        scores,
    )?;
    Ok(assemble(cfg, vec![video]))
}

/// Manifest file names written by [`write_corpus`], relative to its output
/// directory.
pub const GT_FILE: &str = "gt.json";
pub const C3D_MANIFEST: &str = "manifest.json";
pub const INS_MANIFEST: &str = "ins_manifest.json";
pub const MBH_MANIFEST: &str = "mbh_manifest.json";
pub const TRACKS_MANIFEST: &str = "tracks_manifest.json";

/// Writes the ground truth, one CSV per video and stream, and a manifest
/// per stream. `manifest.json` indexes the frame-level features.
pub fn write_corpus(corpus: &SynthCorpus, out_dir: &Path) -> Result<()> {
    io::save_ground_truth(&corpus.gt, &out_dir.join(GT_FILE))?;
    let streams: [(&str, &str, &BTreeMap<String, FeatureMatrix>); 3] = [
        (C3D_MANIFEST, "c3d", &corpus.c3d),
        (INS_MANIFEST, "ins", &corpus.ins),
        (MBH_MANIFEST, "mbh", &corpus.mbh),
    ];
    for (manifest_name, stream, matrices) in streams {
        let mut manifest = Manifest::default();
        for (id, m) in matrices {
            let rel = PathBuf::from("features").join(format!("{id}.{stream}.csv"));
            io::save_feature_matrix(m, &out_dir.join(&rel))?;
            manifest.entries.insert(id.clone(), entry(corpus, id, rel));
        }
        manifest.save(&out_dir.join(manifest_name))?;
    }
    let mut manifest = Manifest::default();
    for (id, track) in &corpus.tracks {
        let rel = PathBuf::from("tracks").join(format!("{id}.csv"));
        io::save_track(track, &out_dir.join(&rel))?;
        manifest.entries.insert(id.clone(), entry(corpus, id, rel));
    }
    manifest.save(&out_dir.join(TRACKS_MANIFEST))
}

fn entry(corpus: &SynthCorpus, id: &str, path: PathBuf) -> ManifestEntry {
    ManifestEntry {
        path,
        fps: corpus.tracks[id].fps(),
        duration: corpus.gt.videos[id].duration,
    }
}
