//! Core domain types. Constructors validate; every value reachable through
//! the public API satisfies its invariants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame rate of score tracks when nothing else is specified.
pub const DEFAULT_FPS: f64 = 2.0;

/// Which stage produced a [`ScoreVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// SVM scores on pooled appearance (CNN) features.
    Ins,
    /// SVM scores on motion boundary histogram features.
    Mbh,
    /// Frame-level SVM scores pooled over frames.
    C3d,
    /// Concatenation of `Ins`, `Mbh` and `C3d`.
    Stacked,
    /// Raw meta classifier output, before normalization.
    Meta,
    /// Top-k normalized meta classifier output.
    Fused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    video_id: String,
    values: Vec<f64>,
    kind: ScoreKind,
}

impl ScoreVector {
    pub fn new(video_id: impl Into<String>, values: Vec<f64>, kind: ScoreKind) -> Result<Self> {
        let video_id = video_id.into();
        if values.is_empty() {
            return Err(Error::Validation(format!(
                "empty score vector for video {video_id:?}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite score at class {i} for video {video_id:?}"
            )));
        }
        Ok(Self {
            video_id,
            values,
            kind,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Class indices ordered by descending score; ties go to the lower index.
    pub fn ranked_classes(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        order
    }
}

/// Per-frame positive scores of the binary activity classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScoreTrack {
    video_id: String,
    scores: Vec<f64>,
    fps: f64,
}

impl FrameScoreTrack {
    pub fn new(video_id: impl Into<String>, scores: Vec<f64>, fps: f64) -> Result<Self> {
        let video_id = video_id.into();
        if scores.is_empty() {
            return Err(Error::Validation(format!(
                "empty score track for video {video_id:?}"
            )));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::Validation(format!(
                "fps must be positive, got {fps} for video {video_id:?}"
            )));
        }
        if let Some(t) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Validation(format!(
                "frame {t} of video {video_id:?} has score {} outside [0, 1]",
                scores[t]
            )));
        }
        Ok(Self {
            video_id,
            scores,
            fps,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Dense row-major matrix of features: one row per frame (or a single row
/// for video-level descriptors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    video_id: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        video_id: impl Into<String>,
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if rows == 0 || cols == 0 {
            return Err(Error::Validation(format!(
                "feature matrix for {video_id:?} must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite feature at row {}, col {} for video {video_id:?}",
                i / cols,
                i % cols
            )));
        }
        Ok(Self {
            video_id,
            rows,
            cols,
            data,
        })
    }

    pub fn from_rows(video_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let video_id = video_id.into();
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: bad.len(),
            });
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(video_id, rows.len(), cols, data)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Half-open temporal interval in seconds, `0 <= start < end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Segment {
    start: f64,
    end: f64,
}

impl Segment {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start >= 0.0 && start < end) {
            return Err(Error::Validation(format!(
                "invalid segment [{start}, {end}]"
            )));
        }
        Ok(Self { start, end })
    }

    /// Segment covered by the inclusive frame range `first..=last`:
    /// frame `t` spans `[t / fps, (t + 1) / fps)`.
    pub fn from_frames(first: usize, last: usize, fps: f64) -> Result<Self> {
        Self::new(first as f64 / fps, (last + 1) as f64 / fps)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Whether `t` lies in the closed interval `[start, end]`.
    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }
}

impl TryFrom<[f64; 2]> for Segment {
    type Error = Error;

    fn try_from([start, end]: [f64; 2]) -> Result<Self> {
        Segment::new(start, end)
    }
}

impl From<Segment> for [f64; 2] {
    fn from(s: Segment) -> Self {
        [s.start, s.end]
    }
}

/// A scored, unlabeled activity candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub segment: Segment,
    /// Mean frame score over the run.
    pub score: f64,
    pub first_frame: usize,
    /// Inclusive.
    pub last_frame: usize,
}

impl Proposal {
    pub fn frame_count(&self) -> usize {
        self.last_frame - self.first_frame + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub video_id: String,
    pub class_id: usize,
    pub segment: Segment,
    pub score: f64,
}

/// Bidirectional map between label strings and dense class ids. Ids follow
/// lexicographic label order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelTable {
    names: Vec<String>,
}

impl LabelTable {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = labels.into_iter().map(Into::into).collect();
        names.sort();
        names.dedup();
        Self { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(label)).ok()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub class_id: usize,
    pub segment: Segment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoAnnotations {
    pub duration: f64,
    pub subset: String,
    pub annotations: Vec<Annotation>,
}

impl VideoAnnotations {
    /// Distinct class ids annotated in this video, ascending.
    pub fn class_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.annotations.iter().map(|a| a.class_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub videos: BTreeMap<String, VideoAnnotations>,
    pub labels: LabelTable,
}

impl GroundTruth {
    /// Checks segment bounds and class ids against the label table.
    pub fn validate(&self) -> Result<()> {
        for (video_id, video) in &self.videos {
            if !(video.duration.is_finite() && video.duration > 0.0) {
                return Err(Error::Validation(format!(
                    "video {video_id:?} has invalid duration {}",
                    video.duration
                )));
            }
            for ann in &video.annotations {
                if ann.class_id >= self.labels.len() {
                    return Err(Error::Validation(format!(
                        "video {video_id:?} references class id {} outside the label table",
                        ann.class_id
                    )));
                }
                if ann.segment.end() > video.duration {
                    return Err(Error::Validation(format!(
                        "video {video_id:?}: annotation [{}, {}] lies outside [0, {}]",
                        ann.segment.start(),
                        ann.segment.end(),
                        video.duration
                    )));
                }
            }
        }
        Ok(())
    }

    /// Restricts to one subset; `"all"` keeps every video.
    pub fn subset(&self, subset: &str) -> GroundTruth {
        GroundTruth {
            videos: self
                .videos
                .iter()
                .filter(|(_, v)| subset == "all" || v.subset == subset)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Binary frame labeling and its energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub labels: Vec<u8>,
    pub energy: f64,
}

impl Labeling {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn switch_count(&self) -> usize {
        self.labels.windows(2).filter(|w| w[0] != w[1]).count()
    }
}
