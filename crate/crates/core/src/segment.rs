//! Activity proposals from frame scores by exact two-state dynamic
//! programming.
//!
//! A labeling `l_1..l_T` in `{0, 1}` is scored by
//!
//! ```text
//! E(L) = sum_t u(t, l_t) - gamma * #{t >= 2 : l_t != l_{t-1}}
//! ```
//!
//! with unaries `u(t, 1) = s_t` and `u(t, 0) = 1 - s_t`, and
//! `gamma = lambda * alpha` (a Potts penalty `alpha` scaled by `lambda`).
//! The maximizing labeling is piecewise constant; each maximal run of ones
//! becomes a proposal scored by the mean frame score of the run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FrameScoreTrack, Labeling, Proposal, Segment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterConfig {
    pub lambda: f64,
    /// Potts penalty for a label change between consecutive frames.
    pub alpha: f64,
    pub min_proposal_frames: usize,
    pub max_proposals: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            alpha: 0.3,
            min_proposal_frames: 2,
            max_proposals: 2,
        }
    }
}

impl SegmenterConfig {
    /// Config with `lambda = 1` and the given effective penalty.
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            lambda: 1.0,
            alpha: gamma,
            ..Self::default()
        }
    }

    /// Effective switch penalty `lambda * alpha`.
    pub fn gamma(&self) -> f64 {
        self.lambda * self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite()
            && self.lambda >= 0.0
            && self.alpha.is_finite()
            && self.alpha >= 0.0)
        {
            return Err(Error::InvalidArgument(format!(
                "lambda and alpha must be finite and >= 0, got {} and {}",
                self.lambda, self.alpha
            )));
        }
        if self.min_proposal_frames == 0 || self.max_proposals == 0 {
            return Err(Error::InvalidArgument(
                "min_proposal_frames and max_proposals must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Energy of `labels` under scores `scores` and penalty `gamma`. Unaries
/// are summed front to back, then the switch penalty is subtracted; every
/// energy reported by this module goes through here.
pub fn labeling_energy(scores: &[f64], labels: &[u8], gamma: f64) -> f64 {
    let unary: f64 = scores.iter().zip(labels).map(|(&s, &l)| unary(s, l)).sum();
    let switches = labels.windows(2).filter(|w| w[0] != w[1]).count();
    unary - gamma * switches as f64
}

#[inline]
fn unary(s: f64, label: u8) -> f64 {
    if label == 1 {
        s
    } else {
        1.0 - s
    }
}

/// Maximizes the labeling energy over a raw score slice. Ties prefer label 0.
pub fn dp_segment_scores(scores: &[f64], gamma: f64) -> Result<Labeling> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot segment an empty track".into(),
        ));
    }
    if let Some(t) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidArgument(format!(
            "frame {t} score {} outside [0, 1]",
            scores[t]
        )));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be >= 0, got {gamma}"
        )));
    }

    let n = scores.len();
    // back[t][l]: label of frame t-1 on the best path ending in label l at t.
    let mut back = vec![[0u8; 2]; n];
    let mut best = [unary(scores[0], 0), unary(scores[0], 1)];
    for t in 1..n {
        let mut next = [0.0; 2];
        for l in 0..2u8 {
            let from0 = best[0] - if l == 0 { 0.0 } else { gamma };
            let from1 = best[1] - if l == 1 { 0.0 } else { gamma };
            let (prev, value) = if from1 > from0 {
                (1, from1)
            } else {
                (0, from0)
            };
            back[t][l as usize] = prev;
            next[l as usize] = value + unary(scores[t], l);
        }
        best = next;
    }

    let mut labels = vec![0u8; n];
    labels[n - 1] = u8::from(best[1] > best[0]);
    for t in (1..n).rev() {
        labels[t - 1] = back[t][labels[t] as usize];
    }
    let energy = labeling_energy(scores, &labels, gamma);
    Ok(Labeling { labels, energy })
}

pub fn dp_segment(track: &FrameScoreTrack, cfg: &SegmenterConfig) -> Result<Labeling> {
    cfg.validate()?;
    dp_segment_scores(track.scores(), cfg.gamma())
}

/// Maximal runs of ones as proposals, best mean score first (earlier start
/// on ties), keeping at most `max_proposals` runs of at least
/// `min_proposal_frames` frames.
pub fn extract_proposals(
    labeling: &Labeling,
    track: &FrameScoreTrack,
    cfg: &SegmenterConfig,
) -> Result<Vec<Proposal>> {
    cfg.validate()?;
    if labeling.len() != track.len() {
        return Err(Error::DimensionMismatch {
            expected: track.len(),
            got: labeling.len(),
        });
    }
    let scores = track.scores();
    let mut proposals = Vec::new();
    let mut t = 0;
    while t < labeling.len() {
        if labeling.labels[t] != 1 {
            t += 1;
            continue;
        }
        let first = t;
        while t < labeling.len() && labeling.labels[t] == 1 {
            t += 1;
        }
        let last = t - 1;
        if t - first >= cfg.min_proposal_frames {
            let run = &scores[first..=last];
            let score = run.iter().sum::<f64>() / run.len() as f64;
            proposals.push(Proposal {
                segment: Segment::from_frames(first, last, track.fps())?,
                score,
                first_frame: first,
                last_frame: last,
            });
        }
    }
    proposals.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.first_frame.cmp(&b.first_frame))
    });
    proposals.truncate(cfg.max_proposals);
    Ok(proposals)
}

pub fn propose(track: &FrameScoreTrack, cfg: &SegmenterConfig) -> Result<Vec<Proposal>> {
    let labeling = dp_segment(track, cfg)?;
    extract_proposals(&labeling, track, cfg)
}
