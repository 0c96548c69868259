use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Detection, Proposal, ScoreVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    /// Top video-level classes that receive detections.
    pub n_classes: usize,
    /// Top proposals labeled per class.
    pub n_proposals: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            n_classes: 1,
            n_proposals: 2,
        }
    }
}

/// Labels the top proposals with the top video classes. Each detection is
/// scored `fused[c] * proposal.score`; output is sorted by score, ties by
/// class rank then proposal rank. Proposals are expected best-first.
pub fn assemble_detections(
    fused: &ScoreVector,
    proposals: &[Proposal],
    cfg: &DetectConfig,
) -> Result<Vec<Detection>> {
    if fused.is_empty() {
        return Err(Error::InvalidArgument("empty fused score vector".into()));
    }
    if cfg.n_classes == 0 || cfg.n_proposals == 0 {
        return Err(Error::InvalidArgument(
            "n_classes and n_proposals must be >= 1".into(),
        ));
    }
    let classes = fused.ranked_classes();
    let mut out = Vec::new();
    for &class_id in classes.iter().take(cfg.n_classes) {
        let class_score = fused.values()[class_id];
        for p in proposals.iter().take(cfg.n_proposals) {
            out.push(Detection {
                video_id: fused.video_id().to_owned(),
                class_id,
                segment: p.segment,
                score: class_score * p.score,
            });
        }
    }
    // Stable sort keeps (class rank, proposal rank) order among equal scores.
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(out)
}
