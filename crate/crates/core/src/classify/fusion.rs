//! Score stacking for the meta classifier and top-k normalization.

use crate::error::{Error, Result};
use crate::types::{ScoreKind, ScoreVector};

/// Number of top scores used for normalization.
pub const DEFAULT_TOPK: usize = 3;

const STACK_ORDER: [ScoreKind; 3] = [ScoreKind::Ins, ScoreKind::Mbh, ScoreKind::C3d];

/// Concatenates the `Ins`, `Mbh` and `C3d` vectors of one video, in that
/// order.
pub fn stack_scores(parts: &[ScoreVector]) -> Result<ScoreVector> {
    let kinds: Vec<ScoreKind> = parts.iter().map(ScoreVector::kind).collect();
    if kinds != STACK_ORDER {
        return Err(Error::InvalidArgument(format!(
            "stacking expects parts [ins, mbh, c3d], got {kinds:?}"
        )));
    }
    let first = &parts[0];
    for p in &parts[1..] {
        if p.video_id() != first.video_id() {
            return Err(Error::InvalidArgument(format!(
                "cannot stack scores of videos {:?} and {:?}",
                first.video_id(),
                p.video_id()
            )));
        }
        if p.len() != first.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                got: p.len(),
            });
        }
    }
    let values = parts
        .iter()
        .flat_map(|p| p.values().iter().copied())
        .collect();
    ScoreVector::new(first.video_id(), values, ScoreKind::Stacked)
}

/// Shifts scores so the minimum is zero, then divides by the sum of the `k`
/// largest shifted scores. A constant vector maps to `1/C` everywhere.
pub fn topk_normalize(s: &ScoreVector, k: usize) -> Result<ScoreVector> {
    let c = s.len();
    if k == 0 || k > c {
        return Err(Error::InvalidArgument(format!(
            "top-k normalization needs 1 <= k <= {c}, got {k}"
        )));
    }
    let min = s.values().iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = s.values().iter().map(|v| v - min).collect();
    let mut sorted = shifted.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let denom: f64 = sorted[..k].iter().sum();
    let values = if denom > 0.0 {
        shifted.iter().map(|v| v / denom).collect()
    } else {
        vec![1.0 / c as f64; c]
    };
    ScoreVector::new(s.video_id(), values, ScoreKind::Fused)
}
