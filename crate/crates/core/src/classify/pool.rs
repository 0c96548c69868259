use crate::error::{Error, Result};
use crate::types::FeatureMatrix;

/// Column-wise mean over frames, scaled to unit L1 norm.
pub fn mean_pool_l1(frames: &FeatureMatrix) -> Result<Vec<f64>> {
    let n = frames.rows() as f64;
    let mut mean = vec![0.0; frames.cols()];
    for row in frames.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let norm: f64 = mean.iter().map(|m| m.abs()).sum();
    if norm == 0.0 {
        return Err(Error::Degenerate(format!(
            "mean feature of video {:?} is all zero",
            frames.video_id()
        )));
    }
    Ok(mean.into_iter().map(|m| m / norm).collect())
}
