//! Video- and frame-level classifiers and score fusion.

mod forest;
mod fusion;
mod pool;
mod svm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{rf_positive_score, train_random_forest, RandomForestModel, TreeNode};
pub use fusion::{stack_scores, topk_normalize, DEFAULT_TOPK};
pub use pool::mean_pool_l1;
pub use svm::{
    frame_scores, svm_objective, svm_scores, train_svm_ovr, train_svm_ovr_traced, LinearSvmModel,
};

/// Hyperparameters shared by the SVM and random forest trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// L2 regularization strength of the SVM objective.
    pub regularization: f64,
    pub seed: u64,
    pub n_trees: usize,
    pub max_depth: usize,
    /// Candidate features examined per forest split.
    pub feature_subsample: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            regularization: 1e-3,
            seed: 7,
            n_trees: 10,
            max_depth: 6,
            feature_subsample: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(self.regularization.is_finite() && self.regularization > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization must be > 0, got {}",
                self.regularization
            )));
        }
        if self.n_trees == 0 || self.max_depth == 0 || self.feature_subsample == 0 {
            return Err(Error::InvalidArgument(
                "n_trees, max_depth and feature_subsample must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Derives an independent stream seed from a master seed (SplitMix64
/// finalizer), so per-class and per-tree work is order-independent.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
