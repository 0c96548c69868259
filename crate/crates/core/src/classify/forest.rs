//! Binary random forest on frame features, grown with Gini impurity.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, TrainConfig};
use crate::error::{Error, Result};
use crate::types::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        positive_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawForest")]
pub struct RandomForestModel {
    /// Each tree is a node arena rooted at index 0.
    trees: Vec<Vec<TreeNode>>,
    dim: usize,
    max_depth: usize,
    seed: u64,
}

#[derive(Deserialize)]
struct RawForest {
    trees: Vec<Vec<TreeNode>>,
    dim: usize,
    max_depth: usize,
    seed: u64,
}

impl TryFrom<RawForest> for RandomForestModel {
    type Error = Error;

    fn try_from(raw: RawForest) -> Result<Self> {
        RandomForestModel::new(raw.trees, raw.dim, raw.max_depth, raw.seed)
    }
}

impl RandomForestModel {
    pub fn new(trees: Vec<Vec<TreeNode>>, dim: usize, max_depth: usize, seed: u64) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidArgument("forest has no trees".into()));
        }
        for (t, tree) in trees.iter().enumerate() {
            if tree.is_empty() {
                return Err(Error::InvalidArgument(format!("tree {t} is empty")));
            }
            for node in tree {
                match *node {
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        if feature >= dim
                            || !threshold.is_finite()
                            || left >= tree.len()
                            || right >= tree.len()
                        {
                            return Err(Error::InvalidArgument(format!(
                                "tree {t} has an invalid split node"
                            )));
                        }
                    }
                    TreeNode::Leaf { positive_fraction } => {
                        if !(0.0..=1.0).contains(&positive_fraction) {
                            return Err(Error::InvalidArgument(format!(
                                "tree {t} has leaf fraction {positive_fraction} outside [0, 1]"
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self {
            trees,
            dim,
            max_depth,
            seed,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trees(&self) -> &[Vec<TreeNode>] {
        &self.trees
    }
}

fn leaf_value(tree: &[TreeNode], x: &[f64]) -> f64 {
    let mut at = 0;
    loop {
        match tree[at] {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => at = if x[feature] <= threshold { left } else { right },
            TreeNode::Leaf { positive_fraction } => return positive_fraction,
        }
    }
}

/// Mean leaf positive fraction across trees.
pub fn rf_positive_score(model: &RandomForestModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            got: x.len(),
        });
    }
    let total: f64 = model.trees.iter().map(|t| leaf_value(t, x)).sum();
    Ok((total / model.trees.len() as f64).clamp(0.0, 1.0))
}

pub fn train_random_forest(
    x: &FeatureMatrix,
    y: &[u8],
    cfg: &TrainConfig,
) -> Result<RandomForestModel> {
    cfg.validate()?;
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::InvalidArgument(
            "forest labels must be 0 or 1".into(),
        ));
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::InvalidArgument(
            "forest training needs both positive and negative samples".into(),
        ));
    }

    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, t as u64));
            let n = x.rows();
            let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut grower = Grower {
                x,
                y,
                cfg,
                rng,
                nodes: Vec::new(),
            };
            grower.grow(bootstrap, 0);
            grower.nodes
        })
        .collect();
    RandomForestModel::new(trees, x.cols(), cfg.max_depth, cfg.seed)
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    y: &'a [u8],
    cfg: &'a TrainConfig,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

struct Split {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    /// Grows the subtree for `samples` and returns its node index.
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        let positives = samples.iter().filter(|&&i| self.y[i] == 1).count();
        let fraction = positives as f64 / samples.len() as f64;
        self.nodes.push(TreeNode::Leaf {
            positive_fraction: fraction,
        });

        let pure = positives == 0 || positives == samples.len();
        if depth >= self.cfg.max_depth || pure || samples.len() < 2 {
            return at;
        }
        let parent = gini(positives, samples.len());
        let Some(best) = self.best_split(&samples) else {
            return at;
        };
        if best.impurity >= parent {
            return at;
        }
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| self.x.row(i)[best.feature] <= best.threshold);
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&mut self, samples: &[usize]) -> Option<Split> {
        let dim = self.x.cols();
        let k = self.cfg.feature_subsample.min(dim);
        let mut features = sample(&mut self.rng, dim, k).into_vec();
        features.sort_unstable();

        let n = samples.len();
        let total_pos = samples.iter().filter(|&&i| self.y[i] == 1).count();
        let mut best: Option<Split> = None;
        let mut column: Vec<(f64, u8)> = Vec::with_capacity(n);
        for feature in features {
            column.clear();
            column.extend(samples.iter().map(|&i| (self.x.row(i)[feature], self.y[i])));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for j in 0..n - 1 {
                left_pos += usize::from(column[j].1);
                if column[j].0 == column[j + 1].0 {
                    continue;
                }
                let n_left = j + 1;
                let n_right = n - n_left;
                let impurity = (n_left as f64 * gini(left_pos, n_left)
                    + n_right as f64 * gini(total_pos - left_pos, n_right))
                    / n as f64;
                let threshold = 0.5 * (column[j].0 + column[j + 1].0);
                // Features are visited in ascending order and thresholds
                // ascend within a feature, so strict improvement keeps the
                // lowest (feature, threshold) among equal impurities.
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    best = Some(Split {
                        impurity,
                        feature,
                        threshold,
                    });
                }
            }
        }
        best
    }
}

fn gini(positives: usize, n: usize) -> f64 {
    let p = positives as f64 / n as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data() -> (FeatureMatrix, Vec<u8>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            rows.push(vec![-0.5 - i as f64 * 0.3]);
            y.push(0);
            rows.push(vec![0.5 + i as f64 * 0.3]);
            y.push(1);
        }
        (FeatureMatrix::from_rows("toy", &rows).unwrap(), y)
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            n_trees: 10,
            max_depth: 3,
            feature_subsample: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separates_a_line_perfectly() {
        let (x, y) = line_data();
        let forest = train_random_forest(&x, &y, &cfg()).unwrap();
        for (row, &label) in x.iter_rows().zip(&y) {
            let s = rf_positive_score(&forest, row).unwrap();
            assert_eq!(u8::from(s > 0.5), label, "x={row:?} score={s}");
        }
        assert!(rf_positive_score(&forest, &[2.0]).unwrap() >= 0.9);
    }

    #[test]
    fn same_seed_same_trees() {
        let (x, y) = line_data();
        let a = train_random_forest(&x, &y, &cfg()).unwrap();
        let b = train_random_forest(&x, &y, &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_rejected() {
        let (x, _) = line_data();
        let y = vec![1; x.rows()];
        assert!(train_random_forest(&x, &y, &cfg()).is_err());
    }

    #[test]
    fn unanimous_and_split_votes() {
        let leaf = |f| {
            vec![TreeNode::Leaf {
                positive_fraction: f,
            }]
        };
        let all = RandomForestModel::new(vec![leaf(1.0), leaf(1.0)], 1, 1, 0).unwrap();
        assert_eq!(rf_positive_score(&all, &[0.0]).unwrap(), 1.0);
        let half =
            RandomForestModel::new(vec![leaf(1.0), leaf(0.0), leaf(1.0), leaf(0.0)], 1, 1, 0)
                .unwrap();
        assert_eq!(rf_positive_score(&half, &[0.0]).unwrap(), 0.5);
        assert!(rf_positive_score(&half, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn invalid_nodes_rejected() {
        let split = TreeNode::Split {
            feature: 3,
            threshold: 0.0,
            left: 1,
            right: 2,
        };
        let tree = vec![
            split,
            TreeNode::Leaf {
                positive_fraction: 0.0,
            },
            TreeNode::Leaf {
                positive_fraction: 1.0,
            },
        ];
        assert!(RandomForestModel::new(vec![tree], 2, 1, 0).is_err());
        let bad_leaf = vec![TreeNode::Leaf {
            positive_fraction: 1.5,
        }];
        assert!(RandomForestModel::new(vec![bad_leaf], 2, 1, 0).is_err());
    }

    #[test]
    fn split_ties_prefer_lowest_feature() {
        // Features 0 and 1 are identical, so both give the same impurity.
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<u8> = (0..8).map(|i| u8::from(i >= 4)).collect();
        let x = FeatureMatrix::from_rows("toy", &rows).unwrap();
        let cfg = TrainConfig {
            n_trees: 1,
            max_depth: 1,
            feature_subsample: 2,
            ..TrainConfig::default()
        };
        let forest = train_random_forest(&x, &y, &cfg).unwrap();
        match forest.trees()[0][0] {
            TreeNode::Split { feature, .. } => assert_eq!(feature, 0),
            ref other => panic!("expected a split, got {other:?}"),
        }
    }
}
