//! One-versus-rest linear SVMs trained by Pegasos-style stochastic
//! subgradient descent on the L2-regularized hinge loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, TrainConfig};
use crate::error::{Error, Result};
use crate::types::{FeatureMatrix, ScoreKind, ScoreVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSvm")]
pub struct LinearSvmModel {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSvm {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl TryFrom<RawSvm> for LinearSvmModel {
    type Error = Error;

    fn try_from(raw: RawSvm) -> Result<Self> {
        LinearSvmModel::new(raw.weights, raw.biases)
    }
}

impl LinearSvmModel {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a one-vs-rest model needs at least 2 classes, got {}",
                weights.len()
            )));
        }
        if biases.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                got: biases.len(),
            });
        }
        let dim = weights[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "model dimension must be >= 1".into(),
            ));
        }
        if let Some(row) = weights.iter().find(|w| w.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        if weights
            .iter()
            .flatten()
            .chain(&biases)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("non-finite SVM parameter".into()));
        }
        Ok(Self { weights, biases })
    }

    pub fn class_count(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Raw margins `w_c . x + b_c`.
    pub fn decision(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, x) + b)
            .collect())
    }

    /// Index of the highest margin, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let scores = self.decision(x)?;
        Ok(argmax(&scores))
    }
}

pub fn svm_scores(
    model: &LinearSvmModel,
    video_id: &str,
    kind: ScoreKind,
    x: &[f64],
) -> Result<ScoreVector> {
    ScoreVector::new(video_id, model.decision(x)?, kind)
}

/// Scores every frame, then mean-pools the per-class scores over frames.
pub fn frame_scores(
    frames: &FeatureMatrix,
    model: &LinearSvmModel,
) -> Result<(Vec<Vec<f64>>, ScoreVector)> {
    let per_frame = frames
        .iter_rows()
        .map(|row| model.decision(row))
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = vec![0.0; model.class_count()];
    for row in &per_frame {
        for (p, v) in pooled.iter_mut().zip(row) {
            *p += v;
        }
    }
    let n = per_frame.len() as f64;
    pooled.iter_mut().for_each(|p| *p /= n);
    let pooled = ScoreVector::new(frames.video_id(), pooled, ScoreKind::C3d)?;
    Ok((per_frame, pooled))
}

pub fn train_svm_ovr(
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<LinearSvmModel> {
    train_svm_ovr_traced(x, y, n_classes, cfg).map(|(m, _)| m)
}

/// Like [`train_svm_ovr`], also returning each class's objective value
/// after every epoch.
pub fn train_svm_ovr_traced(
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<(LinearSvmModel, Vec<Vec<f64>>)> {
    cfg.validate()?;
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} outside [0, {n_classes})"
        )));
    }
    let mut distinct: Vec<usize> = y.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 distinct classes to train, found {}",
            distinct.len()
        )));
    }

    let per_class: Vec<(Vec<f64>, Vec<f64>)> = (0..n_classes)
        .into_par_iter()
        .map(|c| {
            let targets: Vec<f64> = y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            pegasos(x, &targets, cfg, derive_seed(cfg.seed, c as u64))
        })
        .collect();

    let dim = x.cols();
    let mut weights = Vec::with_capacity(n_classes);
    let mut biases = Vec::with_capacity(n_classes);
    let mut traces = Vec::with_capacity(n_classes);
    for (mut w, trace) in per_class {
        biases.push(w[dim]);
        w.truncate(dim);
        weights.push(w);
        traces.push(trace);
    }
    Ok((LinearSvmModel::new(weights, biases)?, traces))
}

/// Binary Pegasos with the bias folded in as a constant feature. The
/// stochastic iterate is checked at the end of every epoch and the one with
/// the lowest objective so far is kept. Returns the kept augmented weight
/// vector (bias last) and its objective after each epoch.
fn pegasos(
    x: &FeatureMatrix,
    targets: &[f64],
    cfg: &TrainConfig,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let dim = x.cols();
    let lambda = cfg.regularization;
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; dim + 1];
    let mut order: Vec<usize> = (0..x.rows()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut best = w.clone();
    let mut best_objective = f64::INFINITY;
    let mut step = 0u64;
    for _ in 0..cfg.epochs {
        for &i in &order {
            step += 1;
            let eta = 1.0 / (lambda * step as f64);
            let row = x.row(i);
            let margin = targets[i] * (dot(&w[..dim], row) + w[dim]);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                let g = eta * targets[i];
                for (wj, xj) in w.iter_mut().zip(row) {
                    *wj += g * xj;
                }
                w[dim] += g;
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
            }
        }
        let current = objective(&w, x, targets, lambda);
        if current < best_objective {
            best_objective = current;
            best.copy_from_slice(&w);
        }
        trace.push(best_objective);
    }
    (best, trace)
}

fn objective(w: &[f64], x: &FeatureMatrix, targets: &[f64], lambda: f64) -> f64 {
    let dim = x.cols();
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = x
        .iter_rows()
        .zip(targets)
        .map(|(row, y)| (1.0 - y * (dot(&w[..dim], row) + w[dim])).max(0.0))
        .sum();
    reg + hinge / x.rows() as f64
}

/// Regularized hinge objective of class `class` of a trained model, with
/// the bias regularized alongside the weights as during training.
pub fn svm_objective(
    model: &LinearSvmModel,
    class: usize,
    x: &FeatureMatrix,
    y: &[usize],
    lambda: f64,
) -> f64 {
    let mut w = model.weights[class].clone();
    w.push(model.biases[class]);
    let targets: Vec<f64> = y
        .iter()
        .map(|&l| if l == class { 1.0 } else { -1.0 })
        .collect();
    objective(&w, x, &targets, lambda)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
