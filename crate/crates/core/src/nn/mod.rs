//! From-scratch dense feedforward network.
//!
//! Networks map the standardized driver/geometry triple `(bz, dp, theta)`
//! to a boundary radius. Hidden layers use tanh, the output layer is
//! linear, and per-feature input standardization is part of the model (it
//! is fitted once on the training split and travels with the saved
//! artifact). Everything is `f64`; there is no graph machinery — gradients
//! come from a hand-written reverse pass in [`loss`].

mod loss;
mod optim;

pub use loss::{
    loss_and_gradients, loss_value, penalty_value_and_grad, Gradients, LossBreakdown, PenaltyKind,
};
pub use optim::{rmsprop_step, RmsPropState};

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::BoundaryModel;

/// Layer widths used by the reference experiments.
pub const DEFAULT_LAYER_SIZES: [usize; 6] = [3, 27, 81, 27, 9, 1];

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Hidden-layer activation. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Four-lane dot product: fixed summation order, no bounds checks in the
/// hot loop.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let split = a.len() - a.len() % 4;
    let (a4, a_tail) = a.split_at(split);
    let (b4, b_tail) = b.split_at(split);
    let mut acc = [0.0f64; 4];
    for (ca, cb) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let tail: f64 = a_tail.iter().zip(b_tail).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Layered feedforward network with built-in input standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// `weights[l]` is `sizes[l+1] x sizes[l]`.
    pub weights: Vec<Matrix>,
    /// `biases[l]` has length `sizes[l+1]`.
    pub biases: Vec<Vec<f64>>,
    activation: Activation,
    norm_mean: Vec<f64>,
    norm_std: Vec<f64>,
}

impl Mlp {
    /// Build a network with Xavier-uniform weights and zero biases.
    ///
    /// Weights are drawn layer by layer in row-major order from
    /// `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`, so a given seed
    /// always produces the same network. Standardization starts as the
    /// identity.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config(format!(
                "need an input and an output layer, got sizes {sizes:?}"
            )));
        }
        if sizes[0] != 3 {
            return Err(Error::Config(format!(
                "input layer must have width 3 for (bz, dp, theta), got {}",
                sizes[0]
            )));
        }
        if *sizes.last().expect("nonempty") != 1 {
            return Err(Error::Config(format!(
                "output layer must have width 1, got {}",
                sizes.last().expect("nonempty")
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!("layer widths must be positive: {sizes:?}")));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut m = Matrix::zeros(fan_out, fan_in);
            for w in m.data_mut() {
                *w = (2.0 * rng.gen::<f64>() - 1.0) * bound;
            }
            weights.push(m);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            activation: Activation::Tanh,
            norm_mean: vec![0.0; 3],
            norm_std: vec![1.0; 3],
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Total number of trainable parameters.
    pub fn n_params(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.data.len())
            .chain(self.biases.iter().map(Vec::len))
            .sum()
    }

    /// `(mean, std)` of the per-feature standardization.
    pub fn normalization(&self) -> (&[f64], &[f64]) {
        (&self.norm_mean, &self.norm_std)
    }

    /// Install a fixed per-feature standardization.
    pub fn set_normalization(&mut self, mean: Vec<f64>, std: Vec<f64>) -> Result<()> {
        if mean.len() != 3 || std.len() != 3 {
            return Err(Error::Config(format!(
                "normalization needs 3 means and 3 stds, got {} and {}",
                mean.len(),
                std.len()
            )));
        }
        for (name, list) in [("mean", &mean), ("std", &std)] {
            if list.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("normalization {name} must be finite")));
            }
        }
        if std.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("normalization stds must be positive".into()));
        }
        self.norm_mean = mean;
        self.norm_std = std;
        Ok(())
    }

    /// Fit the standardization to a batch (population mean/std per feature).
    pub fn fit_normalization(&mut self, rows: &[[f64; 3]]) -> Result<()> {
        if rows.is_empty() {
            return Err(Error::Config("cannot fit normalization to an empty batch".into()));
        }
        let m = rows.len() as f64;
        let mut mean = [0.0f64; 3];
        for row in rows {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        for acc in &mut mean {
            *acc /= m;
        }
        let mut var = [0.0f64; 3];
        for row in rows {
            for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - mu;
                *acc += d * d;
            }
        }
        let mut std = [0.0f64; 3];
        for (s, v) in std.iter_mut().zip(&var) {
            *s = (v / m).sqrt();
        }
        if std.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(Error::Config(
                "cannot standardize: a feature is constant over the batch".into(),
            ));
        }
        self.set_normalization(mean.to_vec(), std.to_vec())
    }

    /// Per-layer activation buffers sized for this network.
    pub(crate) fn workspace(&self) -> Vec<Vec<f64>> {
        self.sizes.iter().map(|&s| vec![0.0; s]).collect()
    }

    /// One forward pass; `acts` must come from [`Mlp::workspace`]. After the
    /// call `acts[l]` holds layer `l`'s (post-activation) outputs, with
    /// `acts[0]` the standardized input.
    pub(crate) fn forward_row(&self, input: [f64; 3], acts: &mut [Vec<f64>]) -> f64 {
        for i in 0..3 {
            acts[0][i] = (input[i] - self.norm_mean[i]) / self.norm_std[i];
        }
        let last = self.weights.len() - 1;
        for l in 0..=last {
            let (prev, rest) = acts.split_at_mut(l + 1);
            let (x, out) = (&prev[l], &mut rest[0]);
            let w = &self.weights[l];
            let b = &self.biases[l];
            for k in 0..w.rows {
                let z = b[k] + dot(w.row(k), x);
                out[k] = if l == last { z } else { self.activation.apply(z) };
            }
        }
        acts[self.sizes.len() - 1][0]
    }

    /// Predict radii for a batch of `(bz, dp, theta)` rows.
    pub fn forward(&self, inputs: &[[f64; 3]]) -> Result<Vec<f64>> {
        let mut acts = self.workspace();
        inputs
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain(format!(
                        "input row {i} must be finite, got {row:?}"
                    )));
                }
                Ok(self.forward_row(*row, &mut acts))
            })
            .collect()
    }

    /// Predict one radius.
    pub fn predict_one(&self, bz: f64, dp: f64, theta: f64) -> Result<f64> {
        for (name, v) in [("bz", bz), ("dp", dp), ("theta", theta)] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("input {name} must be finite, got {v}")));
            }
        }
        let mut acts = self.workspace();
        Ok(self.forward_row([bz, dp, theta], &mut acts))
    }

    /// Save the network as a versioned JSON artifact. Floats keep full
    /// round-trip precision, so load-after-save is bit-identical.
    pub fn save(&self, path: &Path) -> Result<()> {
        let artifact = ModelArtifact {
            version: ARTIFACT_VERSION,
            model: self.clone(),
        };
        let text = serde_json::to_string_pretty(&artifact)
            .map_err(|e| Error::Config(format!("artifact serialization failed: {e}")))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Load a saved artifact, validating version and shape consistency.
    pub fn load(path: &Path) -> Result<Mlp> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let artifact: ModelArtifact = serde_json::from_str(&text)
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.line() as u64,
                message: format!("invalid model artifact: {e}"),
            })?;
        if artifact.version != ARTIFACT_VERSION {
            return Err(Error::Config(format!(
                "unsupported artifact version {} (expected {ARTIFACT_VERSION})",
                artifact.version
            )));
        }
        let m = artifact.model;
        m.validate_shapes()
            .map_err(|e| Error::Config(format!("corrupt artifact {}: {e}", path.display())))?;
        Ok(m)
    }

    fn validate_shapes(&self) -> Result<()> {
        if self.sizes.len() < 2
            || self.weights.len() != self.sizes.len() - 1
            || self.biases.len() != self.weights.len()
        {
            return Err(Error::Config("layer bookkeeping is inconsistent".into()));
        }
        for l in 0..self.weights.len() {
            let w = &self.weights[l];
            if w.rows != self.sizes[l + 1]
                || w.cols != self.sizes[l]
                || w.data.len() != w.rows * w.cols
                || self.biases[l].len() != w.rows
            {
                return Err(Error::Config(format!("layer {l} shapes are inconsistent")));
            }
        }
        if self.norm_mean.len() != 3 || self.norm_std.len() != 3 {
            return Err(Error::Config("normalization vectors must have length 3".into()));
        }
        if self.norm_std.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Config("normalization stds must be positive".into()));
        }
        Ok(())
    }
}

impl BoundaryModel for Mlp {
    fn predict_r(&self, bz: f64, dp: f64, theta: f64) -> Result<f64> {
        self.predict_one(bz, dp, theta)
    }

    fn model_id(&self) -> String {
        let widths: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        format!("mlp-{}", widths.join("x"))
    }
}

const ARTIFACT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelArtifact {
    version: u32,
    model: Mlp,
}
