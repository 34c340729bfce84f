//! Composite loss and reverse-mode gradients.
//!
//! The training objective is
//!
//! ```text
//! l_total = l_data + lambda * l_reg + penalty
//! ```
//!
//! where `l_data` is the mean squared error against observations, `l_reg`
//! the mean squared error against an empirical model's predictions at the
//! same inputs, and `penalty` an optional L1/L2/elastic norm on the
//! weights (never the biases).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Matrix, Mlp};

/// Additive decomposition of the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_data: f64,
    /// Mean squared gap between network and regularizer predictions; 0 when
    /// no regularizer is attached.
    pub l_reg: f64,
    pub penalty: f64,
    pub l_total: f64,
    pub lambda: f64,
}

/// Weight-norm penalty attached to the loss. Strengths must be
/// nonnegative; the elastic `mix` blends L1 (`mix`) against L2 (`1 - mix`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum PenaltyKind {
    None,
    L1 { strength: f64 },
    L2 { strength: f64 },
    Elastic { strength: f64, mix: f64 },
}

impl PenaltyKind {
    pub fn validate(&self) -> Result<()> {
        let strength = match *self {
            PenaltyKind::None => return Ok(()),
            PenaltyKind::L1 { strength } | PenaltyKind::L2 { strength } => strength,
            PenaltyKind::Elastic { strength, mix } => {
                if !mix.is_finite() || !(0.0..=1.0).contains(&mix) {
                    return Err(Error::Config(format!(
                        "elastic mix must lie in [0, 1], got {mix}"
                    )));
                }
                strength
            }
        };
        if !strength.is_finite() || strength < 0.0 {
            return Err(Error::Config(format!(
                "penalty strength must be finite and nonnegative, got {strength}"
            )));
        }
        Ok(())
    }

    /// Penalty value and derivative for one weight. The L1 subgradient at
    /// zero is taken as zero.
    #[inline]
    fn term(&self, w: f64) -> (f64, f64) {
        let sign = if w > 0.0 {
            1.0
        } else if w < 0.0 {
            -1.0
        } else {
            0.0
        };
        match *self {
            PenaltyKind::None => (0.0, 0.0),
            PenaltyKind::L1 { strength } => (strength * w.abs(), strength * sign),
            PenaltyKind::L2 { strength } => (strength * w * w, 2.0 * strength * w),
            PenaltyKind::Elastic { strength, mix } => (
                strength * (mix * w.abs() + (1.0 - mix) * w * w),
                strength * (mix * sign + (1.0 - mix) * 2.0 * w),
            ),
        }
    }
}

/// Per-parameter gradients, shaped exactly like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

fn validate_loss_inputs(
    batch: &[[f64; 3]],
    targets: &[f64],
    reg_targets: Option<&[f64]>,
    lambda: f64,
    penalty: PenaltyKind,
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Config("loss needs a nonempty batch".into()));
    }
    if targets.len() != batch.len() {
        return Err(Error::Config(format!(
            "batch has {} rows but {} targets",
            batch.len(),
            targets.len()
        )));
    }
    if let Some(reg) = reg_targets {
        if reg.len() != batch.len() {
            return Err(Error::Config(format!(
                "batch has {} rows but {} regularizer targets",
                batch.len(),
                reg.len()
            )));
        }
        if reg.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("regularizer targets must be finite".into()));
        }
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Config(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    penalty.validate()?;
    if batch.iter().any(|row| row.iter().any(|v| !v.is_finite())) {
        return Err(Error::Domain("batch inputs must be finite".into()));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("targets must be finite".into()));
    }
    Ok(())
}

fn breakdown(
    sum_sq_data: f64,
    sum_sq_reg: f64,
    m: f64,
    lambda: f64,
    penalty_value: f64,
) -> LossBreakdown {
    let l_data = sum_sq_data / m;
    let l_reg = sum_sq_reg / m;
    LossBreakdown {
        l_data,
        l_reg,
        penalty: penalty_value,
        l_total: l_data + lambda * l_reg + penalty_value,
        lambda,
    }
}

fn penalty_total(mlp: &Mlp, penalty: PenaltyKind) -> f64 {
    let mut total = 0.0;
    for w in &mlp.weights {
        for &v in w.data() {
            total += penalty.term(v).0;
        }
    }
    total
}

/// Evaluate the composite loss without gradients.
///
/// `reg_targets` carries the regularizer model's predictions at the batch
/// inputs; pass `None` to train on data alone (`l_reg` reports 0).
pub fn loss_value(
    mlp: &Mlp,
    batch: &[[f64; 3]],
    targets: &[f64],
    reg_targets: Option<&[f64]>,
    lambda: f64,
    penalty: PenaltyKind,
) -> Result<LossBreakdown> {
    validate_loss_inputs(batch, targets, reg_targets, lambda, penalty)?;
    let mut acts = mlp.workspace();
    let mut sum_sq_data = 0.0;
    let mut sum_sq_reg = 0.0;
    for (i, row) in batch.iter().enumerate() {
        let y_hat = mlp.forward_row(*row, &mut acts);
        let e = y_hat - targets[i];
        sum_sq_data += e * e;
        if let Some(reg) = reg_targets {
            let er = y_hat - reg[i];
            sum_sq_reg += er * er;
        }
    }
    Ok(breakdown(
        sum_sq_data,
        sum_sq_reg,
        batch.len() as f64,
        lambda,
        penalty_total(mlp, penalty),
    ))
}

/// Evaluate the composite loss and its exact gradients in one reverse pass.
pub fn loss_and_gradients(
    mlp: &Mlp,
    batch: &[[f64; 3]],
    targets: &[f64],
    reg_targets: Option<&[f64]>,
    lambda: f64,
    penalty: PenaltyKind,
) -> Result<(LossBreakdown, Gradients)> {
    validate_loss_inputs(batch, targets, reg_targets, lambda, penalty)?;
    let m = batch.len() as f64;
    let inv_m = 1.0 / m;
    let n_layers = mlp.weights.len();
    let widest = *mlp.sizes().iter().max().expect("nonempty sizes");

    let mut grads = Gradients::zeros_like(mlp);
    let mut acts = mlp.workspace();
    let mut delta = vec![0.0f64; widest];
    let mut delta_prev = vec![0.0f64; widest];
    let mut sum_sq_data = 0.0;
    let mut sum_sq_reg = 0.0;

    for (i, row) in batch.iter().enumerate() {
        let y_hat = mlp.forward_row(*row, &mut acts);
        let e = y_hat - targets[i];
        sum_sq_data += e * e;
        let mut g_out = 2.0 * inv_m * e;
        if let Some(reg) = reg_targets {
            let er = y_hat - reg[i];
            sum_sq_reg += er * er;
            g_out += lambda * 2.0 * inv_m * er;
        }

        // Output layer is linear, so its delta is the loss derivative.
        delta[0] = g_out;
        let mut width = 1usize;
        for l in (0..n_layers).rev() {
            let x = &acts[l];
            let w = &mlp.weights[l];
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            if l > 0 {
                delta_prev[..w.cols()].fill(0.0);
            }
            for k in 0..width {
                let d = delta[k];
                gb[k] += d;
                let g_row = &mut gw.data_mut()[k * w.cols()..(k + 1) * w.cols()];
                let w_row = w.row(k);
                if l > 0 {
                    for j in 0..w.cols() {
                        g_row[j] += d * x[j];
                        delta_prev[j] += d * w_row[j];
                    }
                } else {
                    for j in 0..w.cols() {
                        g_row[j] += d * x[j];
                    }
                }
            }
            if l > 0 {
                for j in 0..w.cols() {
                    delta_prev[j] *= mlp.activation().derivative_from_output(x[j]);
                }
                width = w.cols();
                std::mem::swap(&mut delta, &mut delta_prev);
            }
        }
    }

    let mut penalty_value = 0.0;
    if !matches!(penalty, PenaltyKind::None) {
        for (w, gw) in mlp.weights.iter().zip(&mut grads.weights) {
            for (v, g) in w.data().iter().zip(gw.data_mut()) {
                let (val, der) = penalty.term(*v);
                penalty_value += val;
                *g += der;
            }
        }
    }

    Ok((
        breakdown(sum_sq_data, sum_sq_reg, m, lambda, penalty_value),
        grads,
    ))
}

/// Penalty value and gradient alone, for inspection and testing.
pub fn penalty_value_and_grad(mlp: &Mlp, penalty: PenaltyKind) -> Result<(f64, Gradients)> {
    penalty.validate()?;
    let mut grads = Gradients::zeros_like(mlp);
    let mut value = 0.0;
    for (w, gw) in mlp.weights.iter().zip(&mut grads.weights) {
        for (v, g) in w.data().iter().zip(gw.data_mut()) {
            let (val, der) = penalty.term(*v);
            value += val;
            *g = der;
        }
    }
    Ok((value, grads))
}
