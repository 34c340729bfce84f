//! RMSProp parameter updates.

use crate::error::{Error, Result};
use crate::nn::{Gradients, Matrix, Mlp};

/// Squared-gradient accumulator state. One state instance follows one
/// network through training; the accumulators start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState {
    acc_weights: Vec<Matrix>,
    acc_biases: Vec<Vec<f64>>,
    /// Accumulator decay, in `[0, 1)`.
    pub decay: f64,
    /// Denominator guard, positive.
    pub epsilon: f64,
    /// Learning rate, positive.
    pub eta: f64,
}

pub const DEFAULT_DECAY: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 1e-8;

impl RmsPropState {
    /// State with the conventional decay 0.9 and epsilon 1e-8.
    pub fn new(mlp: &Mlp, eta: f64) -> Result<Self> {
        Self::with_params(mlp, eta, DEFAULT_DECAY, DEFAULT_EPSILON)
    }

    pub fn with_params(mlp: &Mlp, eta: f64, decay: f64, epsilon: f64) -> Result<Self> {
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be finite and positive, got {eta}"
            )));
        }
        if !decay.is_finite() || !(0.0..1.0).contains(&decay) {
            return Err(Error::Config(format!("decay must lie in [0, 1), got {decay}")));
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be finite and positive, got {epsilon}"
            )));
        }
        Ok(Self {
            acc_weights: mlp
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            acc_biases: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            decay,
            epsilon,
            eta,
        })
    }

    fn shapes_match(&self, mlp: &Mlp, grads: &Gradients) -> bool {
        self.acc_weights.len() == mlp.weights.len()
            && grads.weights.len() == mlp.weights.len()
            && mlp.weights.iter().zip(&self.acc_weights).zip(&grads.weights).all(
                |((w, a), g)| {
                    w.rows() == a.rows()
                        && w.cols() == a.cols()
                        && w.rows() == g.rows()
                        && w.cols() == g.cols()
                },
            )
            && mlp
                .biases
                .iter()
                .zip(&self.acc_biases)
                .zip(&grads.biases)
                .all(|((b, a), g)| b.len() == a.len() && b.len() == g.len())
    }
}

/// One RMSProp update:
///
/// ```text
/// acc   <- decay * acc + (1 - decay) * g^2
/// param <- param - eta * g / (sqrt(acc) + epsilon)
/// ```
///
/// applied elementwise to every weight and bias.
pub fn rmsprop_step(mlp: &mut Mlp, state: &mut RmsPropState, grads: &Gradients) -> Result<()> {
    if !state.shapes_match(mlp, grads) {
        return Err(Error::Config(
            "optimizer state / gradient shapes do not match the network".into(),
        ));
    }
    let (decay, eps, eta) = (state.decay, state.epsilon, state.eta);
    let one_minus = 1.0 - decay;
    for ((w, acc), g) in mlp
        .weights
        .iter_mut()
        .zip(&mut state.acc_weights)
        .zip(&grads.weights)
    {
        for ((p, a), &gv) in w
            .data_mut()
            .iter_mut()
            .zip(acc.data_mut())
            .zip(g.data())
        {
            *a = decay * *a + one_minus * gv * gv;
            *p -= eta * gv / (a.sqrt() + eps);
        }
    }
    for ((b, acc), g) in mlp
        .biases
        .iter_mut()
        .zip(&mut state.acc_biases)
        .zip(&grads.biases)
    {
        for ((p, a), &gv) in b.iter_mut().zip(acc.iter_mut()).zip(g) {
            *a = decay * *a + one_minus * gv * gv;
            *p -= eta * gv / (a.sqrt() + eps);
        }
    }
    Ok(())
}
