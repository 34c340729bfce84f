//! Training orchestration.
//!
//! One engine drives both entry points: [`train_reg_pinn`] trains against
//! the composite loss with the configured regularization weight, while
//! [`train_vanilla`] forces the effective weight to zero and otherwise
//! runs the identical code path — so a zero-lambda regularized run and a
//! vanilla run are bit-identical by construction.
//!
//! Randomness is split into independent streams of one seed: network
//! initialization uses the seed directly, the train/test split uses
//! stream 1, and the per-epoch batch shuffle uses stream 2. Repeating a
//! configuration reproduces the run exactly.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::CrossingRecord;
use crate::error::{Error, Result};
use crate::models::{BoundaryModel, EmpiricalModel, OverfitForm, ShueForm, THETA_MAX};
use crate::nn::{
    loss_and_gradients, loss_value, rmsprop_step, LossBreakdown, Mlp, PenaltyKind, RmsPropState,
    DEFAULT_LAYER_SIZES,
};

/// Which empirical model supplies regression targets during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegModel {
    None,
    Shue(ShueForm),
    Overfit(OverfitForm),
}

impl RegModel {
    pub fn id(&self) -> &'static str {
        match self {
            RegModel::None => "none",
            RegModel::Shue(_) => "shue",
            RegModel::Overfit(_) => "overfit",
        }
    }

    fn as_model(&self) -> Option<EmpiricalModel> {
        match self {
            RegModel::None => None,
            RegModel::Shue(f) => Some(EmpiricalModel::Shue(*f)),
            RegModel::Overfit(f) => Some(EmpiricalModel::Overfit(*f)),
        }
    }
}

/// Hyperparameters for one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Regularization weight on `l_reg`.
    pub lambda: f64,
    /// RMSProp learning rate.
    pub eta: f64,
    pub max_epochs: usize,
    /// Stop once the full-training-set `l_total` falls to this value or
    /// below; 0 disables early stopping.
    pub epsilon_threshold: f64,
    /// Fraction of records in the training split, in (0, 1).
    pub split_fraction: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub penalty: PenaltyKind,
    pub regularizer: RegModel,
    pub layer_sizes: Vec<usize>,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            eta: 1e-3,
            max_epochs: 500,
            epsilon_threshold: 0.0,
            split_fraction: 0.8,
            seed: 0,
            batch_size: 256,
            penalty: PenaltyKind::None,
            regularizer: RegModel::None,
            layer_sizes: DEFAULT_LAYER_SIZES.to_vec(),
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if !self.epsilon_threshold.is_finite() || self.epsilon_threshold < 0.0 {
            return Err(Error::Config(format!(
                "loss threshold must be finite and nonnegative, got {}",
                self.epsilon_threshold
            )));
        }
        if !(0.0 < self.split_fraction && self.split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        self.penalty.validate()?;
        match self.regularizer {
            RegModel::None => {}
            RegModel::Shue(f) => f.validate()?,
            RegModel::Overfit(f) => f.validate()?,
        }
        // eta/decay/epsilon and layer sizes are validated where they are
        // consumed (optimizer state and network construction).
        Ok(())
    }
}

/// Why the epoch loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Full-training-set loss reached the configured threshold.
    Threshold,
    /// Ran the configured number of epochs.
    MaxEpochs,
    /// The loss became non-finite at this (1-based) epoch; training
    /// aborted, keeping the history of the completed finite epochs.
    NonFinite { epoch: usize },
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopReason::Threshold => write!(f, "threshold"),
            StopReason::MaxEpochs => write!(f, "max_epochs"),
            StopReason::NonFinite { epoch } => write!(f, "non_finite(epoch={epoch})"),
        }
    }
}

/// A trained network with its loss history and split bookkeeping.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub mlp: Mlp,
    /// Full-training-set loss after each completed epoch. `lambda` in each
    /// entry is the effective weight the run optimized (0 for vanilla).
    pub history: Vec<LossBreakdown>,
    /// Test-split data loss after each completed epoch.
    pub test_history: Vec<f64>,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    /// Record indices of the training split, in shuffle order.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl TrainResult {
    pub fn final_loss(&self) -> Option<&LossBreakdown> {
        self.history.last()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seeded shuffle split: the first `ceil(fraction * n)` indices of a
/// seeded permutation go to train, the rest to test. Both sides must end
/// up nonempty.
pub fn split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 records to split, got {n}")));
    }
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n_train = (fraction * n as f64).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Config(format!(
            "split fraction {fraction} leaves an empty side for {n} records"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut stream_rng(seed, 1));
    let test = indices.split_off(n_train);
    Ok((indices, test))
}

/// Train against the composite loss with the configured lambda.
pub fn train_reg_pinn(records: &[CrossingRecord], config: &TrainConfig) -> Result<TrainResult> {
    run_training(records, config, config.lambda)
}

/// Train on data alone: the identical engine with the effective lambda
/// forced to zero (`l_reg` is still reported when a regularizer is
/// configured, as a diagnostic).
pub fn train_vanilla(records: &[CrossingRecord], config: &TrainConfig) -> Result<TrainResult> {
    run_training(records, config, 0.0)
}

fn run_training(
    records: &[CrossingRecord],
    config: &TrainConfig,
    lambda: f64,
) -> Result<TrainResult> {
    config.validate()?;
    let reg_model = config.regularizer.as_model();

    let mut features = Vec::with_capacity(records.len());
    let mut targets = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let d = rec.drivers.ok_or_else(|| {
            Error::Config(format!("record {i} has no drivers; merge before training"))
        })?;
        if reg_model.is_some() && rec.polar.theta > THETA_MAX {
            return Err(Error::Config(format!(
                "record {i} has theta {} beyond the regularizer's range {THETA_MAX:.6}",
                rec.polar.theta
            )));
        }
        features.push([d.bz, d.dp, rec.polar.theta]);
        targets.push(rec.polar.r);
    }

    let (train_indices, test_indices) = split(records.len(), config.split_fraction, config.seed)?;

    let train_x: Vec<[f64; 3]> = train_indices.iter().map(|&i| features[i]).collect();
    let train_y: Vec<f64> = train_indices.iter().map(|&i| targets[i]).collect();
    let test_x: Vec<[f64; 3]> = test_indices.iter().map(|&i| features[i]).collect();
    let test_y: Vec<f64> = test_indices.iter().map(|&i| targets[i]).collect();

    // Regularizer predictions at the training inputs, fixed for the run.
    let train_reg: Option<Vec<f64>> = match &reg_model {
        Some(model) => Some(
            train_x
                .iter()
                .map(|&[bz, dp, theta]| model.predict_r(bz, dp, theta))
                .collect::<Result<_>>()?,
        ),
        None => None,
    };

    let mut mlp = Mlp::new(&config.layer_sizes, config.seed)?;
    mlp.fit_normalization(&train_x)?;
    let mut optimizer = RmsPropState::with_params(
        &mlp,
        config.eta,
        config.rmsprop_decay,
        config.rmsprop_epsilon,
    )?;
    let mut shuffle_rng = stream_rng(config.seed, 2);

    let n_train = train_x.len();
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut batch_x: Vec<[f64; 3]> = Vec::with_capacity(config.batch_size);
    let mut batch_y: Vec<f64> = Vec::with_capacity(config.batch_size);
    let mut batch_reg: Vec<f64> = Vec::with_capacity(config.batch_size);

    let mut history: Vec<LossBreakdown> = Vec::new();
    let mut test_history: Vec<f64> = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            batch_x.clear();
            batch_y.clear();
            batch_reg.clear();
            for &p in chunk {
                batch_x.push(train_x[p]);
                batch_y.push(train_y[p]);
                if let Some(reg) = &train_reg {
                    batch_reg.push(reg[p]);
                }
            }
            let reg_slice = train_reg.as_ref().map(|_| batch_reg.as_slice());
            let (_, grads) =
                loss_and_gradients(&mlp, &batch_x, &batch_y, reg_slice, lambda, config.penalty)?;
            rmsprop_step(&mut mlp, &mut optimizer, &grads)?;
        }

        let train_loss = loss_value(
            &mlp,
            &train_x,
            &train_y,
            train_reg.as_deref(),
            lambda,
            config.penalty,
        )?;
        if !train_loss.l_total.is_finite() {
            stop_reason = StopReason::NonFinite { epoch };
            break;
        }
        let test_loss =
            loss_value(&mlp, &test_x, &test_y, None, 0.0, PenaltyKind::None)?.l_data;
        history.push(train_loss);
        test_history.push(test_loss);

        if train_loss.l_total <= config.epsilon_threshold {
            stop_reason = StopReason::Threshold;
            break;
        }
    }

    let epochs_run = history.len();
    Ok(TrainResult {
        mlp,
        history,
        test_history,
        epochs_run,
        stop_reason,
        train_indices,
        test_indices,
    })
}

/// Write the run artifacts into `dir` (created if missing): `loss.csv`
/// with the training-loss decomposition per epoch, `test_loss.csv`,
/// `model.json`, and the split index files.
pub fn write_run_artifacts(dir: &Path, result: &TrainResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let loss_path = dir.join("loss.csv");
    let mut out = String::from("epoch,l_data,l_reg,penalty,l_total\n");
    for (i, b) in result.history.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            b.l_data,
            b.l_reg,
            b.penalty,
            b.l_total
        ));
    }
    std::fs::write(&loss_path, out).map_err(|e| Error::io(&loss_path, e))?;

    let test_path = dir.join("test_loss.csv");
    let mut out = String::from("epoch,test_l_data\n");
    for (i, v) in result.test_history.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, v));
    }
    std::fs::write(&test_path, out).map_err(|e| Error::io(&test_path, e))?;

    result.mlp.save(&dir.join("model.json"))?;

    for (name, indices) in [
        ("train_indices.txt", &result.train_indices),
        ("test_indices.txt", &result.test_indices),
    ] {
        let path = dir.join(name);
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for idx in indices {
            writeln!(w, "{idx}").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
