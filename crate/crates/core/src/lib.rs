//! Magnetopause boundary modeling toolkit.
//!
//! The crate covers the full pipeline from raw crossing lists to trained
//! models:
//!
//! * [`models`] — closed-form empirical boundary shapes (single-tanh and
//!   two-tanh standoff/flaring parameterizations) and driver-plane grids.
//! * [`dataio`] — CSV ingestion, solar-wind merging, range filtering,
//!   sliding-window binning, and seeded synthetic data generation.
//! * [`fit`] — coefficient estimation for the empirical forms by damped
//!   least squares and by random-walk Metropolis sampling.
//! * [`nn`] — a from-scratch dense network with reverse-mode gradients,
//!   RMSProp, and the composite data + regularization loss.
//! * [`train`] — seeded train/test splits and the epoch loop for vanilla
//!   and regularized network training.
//! * [`eval`] — RMSE metrics, per-bin error curves, model comparison
//!   tables, and the regularization-weight sweep.
//!
//! Everything stochastic is driven by explicit `u64` seeds; repeated runs
//! with the same seed are bit-identical.

pub mod dataio;
pub mod error;
pub mod eval;
pub mod fit;
pub mod models;
pub mod nn;
pub mod train;

pub use error::{Error, Result};
pub use models::{
    boundary_r, standoff_grid, BoundaryModel, BoundaryParams, DriverInput, EmpiricalModel,
    OverfitForm, PolarPoint, ShueForm, StandoffGrid, THETA_MAX,
};
pub use dataio::{
    bin_records, filter_range, merge, parse_crossings, parse_solarwind, synth_generate, to_polar,
    write_bins, Bin, BinSpec, CrossingRecord, GsmPosition, SolarWindSample, SyntheticDataset,
    UniformRange,
};
pub use fit::{
    least_squares_fit, mcmc_sample, residuals, Chain, FitOutcome, FitProblem, McmcConfig,
    ParamForm,
};
pub use nn::{
    loss_and_gradients, loss_value, penalty_value_and_grad, rmsprop_step, Activation, Gradients,
    LossBreakdown, Matrix, Mlp, PenaltyKind, RmsPropState,
};
pub use train::{
    split, train_reg_pinn, train_vanilla, RegModel, StopReason, TrainConfig, TrainResult,
};
pub use eval::{
    binned_rmse, comparison_table, evaluate, lambda_sweep, rmse, BinAxis, ComparisonEntry,
    ComparisonTable, EvalReport, RmseBin, SweepResult,
};
