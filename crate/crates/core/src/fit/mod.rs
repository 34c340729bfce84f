//! Coefficient estimation for the empirical boundary forms.
//!
//! A [`FitProblem`] pairs merged crossing records with an initial
//! parameter form, a mask choosing which coefficients move, and box
//! bounds. Two estimators share that setup: damped least squares
//! ([`least_squares_fit`]) and random-walk Metropolis sampling
//! ([`mcmc_sample`]).

mod least_squares;
mod mcmc;

pub use least_squares::{least_squares_fit, FitOutcome};
pub use mcmc::{mcmc_sample, Chain, McmcConfig};

use std::io::Write;
use std::path::Path;

use crate::dataio::CrossingRecord;
use crate::error::{Error, Result};
use crate::models::{BoundaryModel, EmpiricalModel, OverfitForm, ShueForm, THETA_MAX};

/// Which empirical parameterization a fit estimates, with its current
/// coefficient values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamForm {
    Shue(ShueForm),
    Overfit(OverfitForm),
}

pub(crate) const SHUE_COEFF_NAMES: [&str; 8] =
    ["a0", "a1", "a2", "a3", "p_r", "b0", "b1", "b2"];
pub(crate) const OVERFIT_COEFF_NAMES: [&str; 11] = [
    "c0", "c1", "c2", "c3", "c4", "c5", "c6", "q_r", "d0", "d1", "q_a",
];

impl ParamForm {
    pub fn form_id(&self) -> &'static str {
        match self {
            ParamForm::Shue(_) => "shue",
            ParamForm::Overfit(_) => "overfit",
        }
    }

    pub fn coefficient_names(&self) -> &'static [&'static str] {
        match self {
            ParamForm::Shue(_) => &SHUE_COEFF_NAMES,
            ParamForm::Overfit(_) => &OVERFIT_COEFF_NAMES,
        }
    }

    pub fn n_coefficients(&self) -> usize {
        self.coefficient_names().len()
    }

    /// Coefficients in declaration order.
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            ParamForm::Shue(f) => vec![f.a0, f.a1, f.a2, f.a3, f.p_r, f.b0, f.b1, f.b2],
            ParamForm::Overfit(f) => vec![
                f.c0, f.c1, f.c2, f.c3, f.c4, f.c5, f.c6, f.q_r, f.d0, f.d1, f.q_a,
            ],
        }
    }

    /// Same variant with all coefficients replaced.
    pub fn with_vec(&self, v: &[f64]) -> Result<ParamForm> {
        if v.len() != self.n_coefficients() {
            return Err(Error::Config(format!(
                "{} form takes {} coefficients, got {}",
                self.form_id(),
                self.n_coefficients(),
                v.len()
            )));
        }
        Ok(match self {
            ParamForm::Shue(_) => ParamForm::Shue(ShueForm {
                a0: v[0],
                a1: v[1],
                a2: v[2],
                a3: v[3],
                p_r: v[4],
                b0: v[5],
                b1: v[6],
                b2: v[7],
            }),
            ParamForm::Overfit(_) => ParamForm::Overfit(OverfitForm {
                c0: v[0],
                c1: v[1],
                c2: v[2],
                c3: v[3],
                c4: v[4],
                c5: v[5],
                c6: v[6],
                q_r: v[7],
                d0: v[8],
                d1: v[9],
                q_a: v[10],
            }),
        })
    }

    pub fn model(&self) -> EmpiricalModel {
        match self {
            ParamForm::Shue(f) => EmpiricalModel::Shue(*f),
            ParamForm::Overfit(f) => EmpiricalModel::Overfit(*f),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ParamForm::Shue(f) => f.validate(),
            ParamForm::Overfit(f) => f.validate(),
        }
    }
}

/// Observation-minus-prediction residuals, Re. Empty input gives an empty
/// vector.
pub fn residuals(form: &ParamForm, records: &[CrossingRecord]) -> Result<Vec<f64>> {
    let model = form.model();
    records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let d = rec.drivers.ok_or_else(|| {
                Error::Config(format!("record {i} has no drivers; merge before fitting"))
            })?;
            Ok(rec.polar.r - model.predict_r(d.bz, d.dp, rec.polar.theta)?)
        })
        .collect()
}

/// Sum of squared residuals.
pub fn sse(form: &ParamForm, records: &[CrossingRecord]) -> Result<f64> {
    Ok(residuals(form, records)?.iter().map(|e| e * e).sum())
}

/// A parameter-estimation task: records, starting form, free mask, bounds.
#[derive(Debug, Clone)]
pub struct FitProblem {
    records: Vec<CrossingRecord>,
    form: ParamForm,
    free: Vec<bool>,
    /// Per-coefficient `(lo, hi)`; only consulted for free coefficients.
    bounds: Vec<(f64, f64)>,
}

impl FitProblem {
    /// Validating constructor. Records must be nonempty, merged, and within
    /// the modeled angle range; the initial form must satisfy its
    /// structural invariants and sit inside the bounds on every free
    /// coefficient.
    pub fn new(
        records: Vec<CrossingRecord>,
        form: ParamForm,
        free: Vec<bool>,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Config("fit needs at least one record".into()));
        }
        for (i, rec) in records.iter().enumerate() {
            if rec.drivers.is_none() {
                return Err(Error::Config(format!(
                    "record {i} has no drivers; merge before fitting"
                )));
            }
            if rec.polar.theta > THETA_MAX {
                return Err(Error::Config(format!(
                    "record {i} has theta {} beyond the modeled range {THETA_MAX:.6}",
                    rec.polar.theta
                )));
            }
        }
        form.validate()?;
        let n = form.n_coefficients();
        if free.len() != n || bounds.len() != n {
            return Err(Error::Config(format!(
                "{} form takes {n} coefficients; free mask has {} and bounds {}",
                form.form_id(),
                free.len(),
                bounds.len()
            )));
        }
        if !free.iter().any(|&f| f) {
            return Err(Error::Config("at least one coefficient must be free".into()));
        }
        let values = form.to_vec();
        let names = form.coefficient_names();
        for j in 0..n {
            if !free[j] {
                continue;
            }
            let (lo, hi) = bounds[j];
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::Config(format!(
                    "bounds for {} must be finite with lo < hi, got ({lo}, {hi})",
                    names[j]
                )));
            }
            if values[j] < lo || values[j] > hi {
                return Err(Error::Config(format!(
                    "initial {} = {} lies outside its bounds ({lo}, {hi})",
                    names[j], values[j]
                )));
            }
        }
        Ok(Self { records, form, free, bounds })
    }

    /// Bounds at `scale` fractional width around each initial coefficient
    /// (0.5 means +/-50%). Free coefficients must be nonzero, otherwise the
    /// scaled box is empty and explicit bounds are required.
    pub fn with_scaled_bounds(
        records: Vec<CrossingRecord>,
        form: ParamForm,
        free: Vec<bool>,
        scale: f64,
    ) -> Result<Self> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::Config(format!(
                "bounds scale must be finite and positive, got {scale}"
            )));
        }
        let values = form.to_vec();
        let names = form.coefficient_names();
        let mut bounds = Vec::with_capacity(values.len());
        for (j, &c) in values.iter().enumerate() {
            if c == 0.0 && free.get(j).copied().unwrap_or(false) {
                return Err(Error::Config(format!(
                    "coefficient {} is zero; scaled bounds are degenerate, pass explicit bounds",
                    names[j]
                )));
            }
            let (a, b) = (c * (1.0 - scale), c * (1.0 + scale));
            bounds.push((a.min(b), a.max(b)));
        }
        Self::new(records, form, free, bounds)
    }

    /// The conventional +/-50% box.
    pub fn with_default_bounds(
        records: Vec<CrossingRecord>,
        form: ParamForm,
        free: Vec<bool>,
    ) -> Result<Self> {
        Self::with_scaled_bounds(records, form, free, 0.5)
    }

    pub fn records(&self) -> &[CrossingRecord] {
        &self.records
    }

    pub fn form(&self) -> &ParamForm {
        &self.form
    }

    pub fn free(&self) -> &[bool] {
        &self.free
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn n_free(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    /// Names of the free coefficients, in declaration order.
    pub fn free_names(&self) -> Vec<String> {
        self.form
            .coefficient_names()
            .iter()
            .zip(&self.free)
            .filter(|(_, &f)| f)
            .map(|(n, _)| n.to_string())
            .collect()
    }

    /// Current values of the free coefficients.
    pub(crate) fn pack_free(&self) -> Vec<f64> {
        self.form
            .to_vec()
            .into_iter()
            .zip(&self.free)
            .filter(|(_, &f)| f)
            .map(|(v, _)| v)
            .collect()
    }

    /// Bounds of the free coefficients, aligned with [`Self::pack_free`].
    pub(crate) fn free_bounds(&self) -> Vec<(f64, f64)> {
        self.bounds
            .iter()
            .zip(&self.free)
            .filter(|(_, &f)| f)
            .map(|(&b, _)| b)
            .collect()
    }

    /// Full form with the free coefficients replaced by `values`.
    pub fn form_with_free(&self, values: &[f64]) -> Result<ParamForm> {
        if values.len() != self.n_free() {
            return Err(Error::Config(format!(
                "expected {} free values, got {}",
                self.n_free(),
                values.len()
            )));
        }
        let mut all = self.form.to_vec();
        let mut it = values.iter();
        for (slot, &f) in all.iter_mut().zip(&self.free) {
            if f {
                *slot = *it.next().expect("length checked");
            }
        }
        self.form.with_vec(&all)
    }
}

/// Write a fit report: metadata first, then one `name = value` line per
/// coefficient. Floats keep full round-trip precision.
pub fn write_fit_report(path: &Path, problem: &FitProblem, outcome: &FitOutcome) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("form = {}\n", outcome.form.form_id()));
    out.push_str(&format!("converged = {}\n", outcome.converged));
    out.push_str(&format!("n_iters = {}\n", outcome.n_iters));
    out.push_str(&format!("initial_sse = {}\n", outcome.initial_sse));
    out.push_str(&format!("sse = {}\n", outcome.sse));
    out.push_str(&format!("singular_retries = {}\n", outcome.singular_retries));
    out.push_str(&format!("free = {}\n", problem.free_names().join(",")));
    for (name, value) in outcome
        .form
        .coefficient_names()
        .iter()
        .zip(outcome.form.to_vec())
    {
        out.push_str(&format!("{name} = {value}\n"));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
