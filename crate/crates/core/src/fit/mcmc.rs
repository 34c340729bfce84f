//! Random-walk Metropolis sampling of the fit posterior.
//!
//! The target is a Gaussian likelihood over the residuals,
//! `exp(-SSE / (2 sigma^2))`, with a uniform prior on the problem's box
//! bounds (zero density outside). Proposals perturb every free
//! coefficient jointly with independent Gaussian steps.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fit::{residuals, FitProblem, ParamForm};

/// Random-walk Metropolis settings.
#[derive(Debug, Clone)]
pub struct McmcConfig {
    /// Recorded steps (the chain length).
    pub n_steps: usize,
    /// Leading steps excluded from the posterior summaries.
    pub burn_in: usize,
    /// Per-free-coefficient Gaussian proposal scales.
    pub proposal_sigma: Vec<f64>,
    pub seed: u64,
    /// Gaussian observation-noise scale, Re. `None` estimates it from the
    /// residual spread at the initial guess.
    pub likelihood_sigma: Option<f64>,
}

impl McmcConfig {
    pub fn validate(&self, n_free: usize) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("chain needs at least one step".into()));
        }
        if self.burn_in >= self.n_steps {
            return Err(Error::Config(format!(
                "burn-in {} must be shorter than the chain ({} steps)",
                self.burn_in, self.n_steps
            )));
        }
        if self.proposal_sigma.len() != n_free {
            return Err(Error::Config(format!(
                "{} proposal scales for {} free coefficients",
                self.proposal_sigma.len(),
                n_free
            )));
        }
        if self.proposal_sigma.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::Config("proposal scales must be finite and positive".into()));
        }
        if let Some(s) = self.likelihood_sigma {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::Config(format!(
                    "likelihood sigma must be finite and positive, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Posterior samples over the free coefficients.
#[derive(Debug, Clone)]
pub struct Chain {
    pub free_names: Vec<String>,
    /// One row per step (burn-in included), one column per free
    /// coefficient.
    pub samples: Vec<Vec<f64>>,
    /// Unnormalized log-posterior at each step.
    pub log_post: Vec<f64>,
    /// Accepted proposals over total steps, in `[0, 1]`.
    pub acceptance_rate: f64,
    pub burn_in: usize,
    /// Post-burn-in summaries (sample standard deviation).
    pub posterior_mean: Vec<f64>,
    pub posterior_std: Vec<f64>,
    /// The observation-noise scale actually used.
    pub likelihood_sigma: f64,
}

impl Chain {
    /// The posterior mean as a full parameter set (fixed coefficients keep
    /// their initial values).
    pub fn posterior_form(&self, problem: &FitProblem) -> Result<ParamForm> {
        problem.form_with_free(&self.posterior_mean)
    }

    /// Dump the chain as CSV: one column per free coefficient plus
    /// `log_post`, one row per step, full float precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut header = self.free_names.join(",");
        header.push_str(",log_post");
        writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
        for (row, lp) in self.samples.iter().zip(&self.log_post) {
            let mut line = row
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(",");
            line.push_str(&format!(",{lp}"));
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn sse_of(res: &[f64]) -> f64 {
    res.iter().map(|e| e * e).sum()
}

/// Sample the fit posterior with random-walk Metropolis.
///
/// A zero acceptance rate is reported in the chain, not raised as an
/// error: the caller decides whether a stuck chain is fatal. The whole
/// walk is driven by `config.seed`; equal seeds give bit-identical chains.
pub fn mcmc_sample(problem: &FitProblem, config: &McmcConfig) -> Result<Chain> {
    config.validate(problem.n_free())?;
    let bounds = problem.free_bounds();
    let k = problem.n_free();

    let mut x = problem.pack_free();
    let init_res = residuals(&problem.form_with_free(&x)?, problem.records())?;
    let sigma = match config.likelihood_sigma {
        Some(s) => s,
        None => {
            let m = init_res.len() as f64;
            let mean = init_res.iter().sum::<f64>() / m;
            let var = init_res.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / m;
            var.sqrt().max(1e-12)
        }
    };
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    let mut log_p = -sse_of(&init_res) * inv_two_sigma_sq;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut samples = Vec::with_capacity(config.n_steps);
    let mut log_post = Vec::with_capacity(config.n_steps);
    let mut accepted = 0usize;
    let mut proposal = vec![0.0; k];

    for _ in 0..config.n_steps {
        let mut in_bounds = true;
        for j in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            proposal[j] = x[j] + config.proposal_sigma[j] * z;
            let (lo, hi) = bounds[j];
            if proposal[j] < lo || proposal[j] > hi {
                in_bounds = false;
            }
        }
        // The uniform draw is consumed on every step so the random stream
        // does not depend on where the walk happens to be.
        let u: f64 = rng.gen();

        if in_bounds {
            let res = residuals(&problem.form_with_free(&proposal)?, problem.records())?;
            let log_p_new = -sse_of(&res) * inv_two_sigma_sq;
            if u.ln() < log_p_new - log_p {
                x.copy_from_slice(&proposal);
                log_p = log_p_new;
                accepted += 1;
            }
        }
        samples.push(x.clone());
        log_post.push(log_p);
    }

    let kept = &samples[config.burn_in..];
    let n_kept = kept.len() as f64;
    let mut posterior_mean = vec![0.0; k];
    for row in kept {
        for (acc, v) in posterior_mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for acc in &mut posterior_mean {
        *acc /= n_kept;
    }
    let mut posterior_std = vec![0.0; k];
    if kept.len() > 1 {
        for row in kept {
            for ((acc, v), mu) in posterior_std.iter_mut().zip(row).zip(&posterior_mean) {
                let d = v - mu;
                *acc += d * d;
            }
        }
        for acc in &mut posterior_std {
            *acc = (*acc / (n_kept - 1.0)).sqrt();
        }
    }

    Ok(Chain {
        free_names: problem.free_names(),
        samples,
        log_post,
        acceptance_rate: accepted as f64 / config.n_steps as f64,
        burn_in: config.burn_in,
        posterior_mean,
        posterior_std,
        likelihood_sigma: sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{synth_generate, CrossingRecord, UniformRange};
    use crate::models::{EmpiricalModel, ShueForm};
    use approx::assert_relative_eq;

    fn shue_records(n: usize, noise: f64, seed: u64) -> Vec<CrossingRecord> {
        synth_generate(
            &EmpiricalModel::Shue(ShueForm::default()),
            n,
            noise,
            seed,
            UniformRange::new(-12.0, 12.0).unwrap(),
            UniformRange::new(1.0, 7.0).unwrap(),
            UniformRange::new(0.0, 2.2).unwrap(),
        )
        .unwrap()
        .records
    }

    fn one_free_problem(records: Vec<CrossingRecord>) -> FitProblem {
        let start = ParamForm::Shue(ShueForm { a0: 10.5, ..ShueForm::default() });
        let mut free = vec![false; 8];
        free[0] = true;
        FitProblem::with_default_bounds(records, start, free).unwrap()
    }

    #[test]
    fn chains_are_seed_deterministic() {
        let problem = one_free_problem(shue_records(60, 0.3, 21));
        let config = McmcConfig {
            n_steps: 400,
            burn_in: 100,
            proposal_sigma: vec![0.02],
            seed: 7,
            likelihood_sigma: Some(0.3),
        };
        let a = mcmc_sample(&problem, &config).unwrap();
        let b = mcmc_sample(&problem, &config).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.log_post, b.log_post);
        assert_eq!(a.acceptance_rate, b.acceptance_rate);

        let c = mcmc_sample(&problem, &McmcConfig { seed: 8, ..config }).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn chain_shape_and_bounds_invariants() {
        let problem = one_free_problem(shue_records(60, 0.3, 22));
        let config = McmcConfig {
            n_steps: 500,
            burn_in: 50,
            proposal_sigma: vec![0.05],
            seed: 3,
            likelihood_sigma: Some(0.3),
        };
        let chain = mcmc_sample(&problem, &config).unwrap();
        assert_eq!(chain.samples.len(), 500);
        assert!(chain.samples.iter().all(|row| row.len() == 1));
        assert_eq!(chain.log_post.len(), 500);
        assert!(chain.acceptance_rate > 0.0 && chain.acceptance_rate <= 1.0);
        // The uniform prior confines every sample to the bounds.
        let (lo, hi) = problem.free_bounds()[0];
        for row in &chain.samples {
            assert!(row[0] >= lo && row[0] <= hi);
        }
        assert_eq!(chain.free_names, vec!["a0".to_string()]);
    }

    #[test]
    fn posterior_matches_the_conjugate_gaussian_answer() {
        // With only a0 free and every record at theta=0, dp=1, the model is
        // linear in a0: r = a0 + c. The posterior over a0 given Gaussian
        // noise sigma is Gaussian with std sigma/sqrt(m) around the
        // conditional mean — a closed-form target the sampler must hit.
        let truth = ShueForm::default();
        let m = 50;
        let noise = 0.5;
        let records = synth_generate(
            &EmpiricalModel::Shue(truth),
            m,
            noise,
            100,
            UniformRange::new(0.0, 0.0).unwrap(),
            UniformRange::new(1.0, 1.0).unwrap(),
            UniformRange::new(0.0, 0.0).unwrap(),
        )
        .unwrap()
        .records;

        // Conditional mean of a0: mean(r) - a1*tanh(a2*(0+a3)).
        let tanh_term = truth.a1 * (truth.a2 * truth.a3).tanh();
        let mean_r: f64 = records.iter().map(|r| r.polar.r).sum::<f64>() / m as f64;
        let expected_mean = mean_r - tanh_term;
        let expected_std = noise / (m as f64).sqrt();

        let start = ParamForm::Shue(ShueForm { a0: 10.5, ..truth });
        let mut free = vec![false; 8];
        free[0] = true;
        let problem = FitProblem::with_default_bounds(records, start, free).unwrap();
        let config = McmcConfig {
            n_steps: 50_000,
            burn_in: 5_000,
            proposal_sigma: vec![0.15],
            seed: 42,
            likelihood_sigma: Some(noise),
        };
        let chain = mcmc_sample(&problem, &config).unwrap();
        assert_relative_eq!(chain.posterior_mean[0], expected_mean, max_relative = 2e-3);
        assert_relative_eq!(chain.posterior_std[0], expected_std, max_relative = 0.1);
    }

    #[test]
    fn estimated_likelihood_sigma_tracks_residual_spread() {
        let records = shue_records(80, 0.4, 23);
        let problem = one_free_problem(records.clone());
        let config = McmcConfig {
            n_steps: 10,
            burn_in: 1,
            proposal_sigma: vec![0.01],
            seed: 1,
            likelihood_sigma: None,
        };
        let chain = mcmc_sample(&problem, &config).unwrap();
        // Residual spread at the (offset) start: noise plus model offset
        // scatter; it must be within a sane factor of the noise scale.
        assert!(chain.likelihood_sigma > 0.1 && chain.likelihood_sigma < 2.0);
    }

    #[test]
    fn config_validation_rejects_misuse() {
        let problem = one_free_problem(shue_records(10, 0.1, 24));
        let base = McmcConfig {
            n_steps: 100,
            burn_in: 10,
            proposal_sigma: vec![0.01],
            seed: 0,
            likelihood_sigma: None,
        };
        assert!(mcmc_sample(&problem, &McmcConfig { n_steps: 0, ..base.clone() }).is_err());
        assert!(mcmc_sample(&problem, &McmcConfig { burn_in: 100, ..base.clone() }).is_err());
        assert!(mcmc_sample(
            &problem,
            &McmcConfig { proposal_sigma: vec![0.01, 0.02], ..base.clone() }
        )
        .is_err());
        assert!(mcmc_sample(
            &problem,
            &McmcConfig { proposal_sigma: vec![-0.01], ..base.clone() }
        )
        .is_err());
        assert!(mcmc_sample(
            &problem,
            &McmcConfig { likelihood_sigma: Some(0.0), ..base }
        )
        .is_err());
    }

    #[test]
    fn chain_csv_has_columns_per_coefficient() {
        let problem = one_free_problem(shue_records(20, 0.2, 25));
        let config = McmcConfig {
            n_steps: 30,
            burn_in: 5,
            proposal_sigma: vec![0.02],
            seed: 2,
            likelihood_sigma: Some(0.2),
        };
        let chain = mcmc_sample(&problem, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.csv");
        chain.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "a0,log_post");
        assert_eq!(lines.count(), 30);
        // Values round-trip exactly.
        let second = text.lines().nth(1).unwrap();
        let v: f64 = second.split(',').next().unwrap().parse().unwrap();
        assert_eq!(v, chain.samples[0][0]);
    }
}
