//! Damped (Levenberg-Marquardt) nonlinear least squares.
//!
//! The Jacobian comes from forward differences with a relative step, the
//! normal equations are solved by Gaussian elimination with partial
//! pivoting (the systems are at most a dozen unknowns), steps are clipped
//! to the problem's box bounds, and a step is only accepted when it
//! strictly decreases the sum of squared residuals — the SSE trace is
//! monotone by construction.

use crate::error::{Error, Result};
use crate::fit::{residuals, FitProblem, ParamForm};

/// Relative forward-difference step for Jacobian columns.
const JACOBIAN_REL_STEP: f64 = 1e-6;
/// Initial damping.
const MU_INIT: f64 = 1e-3;
/// Damping growth on rejected steps / singular systems, and shrink on
/// accepted ones.
const MU_GROW: f64 = 10.0;
const MU_SHRINK: f64 = 3.0;
const MU_MIN: f64 = 1e-12;
/// Damping attempts within one outer iteration before giving up on it.
const MAX_INNER: usize = 25;

/// Result of a least-squares run.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Form carrying the final coefficients.
    pub form: ParamForm,
    pub sse: f64,
    pub initial_sse: f64,
    /// Outer iterations executed (each recomputes the Jacobian).
    pub n_iters: usize,
    /// Whether a convergence test fired before the iteration cap.
    pub converged: bool,
    /// Times the damped normal equations were singular and damping was
    /// raised in response.
    pub singular_retries: usize,
}

/// Solve `a x = b` in place by Gaussian elimination with partial pivoting;
/// `a` is `k x k` row-major. Returns `None` when the matrix is singular to
/// working precision.
fn solve_linear(a: &mut [f64], b: &mut [f64], k: usize) -> Option<Vec<f64>> {
    let scale = a
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..k {
        let mut pivot_row = col;
        let mut pivot = a[col * k + col].abs();
        for r in col + 1..k {
            let v = a[r * k + col].abs();
            if v > pivot {
                pivot = v;
                pivot_row = r;
            }
        }
        if pivot <= scale * 1e-14 {
            return None;
        }
        if pivot_row != col {
            for c in 0..k {
                a.swap(col * k + c, pivot_row * k + c);
            }
            b.swap(col, pivot_row);
        }
        let diag = a[col * k + col];
        for r in col + 1..k {
            let factor = a[r * k + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for c in col..k {
                a[r * k + c] -= factor * a[col * k + c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for col in (0..k).rev() {
        let mut acc = b[col];
        for c in col + 1..k {
            acc -= a[col * k + c] * x[c];
        }
        x[col] = acc / a[col * k + col];
    }
    Some(x)
}

fn sse_of(res: &[f64]) -> f64 {
    res.iter().map(|e| e * e).sum()
}

fn clip(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Minimize the sum of squared residuals over the problem's free
/// coefficients.
///
/// Convergence fires when an accepted step's relative SSE decrease or step
/// norm falls below `tol`, or when damping has shrunk a rejected step
/// below `tol` (a local minimum to within tolerance). `max_iters = 0`
/// returns the initial guess unchanged and not converged.
pub fn least_squares_fit(problem: &FitProblem, tol: f64, max_iters: usize) -> Result<FitOutcome> {
    if !tol.is_finite() || tol < 0.0 {
        return Err(Error::Config(format!(
            "tolerance must be finite and nonnegative, got {tol}"
        )));
    }

    let bounds = problem.free_bounds();
    let k = problem.n_free();
    let mut x = problem.pack_free();
    let mut res = residuals(&problem.form_with_free(&x)?, problem.records())?;
    let m = res.len();
    let mut sse = sse_of(&res);
    if !sse.is_finite() {
        return Err(Error::Numerical(format!(
            "initial SSE is not finite ({sse}); check the starting coefficients"
        )));
    }
    let initial_sse = sse;

    let mut mu = MU_INIT;
    let mut converged = false;
    let mut singular_retries = 0usize;
    let mut n_iters = 0usize;
    let mut jac = vec![0.0; m * k];

    'outer: for _ in 0..max_iters {
        n_iters += 1;

        // Forward-difference Jacobian of the residuals, one column per
        // free coefficient. Probes may step slightly past a bound: the
        // forms stay evaluable there, bounds only constrain accepted steps.
        for j in 0..k {
            let h = JACOBIAN_REL_STEP * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            let res_p = residuals(&problem.form_with_free(&xp)?, problem.records())?;
            for i in 0..m {
                jac[i * k + j] = (res_p[i] - res[i]) / h;
            }
        }

        // Normal equations: A = J^T J, g = J^T e.
        let mut a = vec![0.0; k * k];
        let mut g = vec![0.0; k];
        for i in 0..m {
            let row = &jac[i * k..(i + 1) * k];
            for p in 0..k {
                g[p] += row[p] * res[i];
                for q in p..k {
                    a[p * k + q] += row[p] * row[q];
                }
            }
        }
        for p in 0..k {
            for q in 0..p {
                a[p * k + q] = a[q * k + p];
            }
        }

        for _ in 0..MAX_INNER {
            // (A + mu * diag(A)) delta = -g
            let mut damped = a.clone();
            for p in 0..k {
                damped[p * k + p] += mu * a[p * k + p];
            }
            let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            let delta = match solve_linear(&mut damped, &mut rhs, k) {
                Some(d) => d,
                None => {
                    singular_retries += 1;
                    mu *= MU_GROW;
                    continue;
                }
            };

            let mut x_new: Vec<f64> = x.iter().zip(&delta).map(|(v, d)| v + d).collect();
            clip(&mut x_new, &bounds);
            let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let step_norm = norm(&step);

            let res_new = residuals(&problem.form_with_free(&x_new)?, problem.records())?;
            let sse_new = sse_of(&res_new);

            if sse_new.is_finite() && sse_new < sse {
                let rel_decrease = (sse - sse_new) / sse;
                x = x_new;
                res = res_new;
                sse = sse_new;
                mu = (mu / MU_SHRINK).max(MU_MIN);
                if rel_decrease < tol || step_norm < tol {
                    converged = true;
                    break 'outer;
                }
                continue 'outer;
            }

            // Rejected: if even a damping-shrunk step cannot improve within
            // tol, we are at a minimum to working tolerance.
            if step_norm < tol {
                converged = true;
                break 'outer;
            }
            mu *= MU_GROW;
        }
    }

    Ok(FitOutcome {
        form: problem.form_with_free(&x)?,
        sse,
        initial_sse,
        n_iters,
        converged,
        singular_retries,
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

    #[test]
    fn solver_inverts_a_known_system() {
        // 3x3 with known solution [1, -2, 3].
        let mut a = vec![4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 5.0];
        let mut b = vec![4.0 - 2.0 + 6.0, 1.0 - 6.0 + 1.5, 2.0 - 1.0 + 15.0];
        let x = solve_linear(&mut a, &mut b, 3).unwrap();
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(x[1], -2.0, max_relative = 1e-12);
        assert_relative_eq!(x[2], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn solver_detects_singularity() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        assert!(solve_linear(&mut a, &mut b, 2).is_none());

        // Needs pivoting (zero on the diagonal) but is well-conditioned.
        let mut a = vec![0.0, 1.0, 1.0, 0.0];
        let mut b = vec![2.0, 3.0];
        let x = solve_linear(&mut a, &mut b, 2).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn zero_iterations_returns_the_initial_guess() {
        let records = shue_records(40, 0.2, 5);
        let start = ParamForm::Shue(ShueForm { a0: 10.8, ..ShueForm::default() });
        let problem =
            FitProblem::with_default_bounds(records, start, vec![true; 8]).unwrap();
        let out = least_squares_fit(&problem, 1e-10, 0).unwrap();
        assert_eq!(out.n_iters, 0);
        assert!(!out.converged);
        assert_eq!(out.form, start);
        assert_eq!(out.sse, out.initial_sse);
    }

    #[test]
    fn recovers_a_perturbed_standoff_coefficient() {
        // Noiseless data from the default form; start 5% off on a0 only.
        let records = shue_records(200, 0.0, 11);
        let start = ParamForm::Shue(ShueForm { a0: 10.22 * 1.05, ..ShueForm::default() });
        let mut free = vec![false; 8];
        free[0] = true;
        let problem = FitProblem::with_default_bounds(records, start, free).unwrap();
        let out = least_squares_fit(&problem, 1e-12, 60).unwrap();
        assert!(out.converged, "{out:?}");
        assert!(out.sse < out.initial_sse);
        match out.form {
            ParamForm::Shue(f) => assert_relative_eq!(f.a0, 10.22, max_relative = 1e-6),
            _ => unreachable!(),
        }
    }

    #[test]
    fn sse_trace_is_monotone_and_bounds_hold() {
        let records = shue_records(150, 0.4, 12);
        let start = ParamForm::Shue(ShueForm {
            a0: 11.0,
            a1: 1.5,
            b0: 0.5,
            ..ShueForm::default()
        });
        let free = vec![true, true, false, false, true, true, false, false];
        let problem = FitProblem::with_default_bounds(records, start, free).unwrap();
        let out = least_squares_fit(&problem, 1e-10, 50).unwrap();
        // Monotonicity is structural (accept-only-on-decrease); the final
        // SSE can never exceed the initial one.
        assert!(out.sse <= out.initial_sse);
        let values = out.form.to_vec();
        for (j, &(lo, hi)) in problem.bounds().iter().enumerate() {
            if problem.free()[j] {
                assert!(values[j] >= lo && values[j] <= hi);
            }
        }
    }

    #[test]
    fn fixed_coefficients_do_not_move() {
        let records = shue_records(80, 0.3, 13);
        let start = ParamForm::Shue(ShueForm { a0: 10.8, ..ShueForm::default() });
        let mut free = vec![false; 8];
        free[0] = true;
        free[5] = true;
        let problem = FitProblem::with_default_bounds(records, start, free).unwrap();
        let out = least_squares_fit(&problem, 1e-10, 30).unwrap();
        match out.form {
            ParamForm::Shue(f) => {
                assert_eq!(f.a1, 1.29);
                assert_eq!(f.a2, 0.184);
                assert_eq!(f.a3, 8.14);
                assert_eq!(f.p_r, -1.0 / 6.6);
                assert_eq!(f.b1, -0.007);
                assert_eq!(f.b2, 0.024);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let records = shue_records(10, 0.0, 1);
        let problem = FitProblem::with_default_bounds(
            records,
            ParamForm::Shue(ShueForm::default()),
            vec![true; 8],
        )
        .unwrap();
        assert!(least_squares_fit(&problem, -1.0, 5).is_err());
        assert!(least_squares_fit(&problem, f64::NAN, 5).is_err());
    }
}
