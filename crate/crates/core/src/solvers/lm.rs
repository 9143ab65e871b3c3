//! Levenberg–Marquardt with a forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use super::SolverConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub x: DVector<f64>,
    pub residual: DVector<f64>,
    /// Infinity norm of `residual`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    if v.iter().any(|x| !x.is_finite()) {
        return f64::INFINITY;
    }
    v.amax()
}

/// Forward-difference Jacobian of `f` at `x`, given `f(x) = fx`.
pub fn forward_jacobian<F>(f: &mut F, x: &DVector<f64>, fx: &DVector<f64>, rel_step: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut jac = DMatrix::zeros(fx.len(), x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let h = rel_step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let h = xp[j] - x[j];
        let fp = f(&xp)?;
        jac.set_column(j, &((fp - fx) / h));
        xp[j] = x[j];
    }
    Ok(jac)
}

/// Drives `‖f(x)‖∞` below `config.residual_tolerance`.
///
/// Returns the last accepted iterate with `converged = false` when the
/// iteration budget runs out or the step stalls. Fails with
/// [`Error::Singular`] when no damping level gives a usable step.
pub fn levenberg_marquardt<F>(x0: DVector<f64>, mut f: F, config: &SolverConfig) -> Result<LmOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut x = x0;
    let mut e = f(&x)?;
    let mut evaluations = 1;
    let mut norm = inf_norm(&e);
    if !norm.is_finite() {
        return Err(Error::invalid("residual is not finite at the initial guess"));
    }
    let mut damping: Option<f64> = None;
    let mut iterations = 0;

    let outcome = |x, residual, residual_norm, iterations, evaluations, converged| LmOutcome {
        x,
        residual,
        residual_norm,
        iterations,
        evaluations,
        converged,
    };

    loop {
        if norm < config.residual_tolerance {
            return Ok(outcome(x, e, norm, iterations, evaluations, true));
        }
        if iterations >= config.max_iterations {
            return Ok(outcome(x, e, norm, iterations, evaluations, false));
        }
        iterations += 1;

        let jac = forward_jacobian(&mut f, &x, &e, config.finite_difference_step)?;
        evaluations += x.len();
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &e;
        let max_diag = jtj.diagonal().amax();
        if max_diag == 0.0 {
            return Err(Error::Singular { damping: 0.0 });
        }
        let scale = jtj.diagonal().map(|d| d.max(1e-12 * max_diag));
        let mut lambda = damping.unwrap_or(config.damping_initial);
        let cost = e.norm_squared();

        let mut accepted = false;
        let mut factorized = false;
        while lambda <= config.damping_max {
            let mut lhs = jtj.clone();
            for i in 0..lhs.nrows() {
                lhs[(i, i)] += lambda * scale[i];
            }
            let Some(chol) = lhs.cholesky() else {
                lambda *= config.damping_increase;
                continue;
            };
            factorized = true;
            let step = chol.solve(&(-&grad));
            let x_new = &x + &step;
            if (&x_new - &x).amax() <= f64::EPSILON * x.amax().max(f64::MIN_POSITIVE) {
                // Step no longer moves x: stalled.
                return Ok(outcome(x, e, norm, iterations, evaluations, false));
            }
            let e_new = match f(&x_new) {
                Ok(v) => v,
                Err(Error::Integration { .. }) => {
                    evaluations += 1;
                    lambda *= config.damping_increase;
                    continue;
                }
                Err(err) => return Err(err),
            };
            evaluations += 1;
            let new_norm = inf_norm(&e_new);
            let new_cost = if new_norm.is_finite() { e_new.norm_squared() } else { f64::INFINITY };
            let predicted = step.dot(&(step.component_mul(&scale) * lambda - &grad));
            if new_cost < cost && predicted > 0.0 {
                x = x_new;
                e = e_new;
                norm = new_norm;
                lambda = (lambda * config.damping_decrease).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= config.damping_increase;
        }
        damping = Some(lambda);
        if !accepted {
            if !factorized {
                return Err(Error::Singular { damping: lambda });
            }
            // no damping level reduces the cost: a local minimum of ‖f‖
            return Ok(outcome(x, e, norm, iterations, evaluations, false));
        }
    }
}
