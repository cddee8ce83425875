//! Scaled conjugate gradient (Møller, 1993).
//!
//! Conjugate directions without a line search: curvature along the search
//! direction comes from a finite difference of gradients, and a
//! Levenberg-Marquardt style scale `lambda` keeps the local quadratic model
//! positive definite and is tuned by how well that model predicted the
//! actual decrease.

use super::{dot, inf_norm, Evaluation};
use crate::error::{Error, Result};
use crate::nnet::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScgSettings {
    pub max_iter: usize,
    /// Stop once the gradient's max-norm falls to this value.
    pub grad_tol: f64,
    /// Finite-difference step scale for the curvature estimate.
    pub sigma0: f64,
    /// Initial Levenberg-Marquardt scale.
    pub lambda0: f64,
}

impl Default for ScgSettings {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            sigma0: 1e-4,
            lambda0: 1e-6,
        }
    }
}

/// Optimizer state between iterations.
#[derive(Debug, Clone)]
pub struct ScgState {
    pub params: ParamVector,
    pub loss: f64,
    pub gradient: Vec<f64>,
    pub sigma0: f64,
    pub lambda: f64,
    pub lambda_bar: f64,
    pub direction: Vec<f64>,
    /// Steepest-descent direction, the negated gradient.
    pub residual: Vec<f64>,
    /// Curvature along `direction` (scaled by `lambda`) from the last successful step.
    pub delta: f64,
    pub success: bool,
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct ScgOutcome {
    pub params: ParamVector,
    /// Loss at the start and after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub final_gradient: Vec<f64>,
}

fn checked_eval<F>(objective: &mut F, params: &[f64], evaluations: &mut usize) -> Result<Evaluation>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    if let Some(bad) = params.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "parameter {bad} proposed by optimizer"
        )));
    }
    *evaluations += 1;
    let (loss, grad) = objective(params)?;
    if grad.len() != params.len() {
        return Err(Error::DimensionMismatch(format!(
            "objective returned {} gradient entries for {} parameters",
            grad.len(),
            params.len()
        )));
    }
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "objective loss {loss} or its gradient"
        )));
    }
    Ok((loss, grad))
}

/// Relative loss change below which loss differences are treated as rounding noise.
const LOSS_RESOLUTION: f64 = 64.0 * f64::EPSILON;

fn axpy(w: &[f64], alpha: f64, p: &[f64]) -> Vec<f64> {
    w.iter().zip(p).map(|(a, b)| a + alpha * b).collect()
}

pub fn scg_minimize<F>(
    mut objective: F,
    init: ParamVector,
    settings: &ScgSettings,
) -> Result<ScgOutcome>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    let mut evaluations = 0;
    let (loss, gradient) = checked_eval(&mut objective, &init, &mut evaluations)?;
    let residual: Vec<f64> = gradient.iter().map(|g| -g).collect();
    let mut st = ScgState {
        params: init,
        loss,
        direction: residual.clone(),
        residual,
        gradient,
        sigma0: settings.sigma0,
        lambda: settings.lambda0,
        lambda_bar: 0.0,
        delta: 0.0,
        success: true,
        iteration: 0,
    };
    let n = st.params.len();
    let mut trace = vec![st.loss];
    let mut converged = inf_norm(&st.gradient) <= settings.grad_tol;

    while !converged && st.iteration < settings.max_iter {
        st.iteration += 1;

        if st.success {
            if dot(&st.direction, &st.residual) <= 0.0 {
                // not a descent direction any more; fall back to steepest descent
                st.direction.clone_from(&st.residual);
            }
            let p_norm2 = dot(&st.direction, &st.direction);
            let sigma = st.sigma0 / p_norm2.sqrt();
            let probe = axpy(&st.params, sigma, &st.direction);
            let (_, probe_grad) = checked_eval(&mut objective, &probe, &mut evaluations)?;
            let s: Vec<f64> = probe_grad
                .iter()
                .zip(&st.gradient)
                .map(|(a, b)| (a - b) / sigma)
                .collect();
            st.delta = dot(&st.direction, &s);
        }
        let p_norm2 = dot(&st.direction, &st.direction);

        // scale the curvature
        st.delta += (st.lambda - st.lambda_bar) * p_norm2;

        // make the Hessian estimate positive definite
        if st.delta <= 0.0 {
            st.lambda_bar = 2.0 * (st.lambda - st.delta / p_norm2);
            st.delta = -st.delta + st.lambda * p_norm2;
            st.lambda = st.lambda_bar;
        }

        let mu = dot(&st.direction, &st.residual);
        let alpha = mu / st.delta;
        let candidate = axpy(&st.params, alpha, &st.direction);
        let (cand_loss, cand_grad) = checked_eval(&mut objective, &candidate, &mut evaluations)?;

        // comparison of actual and predicted decrease; once the loss change is
        // lost in rounding, the decrease comes from the trapezoid rule on the
        // directional derivatives instead
        let mut decrease = st.loss - cand_loss;
        let resolution = LOSS_RESOLUTION * st.loss.abs().max(cand_loss.abs());
        if decrease.abs() <= resolution {
            decrease = 0.5 * alpha * (mu - dot(&cand_grad, &st.direction));
        }
        let mut comparison = 2.0 * st.delta * decrease / (mu * mu);
        let accepted = cand_loss <= st.loss && comparison >= 0.0;
        if !accepted {
            comparison = comparison.min(0.0);
        }

        if accepted {
            st.params = ParamVector(candidate);
            st.loss = cand_loss;
            st.gradient = cand_grad;
            let new_residual: Vec<f64> = st.gradient.iter().map(|g| -g).collect();
            st.lambda_bar = 0.0;
            st.success = true;
            if st.iteration.is_multiple_of(n.max(1)) {
                st.direction.clone_from(&new_residual);
            } else {
                let beta =
                    (dot(&new_residual, &new_residual) - dot(&new_residual, &st.residual)) / mu;
                st.direction = axpy(&new_residual, beta, &st.direction);
            }
            st.residual = new_residual;
            if comparison >= 0.75 {
                st.lambda *= 0.25;
            }
        } else {
            st.lambda_bar = st.lambda;
            st.success = false;
        }

        if comparison < 0.25 {
            st.lambda += st.delta * (1.0 - comparison) / p_norm2;
        }

        trace.push(st.loss);
        converged = inf_norm(&st.gradient) <= settings.grad_tol;
    }

    Ok(ScgOutcome {
        params: st.params,
        trace,
        iterations: st.iteration,
        evaluations,
        converged,
        final_gradient: st.gradient,
    })
}
