//! First Order Reliability Method.
//!
//! Sign convention used throughout: `alpha = −∇g/‖∇g‖` evaluated at the
//! design point, so that `u* = beta · alpha` and `beta > 0` when the origin
//! of the standard normal space is safe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_state::LimitState;
use crate::special::{norm_cdf, norm_pdf};
use crate::transform::NatafTransform;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormResult {
    pub beta: f64,
    pub pf: f64,
    /// Design point in independent standard normal space.
    pub u_star: Vec<f64>,
    pub alpha: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FormResult {
    /// Linear-case sensitivity indices α_i².
    pub fn indices(&self) -> Result<Vec<f64>> {
        alpha_to_linear_indices(&self.alpha)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormOptions {
    pub max_iterations: usize,
    /// Convergence on the design point step length.
    pub tol_u: f64,
    /// Convergence on |g| relative to |g| at the origin.
    pub tol_g: f64,
    /// Central finite-difference step in u-space.
    pub fd_step: f64,
}

impl Default for FormOptions {
    fn default() -> Self {
        Self { max_iterations: 100, tol_u: 1e-6, tol_g: 1e-6, fd_step: 1e-5 }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn linear_variance(a: &[f64], stds: &[f64]) -> Result<f64> {
    if a.len() != stds.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: stds.len() });
    }
    if stds.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidMoments("standard deviations must be positive".into()));
    }
    let var: f64 = a.iter().zip(stds).map(|(a, s)| a * a * s * s).sum();
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    Ok(var)
}

fn linear_mean(a0: f64, a: &[f64], means: &[f64]) -> Result<f64> {
    if a.len() != means.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: means.len() });
    }
    Ok(a0 + dot(a, means))
}

/// Exact FORM solution for `g = a0 + Σ a_i X_i` with independent normal inputs.
pub fn linear_form_analytic(a0: f64, a: &[f64], means: &[f64], stds: &[f64]) -> Result<FormResult> {
    let var = linear_variance(a, stds)?;
    let sd = var.sqrt();
    let beta = linear_mean(a0, a, means)? / sd;
    let alpha: Vec<f64> = a.iter().zip(stds).map(|(a, s)| -a * s / sd).collect();
    Ok(FormResult {
        beta,
        pf: norm_cdf(-beta),
        u_star: alpha.iter().map(|a| beta * a).collect(),
        alpha,
        converged: true,
        iterations: 0,
    })
}

/// ∂β/∂(σ²_{X_i}) = −β a_i² / (2 Σ a_j² σ_j²) for the linear normal case.
pub fn linear_dbeta_dvar(a0: f64, a: &[f64], means: &[f64], stds: &[f64]) -> Result<Vec<f64>> {
    let var = linear_variance(a, stds)?;
    let beta = linear_mean(a0, a, means)? / var.sqrt();
    Ok(a.iter().map(|a| -beta * a * a / (2.0 * var)).collect())
}

/// ∂P_f/∂(σ²_{X_i}) = φ(β) β a_i² / (2 Σ a_j² σ_j²) for the linear normal case.
pub fn linear_dpf_dvar(a0: f64, a: &[f64], means: &[f64], stds: &[f64]) -> Result<Vec<f64>> {
    let var = linear_variance(a, stds)?;
    let beta = linear_mean(a0, a, means)? / var.sqrt();
    let scale = norm_pdf(beta) * beta / (2.0 * var);
    Ok(a.iter().map(|a| scale * a * a).collect())
}

/// α_i² / Σ α_j².
pub fn alpha_to_linear_indices(alpha: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = alpha.iter().map(|a| a * a).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(alpha.iter().map(|a| a * a / total).collect())
}

/// ∂P_f/∂(σ²_{U_i}) in standard normal space for a linear limit state with
/// reliability index `beta` and direction `alpha` (any scaling).
pub fn analytic_dpf_dvar(beta: f64, alpha: &[f64]) -> Result<Vec<f64>> {
    let shares = alpha_to_linear_indices(alpha)?;
    let scale = 0.5 * beta * norm_pdf(beta);
    Ok(shares.into_iter().map(|s| scale * s).collect())
}

/// Design point search by the improved HLRF iteration with a merit-function
/// line search and central-difference gradients in u-space.
pub fn form_search(ls: &LimitState, t: &NatafTransform, opts: &FormOptions) -> Result<FormResult> {
    let m = t.dim();
    let g_at = |u: &[f64]| -> Result<f64> { ls.try_eval(&t.u_to_x(u)?) };
    let gradient = |u: &[f64]| -> Result<Vec<f64>> {
        let mut grad = vec![0.0; m];
        let mut probe = u.to_vec();
        for k in 0..m {
            probe[k] = u[k] + opts.fd_step;
            let up = g_at(&probe).map_err(|_| Error::GradientFailure)?;
            probe[k] = u[k] - opts.fd_step;
            let down = g_at(&probe).map_err(|_| Error::GradientFailure)?;
            probe[k] = u[k];
            grad[k] = (up - down) / (2.0 * opts.fd_step);
        }
        if grad.iter().any(|g| !g.is_finite()) || norm(&grad) == 0.0 {
            return Err(Error::GradientFailure);
        }
        Ok(grad)
    };

    let origin = vec![0.0; m];
    let g0 = g_at(&origin)?;
    let g_scale = if g0 == 0.0 { 1.0 } else { g0.abs() };
    let sign = if g0 < 0.0 { -1.0 } else { 1.0 };

    let mut u = origin;
    let mut g = g0;
    let mut last_step = f64::INFINITY;
    for iteration in 0..=opts.max_iterations {
        let grad = gradient(&u)?;
        let gnorm = norm(&grad);
        if last_step < opts.tol_u && g.abs() < opts.tol_g * g_scale {
            let alpha: Vec<f64> = grad.iter().map(|d| -d / gnorm).collect();
            let beta = sign * norm(&u);
            return Ok(FormResult {
                beta,
                pf: norm_cdf(-beta),
                u_star: u,
                alpha,
                converged: true,
                iterations: iteration,
            });
        }
        if iteration == opts.max_iterations {
            break;
        }

        // HLRF direction
        let factor = (dot(&grad, &u) - g) / (gnorm * gnorm);
        let d: Vec<f64> = grad.iter().zip(&u).map(|(gr, u)| factor * gr - u).collect();

        // merit m(u) = ½‖u‖² + c|g|
        let u_plus_d: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + b).collect();
        let mut c = norm(&u) / gnorm;
        if g.abs() > 1e-14 * g_scale {
            c = c.max(0.5 * dot(&u_plus_d, &u_plus_d) / g.abs());
        }
        c *= 2.0;
        let merit = |u: &[f64], g: f64| 0.5 * dot(u, u) + c * g.abs();
        let m0 = merit(&u, g);
        let grad_merit: Vec<f64> =
            u.iter().zip(&grad).map(|(u, gr)| u + c * g.signum() * gr).collect();
        let slope = dot(&grad_merit, &d).min(0.0);

        let mut step = 1.0;
        let (mut next, mut g_next);
        loop {
            next = u.iter().zip(&d).map(|(u, d)| u + step * d).collect::<Vec<_>>();
            g_next = g_at(&next)?;
            if merit(&next, g_next) - m0 <= 0.5 * step * slope || step < 1e-6 {
                break;
            }
            step *= 0.5;
        }
        last_step = next.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        u = next;
        g = g_next;
    }
    Err(Error::NoConvergence { what: "FORM design point search".into(), iterations: opts.max_iterations })
}
