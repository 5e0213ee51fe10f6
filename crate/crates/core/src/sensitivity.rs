//! Variance-based reliability sensitivity indices.
//!
//! The derivative of the failure probability with respect to the variance of
//! each standard normal input is estimated from an existing [`SampleBatch`]:
//! every failing sample is reweighted by the ratio of a perturbed base density
//! to the density it was drawn from, once with the variance of input `k`
//! scaled up by `1 + Δσ²` and once scaled down by `1/(1 + Δσ²)`. The central
//! difference of the two reweighted estimates, divided by `2Δσ²`, gives
//! `∂P_f/∂σ²_k`. Normalizing the derivatives by their sum gives the indices.
//!
//! The perturbed variances `1 + Δσ²` and `1/(1 + Δσ²)` are
//! `2Δσ² − Δσ⁴ + O(Δσ⁶)` apart while the divisor is `2Δσ²`, so every
//! derivative carries the same relative `O(Δσ²)` bias. The normalized
//! indices are unaffected to first order.
//!
//! Sample index `s` runs over the batch, variable index `k` over the inputs.
//! No limit-state evaluations happen here.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sampling::{compensated_sum, SampleBatch};
use crate::transform::JointNormal;

pub const DEFAULT_DELTA_VAR: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    /// Estimates of ∂P_f/∂σ²_{U_k}.
    pub dpf_dvar: Vec<f64>,
    /// Derivatives normalized by their signed sum.
    #[serde(with = "crate::serde_float::vec")]
    pub indices: Vec<f64>,
    pub delta_var: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    /// Set when at least one derivative estimate is negative.
    pub negative_derivative: bool,
}

/// Scaling factors `((1+Δσ²)^½, (1+Δσ²)^−½)` of the perturbed standard deviation.
pub fn scale_factors(delta_var: f64) -> Result<(f64, f64)> {
    if !(delta_var > 0.0) || !delta_var.is_finite() {
        return Err(Error::InvalidStep(delta_var));
    }
    let d_plus = (1.0 + delta_var).sqrt();
    Ok((d_plus, 1.0 / d_plus))
}

/// `D·c0·D` with `D = diag(1, …, d, …, 1)`, `d` at position `i`: row and
/// column `i` scale by `d`, the diagonal entry by `d²`.
pub fn modified_covariance(c0: &Matrix, i: usize, d: f64) -> Result<Matrix> {
    let m = c0.dim();
    if i >= m {
        return Err(Error::IndexOutOfRange { index: i, dim: m });
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidStep(d));
    }
    let mut c = c0.clone();
    for j in 0..m {
        c[(i, j)] *= d;
        c[(j, i)] *= d;
    }
    Ok(c)
}

/// Perturbed base densities for every variable: `(f_k⁺, f_k⁻)`.
fn perturbed_densities(base: &Matrix, d_plus: f64, d_minus: f64) -> Result<Vec<(JointNormal, JointNormal)>> {
    (0..base.dim())
        .map(|k| {
            Ok((
                JointNormal::new(&modified_covariance(base, k, d_plus)?)?,
                JointNormal::new(&modified_covariance(base, k, d_minus)?)?,
            ))
        })
        .collect()
}

/// Central-difference reliability sensitivities from one sample batch.
pub fn reliability_sensitivities(batch: &SampleBatch, delta_var: f64) -> Result<SensitivityResult> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (d_plus, d_minus) = scale_factors(delta_var)?;
    let m = batch.dim();
    let densities = perturbed_densities(&batch.base_cov, d_plus, d_minus)?;

    let failures: Vec<usize> = (0..batch.len()).filter(|&s| batch.g[s] <= 0.0).collect();
    if failures.is_empty() {
        return Err(Error::AllSafe);
    }

    // per failing sample: [w_k⁺ − w_k⁻ for k in 0..m]
    let diffs: Vec<f64> = failures
        .par_iter()
        .flat_map_iter(|&s| {
            let u = batch.row(s);
            let log_den = batch.log_fs[s];
            densities
                .iter()
                .map(move |(plus, minus)| (plus.log_pdf(u) - log_den).exp() - (minus.log_pdf(u) - log_den).exp())
        })
        .collect();

    let scale = 1.0 / (2.0 * batch.len() as f64 * delta_var);
    let dpf_dvar: Vec<f64> =
        (0..m).map(|k| scale * compensated_sum(diffs.iter().skip(k).step_by(m).copied())).collect();
    let total = compensated_sum(dpf_dvar.iter().copied());
    let indices = if total != 0.0 && total.is_finite() {
        dpf_dvar.iter().map(|d| d / total).collect()
    } else {
        vec![f64::NAN; m]
    };
    let negative_derivative = dpf_dvar.iter().any(|d| *d < 0.0);
    Ok(SensitivityResult { dpf_dvar, indices, delta_var, d_plus, d_minus, negative_derivative })
}

/// Batch means of `f_k⁺/f_s` and `f_k⁻/f_s` over all samples (no indicator).
///
/// Each perturbed density integrates to one, so both means estimate 1.
pub fn perturbed_weight_means(batch: &SampleBatch, delta_var: f64) -> Result<Vec<(f64, f64)>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (d_plus, d_minus) = scale_factors(delta_var)?;
    let densities = perturbed_densities(&batch.base_cov, d_plus, d_minus)?;
    let n = batch.len() as f64;
    Ok(densities
        .iter()
        .map(|(plus, minus)| {
            let ratios: Vec<(f64, f64)> = (0..batch.len())
                .into_par_iter()
                .map(|s| {
                    let u = batch.row(s);
                    let den = batch.log_fs[s];
                    ((plus.log_pdf(u) - den).exp(), (minus.log_pdf(u) - den).exp())
                })
                .collect();
            (
                compensated_sum(ratios.iter().map(|r| r.0)) / n,
                compensated_sum(ratios.iter().map(|r| r.1)) / n,
            )
        })
        .collect())
}

/// First-order variance shares of a linear model with independent inputs,
/// `a_i² σ_i² / Σ a_j² σ_j²`.
pub fn linear_sobol(a: &[f64], stds: &[f64]) -> Result<Vec<f64>> {
    if a.len() != stds.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: stds.len() });
    }
    let parts: Vec<f64> = a.iter().zip(stds).map(|(a, s)| a * a * s * s).collect();
    let total: f64 = parts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    Ok(parts.into_iter().map(|p| p / total).collect())
}
