//! Monte Carlo and importance sampling estimators of the failure probability.
//!
//! A run produces a [`SampleBatch`] that keeps, for every sample, its
//! standard-normal-space coordinates, the limit-state value and the log
//! densities needed to reweight the sample later without re-evaluating the
//! model.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_state::LimitState;
use crate::linalg::{Cholesky, Matrix};
use crate::rng::CounterRng;
use crate::special::{norm_quantile, LN_SQRT_2PI};
use crate::transform::NatafTransform;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(rename = "mcs")]
    MonteCarlo,
    #[serde(rename = "is")]
    ImportanceSampling,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::MonteCarlo => "mcs",
            Method::ImportanceSampling => "is",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan {
    pub method: Method,
    pub n_samples: usize,
    pub seed: u64,
    /// Center of the sampling density in independent standard normal space.
    pub is_center: Option<Vec<f64>>,
    /// Sampling covariance in independent standard normal space; identity when `None`.
    pub is_cov: Option<Matrix>,
}

impl SamplingPlan {
    pub fn monte_carlo(n_samples: usize, seed: u64) -> Self {
        Self { method: Method::MonteCarlo, n_samples, seed, is_center: None, is_cov: None }
    }

    pub fn importance(n_samples: usize, seed: u64, center: Vec<f64>) -> Self {
        Self { method: Method::ImportanceSampling, n_samples, seed, is_center: Some(center), is_cov: None }
    }

    pub fn with_cov(mut self, cov: Matrix) -> Self {
        self.is_cov = Some(cov);
        self
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_samples(&self, n_samples: usize) -> Self {
        Self { n_samples, ..self.clone() }
    }
}

/// Samples from one simulation run.
///
/// `u` holds the correlated standard normal coordinates (covariance
/// `base_cov`, i.e. the Nataf `rho_u`), row-major, one row per sample. Both
/// log densities are expressed in that same space.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    dim: usize,
    pub u: Vec<f64>,
    pub g: Vec<f64>,
    pub log_f0: Vec<f64>,
    pub log_fs: Vec<f64>,
    pub base_cov: Matrix,
    pub plan: SamplingPlan,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.u[s * self.dim..(s + 1) * self.dim]
    }

    /// Importance weight f_U0 / f_s of sample `s`.
    pub fn weight(&self, s: usize) -> f64 {
        (self.log_f0[s] - self.log_fs[s]).exp()
    }

    /// Writes `index,u_1..u_m,g,weight` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["index".to_string()];
        header.extend((1..=self.dim).map(|k| format!("u_{k}")));
        header.push("g".into());
        header.push("weight".into());
        writeln!(out, "{}", header.join(","))?;
        for s in 0..self.len() {
            write!(out, "{s}")?;
            for v in self.row(s) {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{},{}", self.g[s], self.weight(s))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PfEstimate {
    pub pf_hat: f64,
    /// −Φ⁻¹(pf_hat); +∞ when no failures were observed.
    #[serde(with = "crate::serde_float")]
    pub beta_hat: f64,
    pub n_failures: usize,
    pub std_error: f64,
    pub zero_failures: bool,
}

impl PfEstimate {
    fn new(pf_hat: f64, n_failures: usize, std_error: f64) -> Self {
        let beta_hat = if pf_hat <= 0.0 {
            f64::INFINITY
        } else if pf_hat >= 1.0 {
            f64::NEG_INFINITY
        } else {
            -norm_quantile(pf_hat)
        };
        Self { pf_hat, beta_hat, n_failures, std_error, zero_failures: n_failures == 0 }
    }
}

/// Reliability index −Φ⁻¹(pf).
pub fn pf_to_beta(pf: f64) -> Result<f64> {
    if !(pf > 0.0 && pf < 1.0) {
        return Err(Error::OutOfRange(pf));
    }
    Ok(-norm_quantile(pf))
}

/// Neumaier-compensated sum in iteration order.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

struct Sampler {
    center: Option<Vec<f64>>,
    cov_chol: Option<Cholesky>,
    /// ½ ln|C_IS|
    half_log_det_is: f64,
}

fn generate(ls: &LimitState, t: &NatafTransform, plan: &SamplingPlan, sampler: &Sampler) -> Result<SampleBatch> {
    if plan.n_samples == 0 {
        return Err(Error::InvalidPlan("n_samples must be at least 1".into()));
    }
    let m = t.dim();
    if ls.min_input_len() > m {
        return Err(Error::DimensionMismatch { expected: ls.min_input_len(), got: m });
    }
    let n = plan.n_samples;
    let rng = CounterRng::new(plan.seed);
    // densities are reported in the correlated space z = L u
    let half_log_det_base = 0.5 * t.chol_u().log_det();
    let norm_const = -(m as f64) * LN_SQRT_2PI - half_log_det_base;
    let independent = t.is_independent();

    let mut u = vec![0.0; n * m];
    let mut g = vec![0.0; n];
    let mut log_f0 = vec![0.0; n];
    let mut log_fs = vec![0.0; n];

    u.par_chunks_mut(m)
        .zip(g.par_iter_mut())
        .zip(log_f0.par_iter_mut().zip(log_fs.par_iter_mut()))
        .enumerate()
        .for_each(|(s, ((row, g), (lf0, lfs)))| {
            let mut xi = [0.0; 32];
            let mut xi_vec;
            let xi: &mut [f64] = if m <= xi.len() {
                &mut xi[..m]
            } else {
                xi_vec = vec![0.0; m];
                &mut xi_vec
            };
            rng.fill_standard_normal(s as u64, xi);
            let xi_sq: f64 = xi.iter().map(|v| v * v).sum();
            let u_ind: Vec<f64> = match (&sampler.center, &sampler.cov_chol) {
                (None, _) => xi.to_vec(),
                (Some(c), None) => xi.iter().zip(c).map(|(a, b)| a + b).collect(),
                (Some(c), Some(l)) => l.mul_lower(xi).iter().zip(c).map(|(a, b)| a + b).collect(),
            };
            let u_sq: f64 = u_ind.iter().map(|v| v * v).sum();
            *lf0 = norm_const - 0.5 * u_sq;
            *lfs = if sampler.center.is_none() {
                *lf0
            } else {
                norm_const - sampler.half_log_det_is - 0.5 * xi_sq
            };
            if independent {
                row.copy_from_slice(&u_ind);
            } else {
                row.copy_from_slice(&t.u_to_z(&u_ind));
            }
            *g = ls.eval(&t.z_to_x(row));
        });

    if let Some(index) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLimitState { index });
    }
    Ok(SampleBatch { dim: m, u, g, log_f0, log_fs, base_cov: t.rho_u().clone(), plan: plan.clone() })
}

/// Plain Monte Carlo: i.i.d. standard normal samples mapped through the Nataf transform.
pub fn run_monte_carlo(ls: &LimitState, t: &NatafTransform, plan: &SamplingPlan) -> Result<(SampleBatch, PfEstimate)> {
    if plan.method != Method::MonteCarlo {
        return Err(Error::InvalidPlan("plan method is not Monte Carlo".into()));
    }
    let batch = generate(ls, t, plan, &Sampler { center: None, cov_chol: None, half_log_det_is: 0.0 })?;
    let n_failures = batch.g.iter().filter(|g| **g <= 0.0).count();
    let n = batch.len() as f64;
    let pf = n_failures as f64 / n;
    let est = PfEstimate::new(pf, n_failures, (pf * (1.0 - pf) / n).sqrt());
    Ok((batch, est))
}

/// Importance sampling with a normal density centered at `plan.is_center`.
pub fn run_importance_sampling(
    ls: &LimitState,
    t: &NatafTransform,
    plan: &SamplingPlan,
) -> Result<(SampleBatch, PfEstimate)> {
    if plan.method != Method::ImportanceSampling {
        return Err(Error::InvalidPlan("plan method is not importance sampling".into()));
    }
    let m = t.dim();
    let center = plan
        .is_center
        .clone()
        .ok_or_else(|| Error::InvalidPlan("importance sampling needs a center".into()))?;
    if center.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: center.len() });
    }
    let (cov_chol, half_log_det_is) = match &plan.is_cov {
        None => (None, 0.0),
        Some(cov) => {
            if cov.dim() != m {
                return Err(Error::DimensionMismatch { expected: m, got: cov.dim() });
            }
            let c = Cholesky::new(cov)?;
            let h = 0.5 * c.log_det();
            (Some(c), h)
        }
    };
    let batch = generate(ls, t, plan, &Sampler { center: Some(center), cov_chol, half_log_det_is })?;

    let contributions: Vec<f64> =
        (0..batch.len()).map(|s| if batch.g[s] <= 0.0 { batch.weight(s) } else { 0.0 }).collect();
    let n_failures = batch.g.iter().filter(|g| **g <= 0.0).count();
    if n_failures > 0 && contributions.iter().all(|w| *w == 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let n = batch.len() as f64;
    let pf = compensated_sum(contributions.iter().copied()) / n;
    let std_error = if batch.len() > 1 {
        let ss = compensated_sum(contributions.iter().map(|c| (c - pf) * (c - pf)));
        (ss / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok((batch, PfEstimate::new(pf, n_failures, std_error)))
}

/// Dispatches on `plan.method`.
pub fn run(ls: &LimitState, t: &NatafTransform, plan: &SamplingPlan) -> Result<(SampleBatch, PfEstimate)> {
    match plan.method {
        Method::MonteCarlo => run_monte_carlo(ls, t, plan),
        Method::ImportanceSampling => run_importance_sampling(ls, t, plan),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::MarginalDistribution;
    use crate::special::norm_cdf;

    fn std_normals(m: usize) -> NatafTransform {
        NatafTransform::independent(vec![MarginalDistribution::normal(0.0, 1.0).unwrap(); m]).unwrap()
    }

    fn linear(b: f64) -> LimitState {
        LimitState::linear(b, vec![-0.8, -0.5, -0.3, -0.1, -0.1]).unwrap()
    }

    #[test]
    fn pf_to_beta_values() {
        assert_eq!(pf_to_beta(0.5).unwrap(), 0.0);
        assert!((pf_to_beta(0.02275).unwrap() - 2.0).abs() < 1e-3);
        assert!((pf_to_beta(norm_cdf(-4.5)).unwrap() - 4.5).abs() < 1e-9);
        assert!(matches!(pf_to_beta(0.0), Err(Error::OutOfRange(_))));
        assert!(matches!(pf_to_beta(1.0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn constant_limit_states() {
        let t = std_normals(2);
        let fail = LimitState::linear(-1.0, vec![0.0, 0.0]).unwrap();
        let (_, e) = run_monte_carlo(&fail, &t, &SamplingPlan::monte_carlo(100, 1)).unwrap();
        assert_eq!(e.pf_hat, 1.0);
        assert_eq!(e.beta_hat, f64::NEG_INFINITY);
        let safe = LimitState::linear(1.0, vec![0.0, 0.0]).unwrap();
        let (_, e) = run_monte_carlo(&safe, &t, &SamplingPlan::monte_carlo(100, 1)).unwrap();
        assert_eq!(e.pf_hat, 0.0);
        assert!(e.zero_failures);
        assert_eq!(e.beta_hat, f64::INFINITY);
    }

    #[test]
    fn mc_batch_invariants() {
        let (batch, est) = run_monte_carlo(&linear(2.0), &std_normals(5), &SamplingPlan::monte_carlo(20_000, 3)).unwrap();
        assert_eq!(batch.len(), 20_000);
        assert_eq!(batch.log_f0, batch.log_fs);
        assert!((est.pf_hat - norm_cdf(-2.0)).abs() < 4.0 * est.std_error);
        assert!((est.beta_hat - 2.0).abs() < 0.1);
    }

    #[test]
    fn is_at_origin_equals_mc() {
        let t = std_normals(5);
        let ls = linear(2.0);
        let (mb, me) = run_monte_carlo(&ls, &t, &SamplingPlan::monte_carlo(5000, 8)).unwrap();
        let (ib, ie) = run_importance_sampling(&ls, &t, &SamplingPlan::importance(5000, 8, vec![0.0; 5])).unwrap();
        assert_eq!(mb.u, ib.u);
        assert_eq!(mb.g, ib.g);
        assert!((0..ib.len()).all(|s| ib.weight(s) == 1.0));
        assert_eq!(me.pf_hat, ie.pf_hat);
    }

    #[test]
    fn is_estimate_is_consistent() {
        let t = std_normals(5);
        let ls = linear(3.0);
        let center = crate::form::linear_form_analytic(3.0, &[-0.8, -0.5, -0.3, -0.1, -0.1], &[0.0; 5], &[1.0; 5])
            .unwrap()
            .u_star;
        let (_, e) = run_importance_sampling(&ls, &t, &SamplingPlan::importance(10_000, 4, center)).unwrap();
        let exact = norm_cdf(-3.0);
        assert!((e.pf_hat - exact).abs() < 4.0 * e.std_error, "{e:?}");
        assert!(e.std_error < 0.05 * exact);
    }

    #[test]
    fn weights_average_to_one() {
        let t = std_normals(3);
        let ls = LimitState::linear(2.0, vec![-1.0, 0.0, 0.0]).unwrap();
        let n = 40_000;
        let (batch, _) =
            run_importance_sampling(&ls, &t, &SamplingPlan::importance(n, 5, vec![0.5, 0.0, -0.2])).unwrap();
        let mean = compensated_sum((0..n).map(|s| batch.weight(s))) / n as f64;
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt(), "mean weight {mean}");
    }

    #[test]
    fn custom_is_covariance() {
        let t = std_normals(2);
        let ls = LimitState::linear(2.5, vec![-1.0, 0.0]).unwrap();
        let cov = Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 2.0]]).unwrap();
        let plan = SamplingPlan::importance(20_000, 6, vec![2.5, 0.0]).with_cov(cov);
        let (_, e) = run_importance_sampling(&ls, &t, &plan).unwrap();
        assert!((e.pf_hat - norm_cdf(-2.5)).abs() < 4.0 * e.std_error);
    }

    #[test]
    fn correlated_densities_are_consistent() {
        let rho = Matrix::from_rows(&[vec![1.0, 0.6], vec![0.6, 1.0]]).unwrap();
        let t = NatafTransform::build(vec![MarginalDistribution::normal(0.0, 1.0).unwrap(); 2], rho.clone()).unwrap();
        let ls = LimitState::linear(3.0, vec![-1.0, -1.0]).unwrap();
        let plan = SamplingPlan::importance(2000, 1, vec![1.0, 0.5]);
        let (batch, _) = run_importance_sampling(&ls, &t, &plan).unwrap();
        let base = crate::transform::JointNormal::new(&rho).unwrap();
        for s in 0..50 {
            assert!((batch.log_f0[s] - base.log_pdf(batch.row(s))).abs() < 1e-12);
        }
        // exact: g ~ N(3, 2 + 2·0.6)
        let (_, e) = run_importance_sampling(&ls, &t, &plan.with_samples(40_000)).unwrap();
        let exact = norm_cdf(-3.0 / 3.2f64.sqrt());
        assert!((e.pf_hat - exact).abs() < 4.0 * e.std_error, "{} vs {exact}", e.pf_hat);
    }

    #[test]
    fn plan_errors() {
        let t = std_normals(5);
        let ls = linear(2.0);
        assert!(matches!(run_monte_carlo(&ls, &t, &SamplingPlan::monte_carlo(0, 1)), Err(Error::InvalidPlan(_))));
        let mut plan = SamplingPlan::importance(10, 1, vec![0.0; 5]);
        assert!(run_monte_carlo(&ls, &t, &plan).is_err());
        plan.is_center = None;
        assert!(matches!(run_importance_sampling(&ls, &t, &plan), Err(Error::InvalidPlan(_))));
        let wrong = SamplingPlan::importance(10, 1, vec![0.0; 3]);
        assert!(matches!(run_importance_sampling(&ls, &t, &wrong), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn non_finite_limit_state_reported() {
        let t = std_normals(1);
        let ls = LimitState::parse_expression("ln(x)", vec!["x".into()]).unwrap();
        match run_monte_carlo(&ls, &t, &SamplingPlan::monte_carlo(100, 1)) {
            Err(Error::NonFiniteLimitState { index }) => assert!(index < 100),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_export() {
        let (batch, _) = run_monte_carlo(&linear(2.0), &std_normals(5), &SamplingPlan::monte_carlo(3, 1)).unwrap();
        let mut buf = Vec::new();
        batch.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,u_1,u_2,u_3,u_4,u_5,g,weight");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1].split(',').count(), 8);
    }

    #[test]
    fn compensated_sum_is_accurate() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
