//! Nataf joint model and zero-mean multivariate normal densities.
//!
//! Three coordinate systems appear here:
//! - `x`: physical space, one marginal per variable;
//! - `z`: correlated standard normal space, covariance `rho_u`;
//! - `u`: independent standard normal space, `z = L u` with `L Lᵀ = rho_u`.

use std::f64::consts::PI;

use crate::distributions::{DistributionKind, MarginalDistribution};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::special::LN_SQRT_2PI;

const NATAF_NODES: usize = 32;
const NATAF_TOL: f64 = 1e-12;
const NATAF_MAX_ITER: usize = 200;
/// Largest |r| tried for the adjusted correlation.
const RHO_LIMIT: f64 = 1.0 - 1e-9;

/// Zero-mean (or shifted) multivariate normal density with a cached factor.
#[derive(Clone, Debug)]
pub struct JointNormal {
    chol: Cholesky,
    mean: Option<Vec<f64>>,
    log_norm: f64,
}

impl JointNormal {
    pub fn new(cov: &Matrix) -> Result<Self> {
        let chol = Cholesky::new(cov)?;
        let m = cov.dim() as f64;
        let log_norm = -m * LN_SQRT_2PI - 0.5 * chol.log_det();
        Ok(Self { chol, mean: None, log_norm })
    }

    pub fn with_mean(cov: &Matrix, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch { expected: cov.dim(), got: mean.len() });
        }
        let mut d = Self::new(cov)?;
        d.mean = Some(mean);
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.chol.dim()
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn mean(&self) -> Option<&[f64]> {
        self.mean.as_deref()
    }

    /// Log density. `u` must have length [`dim`](Self::dim).
    pub fn log_pdf(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim());
        let q = match &self.mean {
            None => self.chol.quad_form(u),
            Some(mu) => {
                let centered: Vec<f64> = u.iter().zip(mu).map(|(a, b)| a - b).collect();
                self.chol.quad_form(&centered)
            }
        };
        self.log_norm - 0.5 * q
    }

    pub fn pdf(&self, u: &[f64]) -> f64 {
        self.log_pdf(u).exp()
    }
}

/// Density of N(0, cov) at `u`.
pub fn joint_normal_pdf(cov: &Matrix, u: &[f64]) -> Result<f64> {
    joint_normal_log_pdf(cov, u).map(f64::exp)
}

/// Log density of N(0, cov) at `u`.
pub fn joint_normal_log_pdf(cov: &Matrix, u: &[f64]) -> Result<f64> {
    if u.len() != cov.dim() {
        return Err(Error::DimensionMismatch { expected: cov.dim(), got: u.len() });
    }
    Ok(JointNormal::new(cov)?.log_pdf(u))
}

/// Gauss–Hermite nodes and weights for the weight function exp(−t²).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // orthonormal Hermite recurrence
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Standard-normal expectation rule: E[h(Z)] ≈ Σ w_k h(z_k).
#[derive(Clone, Debug)]
struct NormalRule {
    z: Vec<f64>,
    w: Vec<f64>,
}

impl NormalRule {
    fn new(n: usize) -> Self {
        let (t, w) = gauss_hermite(n);
        let s = PI.sqrt();
        Self {
            z: t.iter().map(|t| t * std::f64::consts::SQRT_2).collect(),
            w: w.iter().map(|w| w / s).collect(),
        }
    }

    /// Mean and standard deviation of `marginal` under the rule.
    fn moments(&self, marginal: &MarginalDistribution) -> (f64, f64) {
        let mut m1 = 0.0;
        for (z, w) in self.z.iter().zip(&self.w) {
            m1 += w * marginal.from_standard_normal(*z);
        }
        let mut var = 0.0;
        for (z, w) in self.z.iter().zip(&self.w) {
            let d = marginal.from_standard_normal(*z) - m1;
            var += w * d * d;
        }
        (m1, var.sqrt())
    }
}

/// Correlation of two marginals joined by a Gaussian copula with parameter `r`.
#[derive(Clone, Debug)]
struct PairIntegral {
    rule: NormalRule,
    /// Standardized marginal values at the rule nodes for the first variable.
    xi: Vec<f64>,
    mj: MarginalDistribution,
    mean_j: f64,
    sd_j: f64,
}

impl PairIntegral {
    fn new(rule: &NormalRule, mi: &MarginalDistribution, mj: &MarginalDistribution) -> Self {
        let (mean_i, sd_i) = rule.moments(mi);
        let (mean_j, sd_j) = rule.moments(mj);
        let xi = rule.z.iter().map(|z| (mi.from_standard_normal(*z) - mean_i) / sd_i).collect();
        Self { rule: rule.clone(), xi, mj: *mj, mean_j, sd_j }
    }

    fn correlation(&self, r: f64) -> f64 {
        let s = (1.0 - r * r).sqrt();
        let mut total = 0.0;
        for (k, (z1, w1)) in self.rule.z.iter().zip(&self.rule.w).enumerate() {
            let mut inner = 0.0;
            for (z2, w2) in self.rule.z.iter().zip(&self.rule.w) {
                let xj = (self.mj.from_standard_normal(r * z1 + s * z2) - self.mean_j) / self.sd_j;
                inner += w2 * xj;
            }
            total += w1 * self.xi[k] * inner;
        }
        total
    }
}

/// Solves the Nataf integral equation for one pair: the Gaussian-copula
/// parameter whose physical-space correlation equals `target`.
fn solve_pair(pair: &PairIntegral, target: f64) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (-RHO_LIMIT, RHO_LIMIT);
    let mut f_lo = pair.correlation(lo) - target;
    let f_hi = pair.correlation(hi) - target;
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::NoConvergence {
            what: format!("Nataf adjustment (target correlation {target} is not attainable)"),
            iterations: 0,
        });
    }
    // regula falsi with the Illinois modification
    let mut f_hi = f_hi;
    let mut side = 0i8;
    for _ in 0..NATAF_MAX_ITER {
        let r = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let f = pair.correlation(r) - target;
        if f.abs() < NATAF_TOL || (hi - lo) < 1e-15 {
            return Ok(r);
        }
        if f < 0.0 {
            lo = r;
            f_lo = f;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = r;
            f_hi = f;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::NoConvergence { what: "Nataf adjustment".into(), iterations: NATAF_MAX_ITER })
}

/// Marginals joined by a Gaussian copula.
#[derive(Clone, Debug)]
pub struct NatafTransform {
    marginals: Vec<MarginalDistribution>,
    rho_x: Matrix,
    rho_u: Matrix,
    chol_u: Cholesky,
}

impl NatafTransform {
    /// Independent marginals (identity correlation).
    pub fn independent(marginals: Vec<MarginalDistribution>) -> Result<Self> {
        let m = marginals.len();
        Self::build(marginals, Matrix::identity(m))
    }

    pub fn build(marginals: Vec<MarginalDistribution>, rho_x: Matrix) -> Result<Self> {
        let m = marginals.len();
        if m == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        validate_correlation(&rho_x, m)?;
        Cholesky::new(&rho_x)
            .map_err(|e| Error::NotPositiveDefinite(format!("input correlation: {e}")))?;

        let mut rho_u = Matrix::identity(m);
        let mut rule = None;
        for i in 0..m {
            for j in 0..i {
                let target = rho_x[(i, j)];
                let both_normal = marginals[i].kind() == DistributionKind::Normal
                    && marginals[j].kind() == DistributionKind::Normal;
                let r = if target == 0.0 || both_normal {
                    target
                } else {
                    let rule = rule.get_or_insert_with(|| NormalRule::new(NATAF_NODES));
                    solve_pair(&PairIntegral::new(rule, &marginals[i], &marginals[j]), target)?
                };
                rho_u[(i, j)] = r;
                rho_u[(j, i)] = r;
            }
        }
        let chol_u = Cholesky::new(&rho_u)
            .map_err(|e| Error::NotPositiveDefinite(format!("adjusted correlation: {e}")))?;
        Ok(Self { marginals, rho_x, rho_u, chol_u })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[MarginalDistribution] {
        &self.marginals
    }

    pub fn rho_x(&self) -> &Matrix {
        &self.rho_x
    }

    /// Correlation matrix of the standard normal space (`C_UU0`).
    pub fn rho_u(&self) -> &Matrix {
        &self.rho_u
    }

    pub fn chol_u(&self) -> &Cholesky {
        &self.chol_u
    }

    /// True when the standard normal space is uncorrelated.
    pub fn is_independent(&self) -> bool {
        self.rho_u == Matrix::identity(self.dim())
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }

    /// Independent standard normal `u` to correlated standard normal `z = L u`.
    pub fn u_to_z(&self, u: &[f64]) -> Vec<f64> {
        self.chol_u.mul_lower(u)
    }

    pub fn z_to_u(&self, z: &[f64]) -> Vec<f64> {
        self.chol_u.solve_lower(z)
    }

    /// x_i = F_i⁻¹(Φ(z_i)).
    pub fn z_to_x(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.marginals).map(|(z, m)| m.from_standard_normal(*z)).collect()
    }

    pub fn x_to_z(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        x.iter().zip(&self.marginals).map(|(x, m)| m.to_standard_normal(*x)).collect()
    }

    pub fn u_to_x(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u)?;
        Ok(self.z_to_x(&self.u_to_z(u)))
    }

    pub fn x_to_u(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.z_to_u(&self.x_to_z(x)?))
    }
}

fn validate_correlation(rho: &Matrix, m: usize) -> Result<()> {
    if rho.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: rho.dim() });
    }
    if !rho.is_symmetric(1e-12) {
        return Err(Error::InvalidCorrelation("matrix is not symmetric".into()));
    }
    for i in 0..m {
        if (rho[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCorrelation(format!("diagonal entry {i} is not 1")));
        }
        for j in 0..i {
            let r = rho[(i, j)];
            if !(r > -1.0 && r < 1.0) {
                return Err(Error::InvalidCorrelation(format!(
                    "entry ({i}, {j}) = {r} outside (-1, 1)"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use crate::special::FRAC_1_SQRT_2PI;

    fn pair_matrix(r: f64) -> Matrix {
        Matrix::from_rows(&[vec![1.0, r], vec![r, 1.0]]).unwrap()
    }

    /// Physical-space correlation under copula parameter `r` by a
    /// trapezoidal grid over [-9, 9]², independent of the Gauss–Hermite rule.
    fn trapezoid_correlation(a: &MarginalDistribution, b: &MarginalDistribution, r: f64) -> f64 {
        let n = 1200;
        let h = 18.0 / n as f64;
        let grid: Vec<f64> = (0..=n).map(|k| -9.0 + k as f64 * h).collect();
        let det = 1.0 - r * r;
        let (mut e1, mut e2, mut e11, mut e22, mut e12) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &z1 in &grid {
            let x1 = a.from_standard_normal(z1);
            for &z2 in &grid {
                let x2 = b.from_standard_normal(z2);
                let q = (z1 * z1 - 2.0 * r * z1 * z2 + z2 * z2) / det;
                let w = (-0.5 * q).exp() / (2.0 * PI * det.sqrt()) * h * h;
                e1 += w * x1;
                e2 += w * x2;
                e11 += w * x1 * x1;
                e22 += w * x2 * x2;
                e12 += w * x1 * x2;
            }
        }
        (e12 - e1 * e2) / ((e11 - e1 * e1) * (e22 - e2 * e2)).sqrt()
    }

    #[test]
    fn gauss_hermite_integrates_polynomials() {
        let rule = NormalRule::new(32);
        let m = |k: i32| rule.z.iter().zip(&rule.w).map(|(z, w)| w * z.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
        assert!((m(6) - 15.0).abs() < 1e-10);
    }

    #[test]
    fn independence_is_preserved() {
        let marginals = vec![
            MarginalDistribution::lognormal(1.0, 0.5).unwrap(),
            MarginalDistribution::uniform(0.0, 1.0).unwrap(),
        ];
        let t = NatafTransform::independent(marginals).unwrap();
        assert_eq!(*t.rho_u(), Matrix::identity(2));
        assert!(t.is_independent());
    }

    #[test]
    fn normal_pair_needs_no_adjustment() {
        let marginals = vec![MarginalDistribution::normal(0.0, 1.0).unwrap(); 2];
        let t = NatafTransform::build(marginals, pair_matrix(0.5)).unwrap();
        assert_eq!(t.rho_u()[(0, 1)], 0.5);
    }

    #[test]
    fn lognormal_pair_adjustment() {
        let ln = MarginalDistribution::lognormal(1.0, 0.5).unwrap();
        let t = NatafTransform::build(vec![ln, ln], pair_matrix(0.8)).unwrap();
        let r = t.rho_u()[(0, 1)];
        // closed form for two lognormals
        let d2 = 0.25f64;
        let exact = (1.0 + 0.8 * d2).ln() / (1.0 + d2).ln();
        assert!((r - exact).abs() < 1e-6, "r={r} exact={exact}");
        let back = trapezoid_correlation(&ln, &ln, r);
        assert!((back - 0.8).abs() < 1e-6, "back={back}");
    }

    #[test]
    fn mixed_pair_roundtrip() {
        let a = MarginalDistribution::lognormal(20.0, 4.0).unwrap();
        let b = MarginalDistribution::uniform(3.0, 1.0).unwrap();
        for &target in &[-0.6, -0.2, 0.3, 0.7] {
            let t = NatafTransform::build(vec![a, b], pair_matrix(target)).unwrap();
            let back = trapezoid_correlation(&a, &b, t.rho_u()[(0, 1)]);
            assert!((back - target).abs() < 1e-6, "target={target} back={back}");
        }
    }

    #[test]
    fn unattainable_correlation() {
        // strongly skewed lognormals cannot reach −0.99
        let ln = MarginalDistribution::lognormal(1.0, 2.0).unwrap();
        let err = NatafTransform::build(vec![ln, ln], pair_matrix(-0.99)).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn rejects_bad_correlation() {
        let marginals = vec![MarginalDistribution::normal(0.0, 1.0).unwrap(); 3];
        let not_pd = Matrix::from_rows(&[
            vec![1.0, 0.9, -0.9],
            vec![0.9, 1.0, 0.9],
            vec![-0.9, 0.9, 1.0],
        ])
        .unwrap();
        assert!(matches!(
            NatafTransform::build(marginals.clone(), not_pd),
            Err(Error::NotPositiveDefinite(_))
        ));
        let mut asym = Matrix::identity(3);
        asym[(0, 1)] = 0.2;
        assert!(matches!(NatafTransform::build(marginals, asym), Err(Error::InvalidCorrelation(_))));
    }

    #[test]
    fn mean_point_maps_to_median() {
        let marginals = vec![
            MarginalDistribution::normal(200.0, 60.0).unwrap(),
            MarginalDistribution::normal(-3.0, 0.1).unwrap(),
        ];
        let t = NatafTransform::independent(marginals).unwrap();
        assert_eq!(t.u_to_x(&[0.0, 0.0]).unwrap(), vec![200.0, -3.0]);
    }

    #[test]
    fn independent_map_is_marginal_quantile() {
        let marginals = vec![
            MarginalDistribution::lognormal(20.0, 4.0).unwrap(),
            MarginalDistribution::uniform(1.0, 0.3).unwrap(),
        ];
        let t = NatafTransform::independent(marginals.clone()).unwrap();
        let u = [0.7, -1.3];
        let x = t.u_to_x(&u).unwrap();
        for k in 0..2 {
            let q = marginals[k].quantile(crate::special::norm_cdf(u[k])).unwrap();
            assert!((x[k] - q).abs() < 1e-12 * q.abs().max(1.0));
        }
    }

    #[test]
    fn roundtrip_u_x_u() {
        let marginals = vec![
            MarginalDistribution::lognormal(1.0, 0.5).unwrap(),
            MarginalDistribution::normal(5.0, 2.0).unwrap(),
            MarginalDistribution::uniform(0.0, 1.0).unwrap(),
        ];
        let rho = Matrix::from_rows(&[
            vec![1.0, 0.4, 0.2],
            vec![0.4, 1.0, -0.3],
            vec![0.2, -0.3, 1.0],
        ])
        .unwrap();
        let t = NatafTransform::build(marginals, rho).unwrap();
        assert!(t.chol_u().reconstruct().max_abs_diff(t.rho_u()) < 1e-12);
        let rng = CounterRng::new(11);
        for i in 0..500 {
            let mut u = [0.0; 3];
            rng.fill_standard_normal(i, &mut u);
            let back = t.x_to_u(&t.u_to_x(&u).unwrap()).unwrap();
            for k in 0..3 {
                assert!((back[k] - u[k]).abs() < 1e-8, "{u:?} {back:?}");
            }
        }
    }

    #[test]
    fn sampled_correlation_matches_target() {
        let ln = MarginalDistribution::lognormal(1.0, 0.5).unwrap();
        let t = NatafTransform::build(vec![ln, ln], pair_matrix(0.8)).unwrap();
        let rng = CounterRng::new(2024);
        let n = 1_000_000u64;
        let (mut s1, mut s2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut u = [0.0; 2];
        for i in 0..n {
            rng.fill_standard_normal(i, &mut u);
            let x = t.u_to_x(&u).unwrap();
            s1 += x[0];
            s2 += x[1];
            s11 += x[0] * x[0];
            s22 += x[1] * x[1];
            s12 += x[0] * x[1];
        }
        let nf = n as f64;
        let cov = s12 / nf - s1 * s2 / (nf * nf);
        let v1 = s11 / nf - (s1 / nf).powi(2);
        let v2 = s22 / nf - (s2 / nf).powi(2);
        let corr = cov / (v1 * v2).sqrt();
        assert!((corr - 0.8).abs() < 5e-3, "corr={corr}");
    }

    #[test]
    fn joint_pdf_examples() {
        let one = Matrix::identity(1);
        assert!((joint_normal_pdf(&one, &[0.0]).unwrap() - FRAC_1_SQRT_2PI).abs() < 1e-16);
        let two = Matrix::identity(2);
        let v = joint_normal_pdf(&two, &[1.0, 1.0]).unwrap();
        assert!((v - (-1.0f64).exp() / (2.0 * PI)).abs() < 1e-16);
        assert!(matches!(
            joint_normal_pdf(&pair_matrix(1.5), &[0.0, 0.0]),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(joint_normal_pdf(&two, &[1.0]).is_err());
    }

    #[test]
    fn joint_pdf_matches_independent_linear_algebra() {
        let rows = vec![vec![1.0, 0.3, 0.3], vec![0.3, 1.0, 0.3], vec![0.3, 0.3, 1.0]];
        let cov = Matrix::from_rows(&rows).unwrap();
        let u = [0.5, -0.2, 1.0];
        let na = nalgebra::DMatrix::from_row_slice(3, 3, &rows.concat());
        let inv = na.clone().try_inverse().unwrap();
        let v = nalgebra::DVector::from_row_slice(&u);
        let q = (v.transpose() * inv * &v)[(0, 0)];
        let expected = (-0.5 * q).exp() / ((2.0 * PI).powi(3) * na.determinant()).sqrt();
        let got = joint_normal_pdf(&cov, &u).unwrap();
        assert!((got / expected - 1.0).abs() < 1e-13, "{got} vs {expected}");
    }

    #[test]
    fn shifted_density() {
        let d = JointNormal::with_mean(&Matrix::identity(2), vec![3.0, 0.0]).unwrap();
        let base = JointNormal::new(&Matrix::identity(2)).unwrap();
        assert!((d.log_pdf(&[3.5, 0.2]) - base.log_pdf(&[0.5, 0.2])).abs() < 1e-15);
    }

    #[test]
    fn deep_tail_log_density_is_finite() {
        let d = JointNormal::new(&Matrix::identity(5)).unwrap();
        let lp = d.log_pdf(&[40.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(lp.is_finite());
        assert_eq!(d.pdf(&[40.0, 0.0, 0.0, 0.0, 0.0]), 0.0);
    }
}
