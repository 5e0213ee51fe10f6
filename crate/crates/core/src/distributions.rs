//! Univariate marginal distributions parameterized by their first two moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_isf, norm_pdf, norm_quantile, norm_sf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Normal,
    Lognormal,
    Uniform,
    TruncatedNormal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Params {
    Normal,
    /// ln X ~ N(lambda, zeta²)
    Lognormal { lambda: f64, zeta: f64 },
    Uniform { lower: f64, upper: f64 },
    /// Standardized bounds `a`, `b` of the parent normal and the retained mass.
    TruncatedNormal { lower: f64, upper: f64, a: f64, b: f64, cdf_a: f64, sf_b: f64, mass: f64 },
}

/// A univariate marginal distribution.
///
/// `mean` and `std_dev` are the moments the distribution was built from. For
/// [`DistributionKind::TruncatedNormal`] they describe the parent normal
/// before truncation; the truncated moments are not matched.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginalDistribution {
    kind: DistributionKind,
    mean: f64,
    std_dev: f64,
    params: Params,
}

impl MarginalDistribution {
    /// Builds a distribution with the given mean and standard deviation.
    ///
    /// Truncated normals need bounds; use [`MarginalDistribution::truncated_normal`].
    pub fn from_moments(kind: DistributionKind, mean: f64, std_dev: f64) -> Result<Self> {
        check_moments(mean, std_dev)?;
        let params = match kind {
            DistributionKind::Normal => Params::Normal,
            DistributionKind::Lognormal => {
                if mean <= 0.0 {
                    return Err(Error::InvalidMoments(format!(
                        "lognormal mean must be positive, got {mean}"
                    )));
                }
                let cov = std_dev / mean;
                let zeta2 = cov.mul_add(cov, 1.0).ln();
                Params::Lognormal { lambda: mean.ln() - 0.5 * zeta2, zeta: zeta2.sqrt() }
            }
            DistributionKind::Uniform => {
                let half = 3f64.sqrt() * std_dev;
                Params::Uniform { lower: mean - half, upper: mean + half }
            }
            DistributionKind::TruncatedNormal => {
                return Err(Error::InvalidMoments(
                    "truncated normal requires explicit bounds".into(),
                ))
            }
        };
        Ok(Self { kind, mean, std_dev, params })
    }

    pub fn normal(mean: f64, std_dev: f64) -> Result<Self> {
        Self::from_moments(DistributionKind::Normal, mean, std_dev)
    }

    pub fn lognormal(mean: f64, std_dev: f64) -> Result<Self> {
        Self::from_moments(DistributionKind::Lognormal, mean, std_dev)
    }

    pub fn uniform(mean: f64, std_dev: f64) -> Result<Self> {
        Self::from_moments(DistributionKind::Uniform, mean, std_dev)
    }

    /// Normal(mean, std_dev) restricted to `[lower, upper]`. Either bound may be infinite.
    pub fn truncated_normal(mean: f64, std_dev: f64, lower: f64, upper: f64) -> Result<Self> {
        check_moments(mean, std_dev)?;
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::InvalidMoments(format!(
                "truncation bounds must satisfy lower < upper, got [{lower}, {upper}]"
            )));
        }
        let a = (lower - mean) / std_dev;
        let b = (upper - mean) / std_dev;
        let cdf_a = norm_cdf(a);
        let sf_b = norm_sf(b);
        // Mass computed on the side of the distribution where it is accurate.
        let mass = if a > 0.0 { norm_sf(a) - sf_b } else { norm_cdf(b) - cdf_a };
        if !(mass > 0.0) {
            return Err(Error::InvalidMoments(format!(
                "truncation interval [{lower}, {upper}] carries no probability mass"
            )));
        }
        Ok(Self {
            kind: DistributionKind::TruncatedNormal,
            mean,
            std_dev,
            params: Params::TruncatedNormal { lower, upper, a, b, cdf_a, sf_b, mass },
        })
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std_dev(&self) -> f64 {
        self.std_dev
    }

    /// Lognormal (λ, ζ), if this is a lognormal distribution.
    pub fn lognormal_params(&self) -> Option<(f64, f64)> {
        match self.params {
            Params::Lognormal { lambda, zeta } => Some((lambda, zeta)),
            _ => None,
        }
    }

    /// Closed support interval (bounds may be infinite).
    pub fn support(&self) -> (f64, f64) {
        match self.params {
            Params::Normal => (f64::NEG_INFINITY, f64::INFINITY),
            Params::Lognormal { .. } => (0.0, f64::INFINITY),
            Params::Uniform { lower, upper } | Params::TruncatedNormal { lower, upper, .. } => {
                (lower, upper)
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.params {
            Params::Normal => norm_pdf((x - self.mean) / self.std_dev) / self.std_dev,
            Params::Lognormal { lambda, zeta } => {
                if x <= 0.0 {
                    0.0
                } else {
                    norm_pdf((x.ln() - lambda) / zeta) / (zeta * x)
                }
            }
            Params::Uniform { lower, upper } => {
                if (lower..=upper).contains(&x) {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
            Params::TruncatedNormal { lower, upper, mass, .. } => {
                if (lower..=upper).contains(&x) {
                    norm_pdf((x - self.mean) / self.std_dev) / (self.std_dev * mass)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.params {
            Params::Normal => norm_cdf((x - self.mean) / self.std_dev),
            Params::Lognormal { lambda, zeta } => {
                if x <= 0.0 {
                    0.0
                } else {
                    norm_cdf((x.ln() - lambda) / zeta)
                }
            }
            Params::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Params::TruncatedNormal { lower, upper, a, cdf_a, mass, .. } => {
                if x <= lower {
                    0.0
                } else if x >= upper {
                    1.0
                } else {
                    let z = (x - self.mean) / self.std_dev;
                    let p = if a > 0.0 {
                        (norm_sf(a) - norm_sf(z)) / mass
                    } else {
                        (norm_cdf(z) - cdf_a) / mass
                    };
                    p.clamp(0.0, 1.0)
                }
            }
        }
    }

    /// Upper tail 1 − F(x).
    pub fn sf(&self, x: f64) -> f64 {
        match self.params {
            Params::Normal => norm_sf((x - self.mean) / self.std_dev),
            Params::Lognormal { lambda, zeta } => {
                if x <= 0.0 {
                    1.0
                } else {
                    norm_sf((x.ln() - lambda) / zeta)
                }
            }
            Params::Uniform { lower, upper } => ((upper - x) / (upper - lower)).clamp(0.0, 1.0),
            Params::TruncatedNormal { lower, upper, sf_b, mass, .. } => {
                if x <= lower {
                    1.0
                } else if x >= upper {
                    0.0
                } else {
                    ((norm_sf((x - self.mean) / self.std_dev) - sf_b) / mass).clamp(0.0, 1.0)
                }
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(match self.params {
            Params::Normal => self.mean + self.std_dev * norm_quantile(p),
            Params::Lognormal { lambda, zeta } => (lambda + zeta * norm_quantile(p)).exp(),
            Params::Uniform { lower, upper } => {
                if p <= 0.5 {
                    lower + p * (upper - lower)
                } else {
                    upper - (1.0 - p) * (upper - lower)
                }
            }
            Params::TruncatedNormal { lower, upper, cdf_a, sf_b, mass, .. } => {
                let lower_tail = cdf_a + p * mass;
                let z = if lower_tail <= 0.5 {
                    norm_quantile(lower_tail)
                } else {
                    norm_isf(sf_b + (1.0 - p) * mass)
                };
                (self.mean + self.std_dev * z).clamp(lower, upper)
            }
        })
    }

    /// Maps a standard normal coordinate to this marginal: `quantile(Φ(z))`.
    ///
    /// Normal and lognormal use the exact affine/exponential map so deep-tail
    /// coordinates keep full precision.
    pub fn from_standard_normal(&self, z: f64) -> f64 {
        match self.params {
            Params::Normal => self.mean + self.std_dev * z,
            Params::Lognormal { lambda, zeta } => (lambda + zeta * z).exp(),
            Params::Uniform { lower, upper } => {
                if z <= 0.0 {
                    lower + norm_cdf(z) * (upper - lower)
                } else {
                    upper - norm_sf(z) * (upper - lower)
                }
            }
            Params::TruncatedNormal { lower, upper, cdf_a, sf_b, mass, .. } => {
                let zt = if z <= 0.0 {
                    norm_quantile(cdf_a + norm_cdf(z) * mass)
                } else {
                    norm_isf(sf_b + norm_sf(z) * mass)
                };
                (self.mean + self.std_dev * zt).clamp(lower, upper)
            }
        }
    }

    /// Inverse of [`from_standard_normal`](Self::from_standard_normal): `Φ⁻¹(F(x))`.
    pub fn to_standard_normal(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        if x.is_nan() || x < lo || x > hi {
            return Err(Error::DomainError(x));
        }
        Ok(match self.params {
            Params::Normal => (x - self.mean) / self.std_dev,
            Params::Lognormal { lambda, zeta } => {
                if x == 0.0 {
                    return Err(Error::DomainError(x));
                }
                (x.ln() - lambda) / zeta
            }
            _ => {
                let p = self.cdf(x);
                if p <= 0.5 {
                    norm_quantile(p)
                } else {
                    norm_isf(self.sf(x))
                }
            }
        })
    }
}

fn check_moments(mean: f64, std_dev: f64) -> Result<()> {
    if !mean.is_finite() {
        return Err(Error::InvalidMoments(format!("mean must be finite, got {mean}")));
    }
    if !(std_dev > 0.0) || !std_dev.is_finite() {
        return Err(Error::InvalidMoments(format!(
            "standard deviation must be positive and finite, got {std_dev}"
        )));
    }
    Ok(())
}
