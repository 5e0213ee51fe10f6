//! JSON analysis files.
//!
//! ```json
//! {
//!   "variables": [
//!     {"name": "N", "distribution": "normal", "mean": 200, "std": 60},
//!     {"name": "phi", "distribution": "lognormal", "mean": 20, "std": 4}
//!   ],
//!   "correlation": [{"pair": ["N", "phi"], "rho": 0.2}],
//!   "limit_state": {"type": "linear", "a0": 2.0, "coefficients": [-0.8, -0.5]},
//!   "analysis": {"method": "is", "n_samples": 1000, "seed": 1, "delta_var": 0.1,
//!                "runs": 100, "is_center": "form"}
//! }
//! ```
//!
//! `distribution` is one of `normal`, `lognormal`, `uniform`,
//! `truncated_normal`; the last one also needs `lower` and `upper`, and its
//! `mean`/`std` describe the normal before truncation.
//!
//! Limit states:
//! - `{"type": "linear", "a0": .., "coefficients": [..] | {"name": a, ..}}`
//! - `{"type": "terzaghi", "b": .., "d": .., "bindings": {"load": .., "phi": ..,
//!   "cohesion": .., "unit_weight": ..}}`. The friction angle variable is in
//!   **degrees**.
//! - `{"type": "expression", "text": "..", "bindings": {"ident": "variable"},
//!   "constants": {"name": value}}`. Without bindings, identifiers are the
//!   variable names.
//!
//! `n_samples` and `delta_var` accept a number or a list. `is_center` is
//! `"form"` (default), `"origin"` or an explicit standard normal vector.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::Deserialize;

use crate::distributions::{DistributionKind, MarginalDistribution};
use crate::error::{Error, Result};
use crate::form::FormOptions;
use crate::harness::{ReferenceRow, StudyConfig};
use crate::limit_state::LimitState;
use crate::linalg::Matrix;
use crate::model::Model;
use crate::sampling::{Method, SamplingPlan};
use crate::sensitivity::DEFAULT_DELTA_VAR;
use crate::transform::NatafTransform;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    variables: Vec<RawVariable>,
    #[serde(default)]
    correlation: Vec<RawCorrelation>,
    limit_state: RawLimitState,
    #[serde(default)]
    analysis: RawAnalysis,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariable {
    name: String,
    distribution: DistributionKind,
    mean: f64,
    std: f64,
    lower: Option<f64>,
    upper: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorrelation {
    pair: [String; 2],
    rho: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Coefficients {
    List(Vec<f64>),
    ByName(BTreeMap<String, f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TerzaghiBindings {
    load: String,
    phi: String,
    cohesion: String,
    unit_weight: String,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RawLimitState {
    Linear {
        a0: f64,
        coefficients: Coefficients,
    },
    Terzaghi {
        b: f64,
        d: f64,
        bindings: TerzaghiBindings,
    },
    Expression {
        text: String,
        #[serde(default)]
        bindings: BTreeMap<String, String>,
        #[serde(default)]
        constants: HashMap<String, f64>,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisMethod {
    Form,
    Mcs,
    Is,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCenter {
    Keyword(String),
    Vector(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    #[serde(default = "default_method")]
    method: AnalysisMethod,
    #[serde(default = "default_samples")]
    n_samples: OneOrMany<usize>,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_delta")]
    delta_var: OneOrMany<f64>,
    #[serde(default = "default_runs")]
    runs: usize,
    is_center: Option<RawCenter>,
}

fn default_method() -> AnalysisMethod {
    AnalysisMethod::Mcs
}
fn default_samples() -> OneOrMany<usize> {
    OneOrMany::One(10_000)
}
fn default_seed() -> u64 {
    1
}
fn default_delta() -> OneOrMany<f64> {
    OneOrMany::One(DEFAULT_DELTA_VAR)
}
fn default_runs() -> usize {
    1
}

impl Default for RawAnalysis {
    fn default() -> Self {
        Self {
            method: default_method(),
            n_samples: default_samples(),
            seed: default_seed(),
            delta_var: default_delta(),
            runs: default_runs(),
            is_center: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum IsCenter {
    Form,
    Origin,
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub method: AnalysisMethod,
    pub n_samples: Vec<usize>,
    pub seed: u64,
    pub delta_vars: Vec<f64>,
    pub runs: usize,
    pub is_center: IsCenter,
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    pub model: Model,
    pub analysis: Analysis,
}

impl AnalysisConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let field = if path == "." || path.is_empty() { "config".to_string() } else { path };
            Error::config(field, format!("{inner}"))
        })?;
        build(raw)
    }

    /// Sampling plans for a study with `method`, one per sample size. The IS
    /// center is resolved here, running FORM when requested.
    pub fn plans(&self, method: Method) -> Result<Vec<SamplingPlan>> {
        let center = match method {
            Method::MonteCarlo => None,
            Method::ImportanceSampling => Some(match &self.analysis.is_center {
                IsCenter::Form => self.form()?.u_star,
                IsCenter::Origin => vec![0.0; self.model.dim()],
                IsCenter::Vector(v) => v.clone(),
            }),
        };
        Ok(self
            .analysis
            .n_samples
            .iter()
            .map(|&n| match &center {
                None => SamplingPlan::monte_carlo(n, self.analysis.seed),
                Some(c) => SamplingPlan::importance(n, self.analysis.seed, c.clone()),
            })
            .collect())
    }

    pub fn study(&self, method: Method) -> Result<StudyConfig> {
        Ok(StudyConfig {
            model: self.model.clone(),
            plans: self.plans(method)?,
            delta_vars: self.analysis.delta_vars.clone(),
            runs: self.analysis.runs,
            base_seed: self.analysis.seed,
        })
    }

    /// FORM result; a non-converged search is an error.
    pub fn form(&self) -> Result<crate::form::FormResult> {
        let opts = FormOptions::default();
        let r = self.model.form(&opts)?;
        if !r.converged {
            return Err(Error::NoConvergence { what: "FORM design point search".into(), iterations: r.iterations });
        }
        Ok(r)
    }

    pub fn form_reference(&self) -> Result<ReferenceRow> {
        let r = self.form()?;
        Ok(ReferenceRow { label: "FORM".into(), beta: r.beta, indices: r.indices()? })
    }
}

fn build(raw: RawConfig) -> Result<AnalysisConfig> {
    if raw.variables.is_empty() {
        return Err(Error::config("variables", "at least one variable is required"));
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut marginals = Vec::with_capacity(raw.variables.len());
    for (i, v) in raw.variables.iter().enumerate() {
        let field = format!("variables[{i}]");
        if v.name.trim().is_empty() {
            return Err(Error::config(format!("{field}.name"), "empty variable name"));
        }
        if index.insert(v.name.as_str(), i).is_some() {
            return Err(Error::config(format!("{field}.name"), format!("duplicate variable name `{}`", v.name)));
        }
        let marginal = match (v.distribution, v.lower, v.upper) {
            (DistributionKind::TruncatedNormal, Some(lo), Some(hi)) => {
                MarginalDistribution::truncated_normal(v.mean, v.std, lo, hi)
            }
            (DistributionKind::TruncatedNormal, _, _) => {
                return Err(Error::config(field, "truncated_normal needs both `lower` and `upper`"))
            }
            (kind, None, None) => MarginalDistribution::from_moments(kind, v.mean, v.std),
            _ => return Err(Error::config(field, "`lower`/`upper` only apply to truncated_normal")),
        }
        .map_err(|e| Error::config(field, e.to_string()))?;
        marginals.push(marginal);
    }
    let m = marginals.len();
    let names: Vec<String> = raw.variables.iter().map(|v| v.name.clone()).collect();
    let lookup = |field: String, name: &str| -> Result<usize> {
        index.get(name).copied().ok_or_else(|| Error::config(field, format!("unknown variable `{name}`")))
    };

    let mut rho = Matrix::identity(m);
    let mut seen = HashSet::new();
    for (c, entry) in raw.correlation.iter().enumerate() {
        let field = format!("correlation[{c}]");
        let i = lookup(format!("{field}.pair"), &entry.pair[0])?;
        let j = lookup(format!("{field}.pair"), &entry.pair[1])?;
        if i == j {
            return Err(Error::config(format!("{field}.pair"), "a variable cannot be paired with itself"));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(Error::config(format!("{field}.pair"), "pair listed twice"));
        }
        if !(entry.rho.abs() < 1.0) {
            return Err(Error::config(format!("{field}.rho"), "correlation must lie in (-1, 1)"));
        }
        rho[(i, j)] = entry.rho;
        rho[(j, i)] = entry.rho;
    }
    let transform = if raw.correlation.is_empty() {
        NatafTransform::independent(marginals)
    } else {
        NatafTransform::build(marginals, rho)
    }
    .map_err(|e| Error::config("correlation", e.to_string()))?;

    let limit_state = build_limit_state(&raw.limit_state, &names, &lookup)?;
    let model = Model::new(names, transform, limit_state).map_err(|e| Error::config("limit_state", e.to_string()))?;
    let analysis = build_analysis(&raw.analysis, m)?;
    Ok(AnalysisConfig { model, analysis })
}

fn build_limit_state(
    raw: &RawLimitState,
    names: &[String],
    lookup: &dyn Fn(String, &str) -> Result<usize>,
) -> Result<LimitState> {
    let m = names.len();
    let wrap = |field: &str| {
        let field = field.to_string();
        move |e: Error| Error::config(field.clone(), e.to_string())
    };
    match raw {
        RawLimitState::Linear { a0, coefficients } => {
            let a = match coefficients {
                Coefficients::List(a) if a.len() == m => a.clone(),
                Coefficients::List(a) => {
                    return Err(Error::config(
                        "limit_state.coefficients",
                        format!("expected {m} coefficients, got {}", a.len()),
                    ))
                }
                Coefficients::ByName(map) => {
                    let mut a = vec![0.0; m];
                    for (name, value) in map {
                        a[lookup(format!("limit_state.coefficients.{name}"), name)?] = *value;
                    }
                    a
                }
            };
            LimitState::linear(*a0, a).map_err(wrap("limit_state.coefficients"))
        }
        RawLimitState::Terzaghi { b, d, bindings } => {
            let positions = vec![
                lookup("limit_state.bindings.load".into(), &bindings.load)?,
                lookup("limit_state.bindings.phi".into(), &bindings.phi)?,
                lookup("limit_state.bindings.cohesion".into(), &bindings.cohesion)?,
                lookup("limit_state.bindings.unit_weight".into(), &bindings.unit_weight)?,
            ];
            LimitState::terzaghi_bearing(*b, *d)
                .map_err(wrap("limit_state"))?
                .with_gather(positions)
                .map_err(wrap("limit_state.bindings"))
        }
        RawLimitState::Expression { text, bindings, constants } => {
            if bindings.is_empty() {
                return LimitState::parse_expression_with_constants(text, names.to_vec(), constants)
                    .map_err(wrap("limit_state.text"));
            }
            let mut idents = Vec::with_capacity(bindings.len());
            let mut positions = Vec::with_capacity(bindings.len());
            for (ident, var) in bindings {
                idents.push(ident.clone());
                positions.push(lookup(format!("limit_state.bindings.{ident}"), var)?);
            }
            LimitState::parse_expression_with_constants(text, idents, constants)
                .map_err(wrap("limit_state.text"))?
                .with_gather(positions)
                .map_err(wrap("limit_state.bindings"))
        }
    }
}

fn build_analysis(raw: &RawAnalysis, m: usize) -> Result<Analysis> {
    let n_samples = raw.n_samples.to_vec();
    if n_samples.is_empty() || n_samples.contains(&0) {
        return Err(Error::config("analysis.n_samples", "sample sizes must be positive"));
    }
    let delta_vars = raw.delta_var.to_vec();
    if delta_vars.is_empty() || delta_vars.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::config("analysis.delta_var", "step sizes must be positive"));
    }
    if raw.runs == 0 {
        return Err(Error::config("analysis.runs", "at least one run is required"));
    }
    let is_center = match &raw.is_center {
        None => IsCenter::Form,
        Some(RawCenter::Keyword(k)) if k == "form" => IsCenter::Form,
        Some(RawCenter::Keyword(k)) if k == "origin" => IsCenter::Origin,
        Some(RawCenter::Keyword(k)) => {
            return Err(Error::config("analysis.is_center", format!("expected \"form\", \"origin\" or a vector, got `{k}`")))
        }
        Some(RawCenter::Vector(v)) if v.len() != m => {
            return Err(Error::config("analysis.is_center", format!("expected {m} components, got {}", v.len())))
        }
        Some(RawCenter::Vector(v)) => IsCenter::Vector(v.clone()),
    };
    Ok(Analysis { method: raw.method, n_samples, seed: raw.seed, delta_vars, runs: raw.runs, is_center })
}
