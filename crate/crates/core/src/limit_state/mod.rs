//! Limit-state functions `g(x)`; failure is `g ≤ 0`.

mod expr;

use std::collections::HashMap;
use std::f64::consts::PI;

pub use expr::{identifiers, Expression};

use crate::error::{Error, Result};

/// Terzaghi bearing factors (N_d0, N_b0, N_c0) for a friction angle in radians.
pub fn bearing_factors(phi_rad: f64) -> Result<(f64, f64, f64)> {
    if !(phi_rad > 0.0) || phi_rad >= PI / 2.0 {
        return Err(Error::DomainError(phi_rad));
    }
    let t = phi_rad.tan();
    let nd = (PI / 4.0 + phi_rad / 2.0).tan().powi(2) * (PI * t).exp();
    Ok((nd, (nd - 1.0) * t, (nd - 1.0) / t))
}

/// Bearing resistance R_sp of a strip footing of width `b` at depth `d`.
/// The friction angle is given in degrees.
pub fn bearing_resistance(b: f64, d: f64, phi_deg: f64, cohesion: f64, unit_weight: f64) -> Result<f64> {
    let (nd, nb, nc) = bearing_factors(phi_deg.to_radians())?;
    Ok(b * (unit_weight * d * nd + unit_weight * b * nb + cohesion * nc))
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Linear { a0: f64, a: Vec<f64> },
    Terzaghi { width: f64, depth: f64 },
    Expression(Expression),
}

/// A deterministic scalar function of the physical-space input vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitState {
    kind: Kind,
    input_names: Vec<String>,
    /// Positions in the model's variable vector feeding each input, if the
    /// model orders variables differently from `input_names`.
    gather: Option<Vec<usize>>,
}

impl LimitState {
    /// `g(x) = a0 + Σ a_i x_i`.
    pub fn linear(a0: f64, a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::EmptyCoefficients);
        }
        let input_names = (1..=a.len()).map(|i| format!("x{i}")).collect();
        Ok(Self { kind: Kind::Linear { a0, a }, input_names, gather: None })
    }

    /// Bearing failure of a shallow strip foundation, `g = R_sp − N_load`.
    ///
    /// Inputs, in order: load `N_load`, friction angle `phi` in degrees,
    /// cohesion `c`, soil unit weight `gamma_s`.
    pub fn terzaghi_bearing(b: f64, d: f64) -> Result<Self> {
        if !(b > 0.0) || !(d >= 0.0) || !b.is_finite() || !d.is_finite() {
            return Err(Error::DomainError(if b > 0.0 { d } else { b }));
        }
        Ok(Self {
            kind: Kind::Terzaghi { width: b, depth: d },
            input_names: ["N_load", "phi", "c", "gamma_s"].iter().map(|s| s.to_string()).collect(),
            gather: None,
        })
    }

    /// Parses a user expression over `input_names`.
    pub fn parse_expression(text: &str, input_names: Vec<String>) -> Result<Self> {
        Self::parse_expression_with_constants(text, input_names, &HashMap::new())
    }

    pub fn parse_expression_with_constants(
        text: &str,
        input_names: Vec<String>,
        constants: &HashMap<String, f64>,
    ) -> Result<Self> {
        let e = Expression::parse(text, &input_names, constants)?;
        Ok(Self { kind: Kind::Expression(e), input_names, gather: None })
    }

    /// Reads input `k` from position `positions[k]` of the evaluation vector.
    pub fn with_gather(mut self, positions: Vec<usize>) -> Result<Self> {
        if positions.len() != self.input_names.len() {
            return Err(Error::DimensionMismatch { expected: self.input_names.len(), got: positions.len() });
        }
        self.gather = Some(positions);
        Ok(self)
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    /// Length of the vector passed to [`eval`](Self::eval).
    pub fn min_input_len(&self) -> usize {
        match &self.gather {
            Some(p) => p.iter().max().map_or(0, |m| m + 1),
            None => self.input_names.len(),
        }
    }

    /// `(a0, a)` for linear limit states.
    pub fn linear_coefficients(&self) -> Option<(f64, &[f64])> {
        match (&self.kind, &self.gather) {
            (Kind::Linear { a0, a }, None) => Some((*a0, a)),
            _ => None,
        }
    }

    /// Evaluates `g(x)`. Domain faults yield NaN.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.gather {
            None => self.eval_inputs(x),
            Some(pos) => {
                let mut buf = [0.0; 16];
                if pos.len() <= buf.len() {
                    for (b, p) in buf.iter_mut().zip(pos) {
                        *b = x[*p];
                    }
                    self.eval_inputs(&buf[..pos.len()])
                } else {
                    let v: Vec<f64> = pos.iter().map(|p| x[*p]).collect();
                    self.eval_inputs(&v)
                }
            }
        }
    }

    fn eval_inputs(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Linear { a0, a } => a0 + a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>(),
            Kind::Terzaghi { width, depth } => {
                bearing_resistance(*width, *depth, x[1], x[2], x[3]).map_or(f64::NAN, |r| r - x[0])
            }
            Kind::Expression(e) => e.eval(x),
        }
    }

    /// Evaluates `g(x)` and reports non-finite results as errors.
    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        let n = self.min_input_len();
        if x.len() < n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        let g = self.eval(x);
        if g.is_finite() {
            Ok(g)
        } else {
            Err(Error::EvaluationError(format!("limit state evaluated to {g} at {x:?}")))
        }
    }
}

/// Failure indicator: 1 iff `g ≤ 0`.
pub fn indicator(g: f64) -> Result<u8> {
    if !g.is_finite() {
        return Err(Error::NonFiniteValue(g));
    }
    Ok(u8::from(g <= 0.0))
}
