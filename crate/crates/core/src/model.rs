//! A reliability problem: named random inputs, their joint distribution and a
//! limit state over them.

use crate::error::{Error, Result};
use crate::form::{form_search, FormOptions, FormResult};
use crate::limit_state::LimitState;
use crate::sampling::{self, PfEstimate, SampleBatch, SamplingPlan};
use crate::transform::NatafTransform;

#[derive(Clone, Debug)]
pub struct Model {
    names: Vec<String>,
    transform: NatafTransform,
    limit_state: LimitState,
}

impl Model {
    pub fn new(names: Vec<String>, transform: NatafTransform, limit_state: LimitState) -> Result<Self> {
        if names.len() != transform.dim() {
            return Err(Error::DimensionMismatch { expected: transform.dim(), got: names.len() });
        }
        if limit_state.min_input_len() > transform.dim() {
            return Err(Error::DimensionMismatch { expected: limit_state.min_input_len(), got: transform.dim() });
        }
        Ok(Self { names, transform, limit_state })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn transform(&self) -> &NatafTransform {
        &self.transform
    }

    pub fn limit_state(&self) -> &LimitState {
        &self.limit_state
    }

    /// Replaces the limit state, keeping the inputs.
    pub fn with_limit_state(&self, limit_state: LimitState) -> Result<Self> {
        Self::new(self.names.clone(), self.transform.clone(), limit_state)
    }

    pub fn form(&self, opts: &FormOptions) -> Result<FormResult> {
        form_search(&self.limit_state, &self.transform, opts)
    }

    pub fn sample(&self, plan: &SamplingPlan) -> Result<(SampleBatch, PfEstimate)> {
        sampling::run(&self.limit_state, &self.transform, plan)
    }
}
