#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod distributions;
pub mod error;
pub mod form;
pub mod harness;
pub mod limit_state;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod sensitivity;
pub mod serde_float;
pub mod special;
pub mod transform;
