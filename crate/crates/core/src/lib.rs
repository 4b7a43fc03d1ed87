//! Sampling from composite logconcave densities ∝ exp(−f(x) − g(x)), where
//! f is smooth and strongly convex and g is convex with a restricted
//! Gaussian oracle.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod optimize;
pub mod oracles;
pub mod sampler;
pub mod special;

pub type Vector = nalgebra::DVector<f64>;

pub use error::{Error, Result};
pub use model::{CompositePotential, CompositeTarget, IsotropicGaussianFactor, SmoothPotential};
pub use sampler::{composite_sample, composite_sample_with, SamplerParams, ThetaPolicy};
