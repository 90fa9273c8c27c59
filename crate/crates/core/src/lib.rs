//! Optimal prediction targets for diffusion and flow-matching models.
//!
//! The crate is split along the lines of the experiments it supports:
//!
//! - [`schedule`]: process coefficients (α, σ), prediction targets (φ, ψ),
//!   loss targets (ξ, η), the error scaling factor κ and time measures.
//! - [`analytic`]: moments of the effective measure, equilibrium weights,
//!   optimal losses and optimal `k`, for whitened and colored data.
//! - [`geometry`]: synthetic manifold data and noise samplers.
//! - [`lindyn`]: the single-layer linear denoiser, its gradient flow and a
//!   Monte Carlo estimator of its training loss.
//! - [`kdiff`]: learnable prediction targets, small differentiable networks
//!   and the training loop.
//! - [`sampler`]: Euler and Heun integration of the learned velocity field.
//!
//! Everything here is `no_std` + `alloc`. File formats, the CLI and
//! multi-threaded drivers live in the `kdiff-lab` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analytic;
pub mod error;
pub mod geometry;
pub mod kdiff;
pub mod lindyn;
pub mod math;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod schedule;

pub use error::{Error, Result};

/// Column-major dense matrix used throughout the crate.
///
/// Batches of vectors are stored one sample per column.
pub type Matrix = nalgebra::DMatrix<f64>;
