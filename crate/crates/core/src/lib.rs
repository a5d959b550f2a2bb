//! Fractional-noise calculus and the stochastic heat equation
//! `du = (Δu + f) dt + Σ_k g^k δβ^k_t` driven by i.i.d. fractional Brownian
//! motions with Hurst index `H ∈ (1/2, 1)`.

// `!(x > 0.0)` is the validation idiom throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fbm;
pub mod kernel;
pub mod malliavin;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
