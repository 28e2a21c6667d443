//! Backward Euler-Maruyama (BEM) integration for SDEs with Markovian
//! switching, together with the tools to study its long-run behaviour:
//!
//! - [`markov`]: generators, stationary laws, `exp(ΔQ)` and chain sampling
//! - [`model`]: regime-indexed coefficients and audits of their constants
//! - [`stability`]: `β`, `λ`, `p0`, `η_p` and the implicit-step bound
//! - [`bem`]: implicit and explicit path simulation, coupled paths, ensembles
//! - [`measure`]: `d_p` Wasserstein distance, ECDFs, KS tests, moments
//! - [`oracle`]: closed-form reference paths for the scalar cubic model
//! - [`coupling`]: fine-grid noise shared across step sizes

#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::too_many_arguments
)]

pub mod bem;
pub mod coupling;
pub mod error;
pub mod markov;
pub mod measure;
pub mod model;
pub mod oracle;
pub mod presets;
pub mod rng;
pub mod stability;

pub use error::{Error, Result};
