//! Bayesian linear mode regression.
//!
//! Three posteriors for the coefficients of a conditional-mode line
//! `y = x'β + ε`, where ε has mode zero:
//!
//! - [`pbmr`]: a working likelihood that rewards observations inside a
//!   window `|y - x'β| ≤ σ`, with σ fixed or given a uniform prior.
//! - [`nbmr`]: a truncated Dirichlet-process scale mixture of uniforms for
//!   the error density.
//! - [`elbmr`]: an empirical likelihood built on the derivative of the
//!   rectangular kernel.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod elbmr;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mcmc;
pub mod model;
pub mod nbmr;
pub mod pbmr;
pub mod scalar;
pub mod simgen;
pub mod special;
pub mod summary;
pub mod window;

#[cfg(test)]
mod testutil;

pub use error::{ModeError, Result};
pub use mcmc::{Chain, SamplerConfig, UpdateScheme};
pub use model::{Dataset, ModeParams};
pub use scalar::Scalar;
pub use special::Rng;

pub type DatasetF64 = model::Dataset<f64>;
pub type ChainF64 = mcmc::Chain<f64>;
pub type SamplerConfigF64 = mcmc::SamplerConfig<f64>;
pub type ModeParamsF64 = model::ModeParams<f64>;
pub type PriorSpecF64 = pbmr::PriorSpec<f64>;
pub type DatasetF32 = model::Dataset<f32>;
pub type ChainF32 = mcmc::Chain<f32>;
