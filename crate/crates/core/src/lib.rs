//! Bayesian pairwise registration of functional data.
//!
//! Functions are compared through their square-root slope functions (SRSFs),
//! warping functions through their square-root densities on the unit
//! Hilbert sphere. A truncated wrapped-normal prior on warps is combined with
//! a Gaussian likelihood on SRSF differences; the noise precision is
//! integrated out analytically and the resulting marginal posterior is
//! explored by importance sampling and resampling.

pub mod analysis;
pub mod basis;
pub mod dp;
pub mod error;
pub mod function;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod sim;
pub mod sphere;

pub use error::{AlignError, Result};
