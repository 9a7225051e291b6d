//! Information-theoretic bounded rational decision making.
//!
//! The crate is `no_std` (with `alloc`) and contains the numerical pieces:
//!
//! - [`world`]: world-state distributions and utility functions over the
//!   unit action cube, including the Gaussian multi-world task.
//! - [`baseline`]: exact fixed-point solvers for the single-stage and
//!   two-stage free-energy problems on a discretized action grid, and the
//!   rate-distortion frontier they trace.
//! - [`mcmc`]: annealed Metropolis-Hastings chains used as anytime
//!   decision makers, over continuous actions and over prior indices.
//! - [`vae`]: a small variational autoencoder over action vectors with
//!   hand-derived gradients, used as a sampleable, trainable prior.
//! - [`agents`]: single-prior agents and multi-prior systems that combine
//!   the pieces above, plus the empirical information/utility estimators.
//!
//! All randomness flows through an explicitly passed [`RngState`].

#![no_std]
// `!(x >= 0.0)` style checks deliberately reject NaN; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agents;
pub mod baseline;
mod error;
pub mod mcmc;
mod rng;
pub mod vae;
pub mod world;

pub use error::{Error, Result};
pub use rng::RngState;
pub use world::{clamp01, make_gaussian_task, GaussianTaskSpec, Utility, WorldModel};
