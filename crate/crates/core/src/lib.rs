//! Coupling simulators and strong-mixing bounds for discrete-valued time
//! series driven by exogenous covariates.
//!
//! - [`process`]: covariate and noise processes, the joint environment, and
//!   mixing envelopes of finite covariate chains.
//! - [`doeblin`]: the Doeblin split of a transition matrix and the block
//!   coupling for Markov chains in a random environment.
//! - [`maps`]: random-map models (multinomial, ordinal, multiple choice),
//!   coalescence estimates and coupling from the past.
//! - [`contraction`]: models with a contracting intensity (binary links,
//!   Poisson INGARCH) and their truncated-restart coupling.
//! - [`bounds`] and [`decay`]: the mixing-bound calculators and the decay
//!   sequences they consume, with certified tail remainders.
//! - [`mixing`]: exact and plug-in alpha coefficients.
//! - [`experiment`]: TOML-configured runs, the acceptance catalog and reports.
//!
//! Every simulation draws from a [`rng::RngStream`]; replicate `i` uses
//! `substream(i)`, so output does not depend on the thread count.

// `!(x < y)` is how NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod contraction;
pub mod decay;
pub mod doeblin;
pub mod error;
pub mod experiment;
pub mod maps;
pub mod matrix;
pub mod mixing;
pub mod process;
pub mod rng;

pub use error::{Error, Result};
