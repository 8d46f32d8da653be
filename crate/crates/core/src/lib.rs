//! Surrogate-assisted Negatively Correlated Search.
//!
//! Candidates are sampled in the full parameter space, compressed by a frozen
//! autoencoder encoder, scored by a classifier wrapped in Poincare-ball maps, and only
//! the most promising candidate per subpopulation receives a real evaluation.
//!
//! Module map:
//! - [`hyperbolic`]: Mobius addition and exponential/logarithmic maps on the ball.
//! - [`net`]: dense network kernel, Adam, checkpoints.
//! - [`embedding`]: autoencoder and random-projection embeddings.
//! - [`surrogate`]: labeling, the hyperbolic classifier, pre-selection.
//! - [`ncs`]: the search loop.
//! - [`problems`]: fitness functions with evaluation counting and budgets.
//! - [`harness`]: configuration, rank correlation, audits, sweeps, exports.

pub mod embedding;
pub mod error;
pub mod harness;
pub mod hyperbolic;
pub mod ncs;
pub mod net;
pub mod problems;
pub mod seed;
pub mod surrogate;

pub use error::{Error, Result};
