//! Exact analysis of how feature age affects forecasting loss.
//!
//! The crate is organized bottom-up:
//!
//! - [`loss`]: generalized entropies, Bayes actions, mutual information and
//!   cross entropy for arbitrary losses over finite joint laws.
//! - [`divergence`]: Neyman's chi-squared divergence, chi-squared conditional
//!   mutual information, the epsilon-Markov coefficient and beta distances.
//! - [`aoi`]: age-of-information sample paths and stochastic ordering of
//!   age vectors.
//! - [`process`]: stationary hidden-Markov generators with exactly computable
//!   lagged window laws.
//! - [`analysis`]: minimum training loss as a function of age, its
//!   decomposition into two non-decreasing parts, joint vs. separated
//!   training, ordering comparisons and testing loss.
//! - [`ingest`]: datasets, quantization and empirical window laws.

#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod aoi;
pub mod divergence;
pub mod error;
pub mod ingest;
pub mod loss;
pub mod numeric;
pub mod process;

pub use analysis::{decompose, loss_curve, min_training_loss, DecompositionReport, LossCurve};
pub use aoi::{AgeDistribution, AgeVector};
pub use error::{Error, Result};
pub use loss::{
    bayes_action, conditional_cross_entropy, conditional_entropy, conditional_mutual_information,
    cross_entropy, entropy, mutual_information, Action, BayesResult, JointPmf, LossSpec, LossTable,
    OutcomeSpace, Pmf, Variable,
};
pub use process::{LawProvider, ProcessModel};
