//! Generalized-loss decision framework over finite distributions.
//!
//! For a loss `L(y, a)` the generalized entropy `H_L(Y)` is the smallest
//! expected loss any single action achieves, and the generalized conditional
//! entropy `H_L(Y | X)` is the same quantity when the action may depend on
//! `X`. Because every decision function is allowed, the conditional problem
//! splits into one Bayes-action problem per conditioning cell.
//!
//! Logarithmic, quadratic and zero-one losses use closed forms (Shannon
//! entropy, variance, one minus the mode). Finite tables are searched
//! exhaustively.

mod joint;
mod measures;
mod space;
mod spec;

pub use joint::{JointPmf, Variable};
pub use measures::{
    bayes_action, conditional_cross_entropy, conditional_entropy, conditional_mutual_information,
    cross_entropy, entropy, mutual_information,
};
pub use space::{OutcomeSpace, Pmf, NORMALIZATION_TOL};
pub use spec::{Action, BayesResult, LossSpec, LossTable};

pub(crate) use joint::{describe_cell, for_each_cell, increment, strides};
pub(crate) use measures::{conditional_cross_entropy_idx, conditional_entropy_idx};
