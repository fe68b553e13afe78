//! Loss as a function of feature age: curves, decomposition, joint training,
//! ordering comparisons and testing loss.

mod compare;
mod curve;
mod decompose;
mod sweep;
mod training;

pub use compare::{
    compare_experiments, compare_testing_experiments, ComparisonReport, EpsilonHorizon,
    TestingComparisonReport,
};
pub use curve::{loss_curve, non_monotonicity_index, LossCurve};
pub use decompose::{decompose, default_path, DecompositionReport, Term, TermKind, IDENTITY_TOL};
pub use sweep::{
    beta_sweep, comparison_sweep, epsilon_sweep, eta_grid, write_rows_csv, BetaSweepPoint,
    ComparisonSweepPoint, EpsilonSweepPoint,
};
pub use training::{
    age_augmented_law, age_law, joint_training_loss, min_training_loss, testing_loss,
};
