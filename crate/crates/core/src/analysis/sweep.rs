//! Mixture sweeps that drive epsilon or beta toward zero.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aoi::AgeDistribution;
use crate::divergence::epsilon_coefficient_with_grid;
use crate::error::Result;
use crate::loss::LossSpec;
use crate::process::{LawProvider, MixtureProvider};

use super::compare::{compare_experiments, ComparisonReport, EpsilonHorizon};
use super::training::{joint_training_loss, testing_loss};

/// `2^-1, 2^-2, ..., 2^-k`.
pub fn eta_grid(k: usize) -> Vec<f64> {
    (1..=k as i32).map(|i| 2f64.powi(-i)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSweepPoint {
    pub eta: f64,
    pub epsilon: f64,
    /// Largest `I_L(Y; Z | X)` over the lag grid.
    pub max_information: f64,
}

/// Epsilon and the largest loss-based conditional information of
/// `(1 - eta) * markov + eta * model` for each `eta`.
pub fn epsilon_sweep(
    model: Arc<dyn LawProvider>,
    markov: Arc<dyn LawProvider>,
    etas: &[f64],
    horizon: EpsilonHorizon,
    loss: &LossSpec,
) -> Result<Vec<EpsilonSweepPoint>> {
    etas.par_iter()
        .map(|&eta| {
            let mix = MixtureProvider::new(markov.clone(), model.clone(), eta)?;
            let r =
                epsilon_coefficient_with_grid(&mix, horizon.tau_max, horizon.mu_max, Some(loss))?;
            Ok(EpsilonSweepPoint {
                eta,
                epsilon: r.epsilon,
                max_information: r.max_information().unwrap_or(0.0),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaSweepPoint {
    pub eta: f64,
    pub beta: f64,
    /// Joint training loss of the training law.
    pub training: f64,
    pub testing: f64,
    /// `testing - training`.
    pub gap: f64,
}

/// Testing against training loss with test laws `(1 - eta) * train + eta * other`.
pub fn beta_sweep(
    train: Arc<dyn LawProvider>,
    other: Arc<dyn LawProvider>,
    ages: &AgeDistribution,
    etas: &[f64],
    loss: &LossSpec,
) -> Result<Vec<BetaSweepPoint>> {
    etas.par_iter()
        .map(|&eta| {
            let test = MixtureProvider::new(train.clone(), other.clone(), eta)?;
            let tr = super::training::age_augmented_law(train.as_ref(), ages)?;
            let te = super::training::age_augmented_law(&test, ages)?;
            let beta = crate::divergence::beta_between(&tr, &te)?.beta;
            let testing = testing_loss(train.as_ref(), &test, ages, loss)?;
            let training = joint_training_loss(train.as_ref(), ages, loss, true)?;
            Ok(BetaSweepPoint {
                eta,
                beta,
                training,
                testing,
                gap: testing - training,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSweepPoint {
    pub eta: f64,
    pub report: ComparisonReport,
}

/// [`compare_experiments`] along the mixture family, epsilon always measured.
pub fn comparison_sweep(
    model: Arc<dyn LawProvider>,
    markov: Arc<dyn LawProvider>,
    age_c: &AgeDistribution,
    age_d: &AgeDistribution,
    etas: &[f64],
    horizon: EpsilonHorizon,
    loss: &LossSpec,
) -> Result<Vec<ComparisonSweepPoint>> {
    etas.par_iter()
        .map(|&eta| {
            let mix = MixtureProvider::new(markov.clone(), model.clone(), eta)?;
            let report = compare_experiments(&mix, age_c, age_d, loss, Some(horizon))?;
            Ok(ComparisonSweepPoint { eta, report })
        })
        .collect()
}

/// Writes flat serializable rows as CSV with a header.
pub fn write_rows_csv<T: Serialize, W: std::io::Write>(rows: &[T], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
