use serde::{Deserialize, Serialize};

use crate::aoi::{stochastic_order_multivariate, AgeDistribution, OrderVerdict};
use crate::divergence::{beta_between, epsilon_coefficient};
use crate::error::Result;
use crate::loss::LossSpec;
use crate::process::LawProvider;

use super::training::{age_augmented_law, joint_training_loss, testing_loss};

/// Lag grid used when a comparison should also measure epsilon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpsilonHorizon {
    pub tau_max: usize,
    pub mu_max: usize,
}

impl Default for EpsilonHorizon {
    fn default() -> Self {
        Self {
            tau_max: crate::divergence::DEFAULT_TAU_MAX,
            mu_max: crate::divergence::DEFAULT_MU_MAX,
        }
    }
}

/// Training losses of two age laws, `c` claimed fresher than `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Verdict of `age_c <=_st age_d`; when it fails the losses are still
    /// reported but carry no guarantee.
    pub order: OrderVerdict,
    pub loss_c: f64,
    pub loss_d: f64,
    /// `loss_c - loss_d`.
    pub difference: f64,
    /// `max(0, difference)`.
    pub violation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// `violation / epsilon^2`, when epsilon is positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack_ratio: Option<f64>,
}

impl ComparisonReport {
    pub fn hypothesis_met(&self) -> bool {
        self.order.holds
    }
}

fn measure_epsilon(
    provider: &dyn LawProvider,
    horizon: Option<EpsilonHorizon>,
) -> Result<Option<f64>> {
    horizon
        .map(|h| epsilon_coefficient(provider, h.tau_max, h.mu_max).map(|r| r.epsilon))
        .transpose()
}

fn ratio(violation: f64, scale: Option<f64>) -> Option<f64> {
    scale.filter(|&s| s > 0.0).map(|s| violation / s)
}

/// Joint training (age as a feature) under two age laws.
pub fn compare_experiments(
    provider: &dyn LawProvider,
    age_c: &AgeDistribution,
    age_d: &AgeDistribution,
    loss: &LossSpec,
    horizon: Option<EpsilonHorizon>,
) -> Result<ComparisonReport> {
    let order = stochastic_order_multivariate(age_c, age_d)?;
    let (lc, ld) = rayon::join(
        || joint_training_loss(provider, age_c, loss, true),
        || joint_training_loss(provider, age_d, loss, true),
    );
    let (loss_c, loss_d) = (lc?, ld?);
    let difference = loss_c - loss_d;
    let violation = difference.max(0.0);
    let epsilon = measure_epsilon(provider, horizon)?;
    Ok(ComparisonReport {
        order,
        loss_c,
        loss_d,
        difference,
        violation,
        epsilon,
        slack_ratio: ratio(violation, epsilon.map(|e| e * e)),
    })
}

/// Testing losses of two test-time age laws with predictors trained on
/// `train` and evaluated on `test`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestingComparisonReport {
    pub order: OrderVerdict,
    pub testing_c: f64,
    pub testing_d: f64,
    /// Minimum training loss of `train` under each age law.
    pub training_c: f64,
    pub training_d: f64,
    /// `testing_c - testing_d`.
    pub difference: f64,
    pub violation: f64,
    /// `sqrt(D(test || train))` of the age-augmented joints under each age law.
    pub beta_c: f64,
    pub beta_d: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// `violation / max(epsilon^2, beta)`, when that scale is positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack_ratio: Option<f64>,
}

impl TestingComparisonReport {
    pub fn hypothesis_met(&self) -> bool {
        self.order.holds
    }

    pub fn beta(&self) -> f64 {
        self.beta_c.max(self.beta_d)
    }
}

pub fn compare_testing_experiments(
    train: &dyn LawProvider,
    test: &dyn LawProvider,
    age_c: &AgeDistribution,
    age_d: &AgeDistribution,
    loss: &LossSpec,
    horizon: Option<EpsilonHorizon>,
) -> Result<TestingComparisonReport> {
    let order = stochastic_order_multivariate(age_c, age_d)?;
    let side = |ages: &AgeDistribution| -> Result<(f64, f64, f64)> {
        let testing = testing_loss(train, test, ages, loss)?;
        let training = joint_training_loss(train, ages, loss, true)?;
        let beta = beta_between(
            &age_augmented_law(train, ages)?,
            &age_augmented_law(test, ages)?,
        )?
        .beta;
        Ok((testing, training, beta))
    };
    let (c, d) = rayon::join(|| side(age_c), || side(age_d));
    let ((testing_c, training_c, beta_c), (testing_d, training_d, beta_d)) = (c?, d?);
    let difference = testing_c - testing_d;
    let violation = difference.max(0.0);
    let epsilon = measure_epsilon(train, horizon)?;
    let scale = epsilon.map_or(beta_c.max(beta_d), |e| (e * e).max(beta_c.max(beta_d)));
    Ok(TestingComparisonReport {
        order,
        testing_c,
        testing_d,
        training_c,
        training_d,
        difference,
        violation,
        beta_c,
        beta_d,
        epsilon,
        slack_ratio: ratio(violation, Some(scale)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aoi::AgeVector;
    use crate::process::{make_hidden_nonmarkov, make_markov_observable, ModelSizes};

    fn av(v: &[usize]) -> AgeVector {
        AgeVector::new(v.to_vec())
    }

    #[test]
    fn identical_ages_give_zero_difference() {
        let m = make_hidden_nonmarkov(4, &ModelSizes::default(), 0.2).unwrap();
        let a = AgeDistribution::uniform(vec![av(&[1, 0]), av(&[2, 3])]).unwrap();
        let r = compare_experiments(&m, &a, &a, &LossSpec::Logarithmic, None).unwrap();
        assert!(r.hypothesis_met());
        assert_eq!(r.difference, 0.0);
        assert_eq!(r.slack_ratio, None);
    }

    #[test]
    fn markov_ordered_ages() {
        let m = make_markov_observable(6, &ModelSizes::default()).unwrap();
        let c = AgeDistribution::uniform(vec![av(&[0, 1]), av(&[1, 1])]).unwrap();
        let d = AgeDistribution::uniform(vec![av(&[1, 2]), av(&[2, 1])]).unwrap();
        let r = compare_experiments(
            &m,
            &c,
            &d,
            &LossSpec::Quadratic,
            Some(EpsilonHorizon {
                tau_max: 2,
                mu_max: 2,
            }),
        )
        .unwrap();
        assert!(r.hypothesis_met());
        assert!(r.loss_c <= r.loss_d + 1e-9);
        assert!(r.epsilon.unwrap() < 1e-6);
    }

    #[test]
    fn unordered_is_reported_not_raised() {
        let m = make_markov_observable(6, &ModelSizes::default()).unwrap();
        let c = AgeDistribution::point_mass(av(&[0, 3]));
        let d = AgeDistribution::point_mass(av(&[1, 1]));
        let r = compare_experiments(&m, &c, &d, &LossSpec::Logarithmic, None).unwrap();
        assert!(!r.hypothesis_met());
        assert!(r.order.witness.is_some());
    }

    #[test]
    fn same_train_and_test() {
        let m = make_hidden_nonmarkov(9, &ModelSizes::default(), 0.1).unwrap();
        let c = AgeDistribution::point_mass(av(&[1, 1]));
        let d = AgeDistribution::point_mass(av(&[2, 2]));
        let r = compare_testing_experiments(&m, &m, &c, &d, &LossSpec::Logarithmic, None).unwrap();
        assert_eq!(r.beta(), 0.0);
        assert!((r.testing_c - r.training_c).abs() < 1e-12);
        assert!((r.testing_d - r.training_d).abs() < 1e-12);
    }
}
