use crate::aoi::{AgeDistribution, AgeVector};
use crate::error::{Error, Result};
use crate::loss::{
    conditional_cross_entropy_idx, conditional_entropy_idx, JointPmf, LossSpec, OutcomeSpace,
    Variable,
};
use crate::process::{age_requests, LawProvider, WindowLaw};

pub(crate) fn check_dims(provider: &dyn LawProvider, delta: &AgeVector) -> Result<()> {
    if delta.dims() != provider.num_sources() {
        return Err(Error::DimensionMismatch {
            expected: provider.num_sources(),
            found: delta.dims(),
        });
    }
    Ok(())
}

/// Law of `Y@0, X1@delta_1, ..., Xm@delta_m`.
pub fn age_law(provider: &dyn LawProvider, delta: &AgeVector) -> Result<WindowLaw> {
    check_dims(provider, delta)?;
    provider.window_law(&age_requests(delta))
}

/// Smallest expected loss of any predictor of `Y_t` from the features
/// observed at ages `delta`: `H_L(Y_t | X_{1,t-delta_1}, ..., X_{m,t-delta_m})`.
pub fn min_training_loss(
    provider: &dyn LawProvider,
    delta: &AgeVector,
    loss: &LossSpec,
) -> Result<f64> {
    let w = age_law(provider, delta)?;
    loss.check_space(&w.law.variables()[0].space)?;
    let given: Vec<usize> = (1..=delta.dims()).collect();
    Ok(conditional_entropy_idx(&w.law, 0, &given, loss))
}

/// Joint law of `(Y, X1, ..., Xm, A)` where `A` is the age vector drawn
/// from `ages` and the features are observed at those ages.
pub fn age_augmented_law(provider: &dyn LawProvider, ages: &AgeDistribution) -> Result<JointPmf> {
    if ages.dims() != provider.num_sources() {
        return Err(Error::DimensionMismatch {
            expected: provider.num_sources(),
            found: ages.dims(),
        });
    }
    let m = ages.dims();
    let names: Vec<String> = std::iter::once("Y".to_string())
        .chain((1..=m).map(|l| format!("X{l}")))
        .collect();
    let mut laws = Vec::with_capacity(ages.support().len());
    for delta in ages.support() {
        laws.push(age_law(provider, delta)?.law.renamed(names.clone())?);
    }
    let first = &laws[0];
    for l in &laws[1..] {
        if !first.same_grid(l) {
            return Err(Error::IncompatibleProviders(
                "age laws are on different grids".into(),
            ));
        }
    }
    let age_space = OutcomeSpace::categorical(ages.support().iter().map(|a| a.to_string()))?;
    let mut variables = first.variables().to_vec();
    variables.push(Variable::new("A", age_space));
    let k = ages.support().len();
    let mut probs = vec![0.0; first.num_cells() * k];
    for (a, (law, &w)) in laws.iter().zip(ages.probs()).enumerate() {
        for (cell, &p) in law.probs().iter().enumerate() {
            probs[cell * k + a] = w * p;
        }
    }
    Ok(JointPmf::from_parts_unchecked(variables, probs))
}

/// Training loss when ages vary with law `ages`.
///
/// With the age as an extra feature this is `H_L(Y | X, A)`, otherwise
/// `H_L(Y | X)` under the age-mixed law of the features.
pub fn joint_training_loss(
    provider: &dyn LawProvider,
    ages: &AgeDistribution,
    loss: &LossSpec,
    with_age: bool,
) -> Result<f64> {
    let joint = age_augmented_law(provider, ages)?;
    loss.check_space(&joint.variables()[0].space)?;
    let m = ages.dims();
    let mut given: Vec<usize> = (1..=m).collect();
    if with_age {
        given.push(m + 1);
    }
    Ok(conditional_entropy_idx(&joint, 0, &given, loss))
}

/// Expected loss under the test laws of the predictor that is optimal for
/// the training laws, with the age as a feature and ages drawn from
/// `test_ages` in both roles.
pub fn testing_loss(
    train: &dyn LawProvider,
    test: &dyn LawProvider,
    test_ages: &AgeDistribution,
    loss: &LossSpec,
) -> Result<f64> {
    let tr = age_augmented_law(train, test_ages)?;
    let te = age_augmented_law(test, test_ages)?;
    te.require_same_grid(&tr)?;
    loss.check_space(&te.variables()[0].space)?;
    let given: Vec<usize> = (1..=test_ages.dims() + 1).collect();
    conditional_cross_entropy_idx(&te, &tr, 0, &given, loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{make_hidden_nonmarkov, ModelSizes};

    #[test]
    fn with_age_is_weighted_average() {
        let m = make_hidden_nonmarkov(11, &ModelSizes::default(), 0.15).unwrap();
        let a = AgeVector::new(vec![1, 1]);
        let b = AgeVector::new(vec![2, 2]);
        let ages = AgeDistribution::uniform(vec![a.clone(), b.clone()]).unwrap();
        for loss in [LossSpec::Logarithmic, LossSpec::Quadratic] {
            let joint = joint_training_loss(&m, &ages, &loss, true).unwrap();
            let avg = 0.5 * min_training_loss(&m, &a, &loss).unwrap()
                + 0.5 * min_training_loss(&m, &b, &loss).unwrap();
            assert!((joint - avg).abs() < 1e-12);
            let pooled = joint_training_loss(&m, &ages, &loss, false).unwrap();
            assert!(pooled >= joint - 1e-12);
        }
    }

    #[test]
    fn testing_on_training_law_is_training_loss() {
        let m = make_hidden_nonmarkov(3, &ModelSizes::default(), 0.2).unwrap();
        let ages =
            AgeDistribution::uniform(vec![AgeVector::new(vec![0, 1]), AgeVector::new(vec![2, 0])])
                .unwrap();
        let loss = LossSpec::Logarithmic;
        let t = testing_loss(&m, &m, &ages, &loss).unwrap();
        let j = joint_training_loss(&m, &ages, &loss, true).unwrap();
        assert!((t - j).abs() < 1e-12);
    }

    #[test]
    fn wrong_dimension() {
        let m = make_hidden_nonmarkov(3, &ModelSizes::default(), 0.2).unwrap();
        let err =
            min_training_loss(&m, &AgeVector::new(vec![1]), &LossSpec::Logarithmic).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                found: 1
            }
        ));
    }
}
