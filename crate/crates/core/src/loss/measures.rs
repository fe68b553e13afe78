use super::joint::{describe_cell, JointPmf};
use super::space::Pmf;
use super::spec::{BayesResult, LossSpec};
use crate::error::{Error, Result};
use crate::numeric::stable_sum;

/// Bayes action of `p` under `loss` and its expected loss `H_L(p)`.
///
/// Ties are broken by the first label (or action) in the fixed ordering.
pub fn bayes_action(p: &Pmf, loss: &LossSpec) -> Result<BayesResult> {
    loss.check_space(p.space())?;
    Ok(loss.bayes(p.probs(), p.space()))
}

/// Generalized entropy `H_L(Y)`.
pub fn entropy(p: &Pmf, loss: &LossSpec) -> Result<f64> {
    Ok(bayes_action(p, loss)?.value)
}

/// Rows of `P(given..., target)`; each row holds the target column for one
/// conditioning cell.
pub(crate) struct ConditionalRows {
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ConditionalRows {
    pub fn new(joint: &JointPmf, target: usize, given: &[usize]) -> Self {
        let mut order = given.to_vec();
        order.push(target);
        let m = joint.marginal_by_index(&order);
        Self {
            cols: joint.variables()[target].space.len(),
            data: m.probs().to_vec(),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols)
    }
}

struct Resolved {
    target: usize,
    given: Vec<usize>,
}

fn resolve<S: AsRef<str>>(
    joint: &JointPmf,
    target: &str,
    given: &[S],
    loss: &LossSpec,
) -> Result<Resolved> {
    let t = joint.index_of(target)?;
    let g = joint.indices(given)?;
    if g.contains(&t) {
        return Err(Error::TargetInGiven(target.to_string()));
    }
    loss.check_space(&joint.variables()[t].space)?;
    Ok(Resolved {
        target: t,
        given: g,
    })
}

pub(crate) fn conditional_entropy_idx(
    joint: &JointPmf,
    target: usize,
    given: &[usize],
    loss: &LossSpec,
) -> f64 {
    let rows = ConditionalRows::new(joint, target, given);
    let space = &joint.variables()[target].space;
    let mut buf = vec![0.0; rows.cols];
    let mut terms = Vec::new();
    for row in rows.rows() {
        let mass = stable_sum(row.iter().copied());
        if mass <= 0.0 {
            continue;
        }
        for (b, r) in buf.iter_mut().zip(row) {
            *b = r / mass;
        }
        terms.push(mass * loss.bayes_value(&buf, space));
    }
    stable_sum(terms)
}

/// Generalized conditional entropy `H_L(Y | X)`: the Bayes risk of each
/// conditioning cell weighted by the cell's probability. Zero-probability
/// cells contribute nothing; an empty `given` yields the unconditional entropy.
pub fn conditional_entropy<S: AsRef<str>>(
    joint: &JointPmf,
    target: &str,
    given: &[S],
    loss: &LossSpec,
) -> Result<f64> {
    let r = resolve(joint, target, given, loss)?;
    Ok(conditional_entropy_idx(joint, r.target, &r.given, loss))
}

/// Generalized mutual information `I_L(Y; X) = H_L(Y) - H_L(Y | X)`.
pub fn mutual_information<S: AsRef<str>>(
    joint: &JointPmf,
    target: &str,
    features: &[S],
    loss: &LossSpec,
) -> Result<f64> {
    let r = resolve(joint, target, features, loss)?;
    Ok(conditional_entropy_idx(joint, r.target, &[], loss)
        - conditional_entropy_idx(joint, r.target, &r.given, loss))
}

/// Conditional generalized mutual information
/// `I_L(Y; A | B) = H_L(Y | B) - H_L(Y | A, B)` for disjoint `A`, `B`.
pub fn conditional_mutual_information<S: AsRef<str>, T: AsRef<str>>(
    joint: &JointPmf,
    target: &str,
    added: &[S],
    given: &[T],
    loss: &LossSpec,
) -> Result<f64> {
    let a = resolve(joint, target, added, loss)?;
    let b = resolve(joint, target, given, loss)?;
    if let Some(&i) = a.given.iter().find(|i| b.given.contains(i)) {
        return Err(Error::OverlappingVariables(
            joint.variables()[i].name.clone(),
        ));
    }
    let mut both = b.given.clone();
    both.extend(&a.given);
    Ok(conditional_entropy_idx(joint, a.target, &b.given, loss)
        - conditional_entropy_idx(joint, a.target, &both, loss))
}

/// Generalized cross entropy: expected loss under `p_test` of the Bayes
/// action trained on `p_train`.
pub fn cross_entropy(p_test: &Pmf, p_train: &Pmf, loss: &LossSpec) -> Result<f64> {
    if p_test.space().labels() != p_train.space().labels() {
        return Err(Error::ShapeMismatch(
            "test and train pmfs are on different spaces".into(),
        ));
    }
    loss.check_space(p_train.space())?;
    let action = loss.bayes(p_train.probs(), p_train.space()).action;
    loss.expected_loss(p_test.probs(), &action, p_test.space())
}

/// Generalized conditional cross entropy (the testing loss): per test
/// conditioning cell, the test-law expected loss of the action trained on
/// the train conditional, weighted by the test marginal.
pub fn conditional_cross_entropy<S: AsRef<str>>(
    joint_test: &JointPmf,
    joint_train: &JointPmf,
    target: &str,
    given: &[S],
    loss: &LossSpec,
) -> Result<f64> {
    joint_test.require_same_grid(joint_train)?;
    let r = resolve(joint_test, target, given, loss)?;
    conditional_cross_entropy_idx(joint_test, joint_train, r.target, &r.given, loss)
}

pub(crate) fn conditional_cross_entropy_idx(
    joint_test: &JointPmf,
    joint_train: &JointPmf,
    target: usize,
    given: &[usize],
    loss: &LossSpec,
) -> Result<f64> {
    let test = ConditionalRows::new(joint_test, target, given);
    let train = ConditionalRows::new(joint_train, target, given);
    let space = &joint_test.variables()[target].space;
    let given_vars: Vec<_> = given
        .iter()
        .map(|&i| joint_test.variables()[i].clone())
        .collect();
    let given_shape: Vec<usize> = given_vars.iter().map(|v| v.space.len()).collect();
    let mut untrained = Vec::new();
    let mut terms = Vec::new();
    let mut counter = vec![0usize; given.len()];
    let mut tbuf = vec![0.0; test.cols];
    let mut rbuf = vec![0.0; test.cols];
    for (trow, rrow) in test.rows().zip(train.rows()) {
        let tmass = stable_sum(trow.iter().copied());
        if tmass > 0.0 {
            let rmass = stable_sum(rrow.iter().copied());
            if rmass <= 0.0 {
                untrained.push(if given.is_empty() {
                    "(unconditional)".to_string()
                } else {
                    describe_cell(&given_vars, &counter)
                });
            } else {
                for i in 0..test.cols {
                    tbuf[i] = trow[i] / tmass;
                    rbuf[i] = rrow[i] / rmass;
                }
                let action = loss.bayes(&rbuf, space).action;
                terms.push(tmass * loss.expected_loss(&tbuf, &action, space)?);
            }
        }
        super::joint::increment(&mut counter, &given_shape);
    }
    if !untrained.is_empty() {
        return Err(Error::UntrainedCells(untrained));
    }
    Ok(stable_sum(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{Action, OutcomeSpace, Variable};

    fn bin_space() -> OutcomeSpace {
        OutcomeSpace::indexed(2).unwrap()
    }

    fn pmf(p: &[f64]) -> Pmf {
        Pmf::new(OutcomeSpace::indexed(p.len()).unwrap(), p.to_vec()).unwrap()
    }

    #[test]
    fn uniform_binary_log_entropy() {
        let v = entropy(&pmf(&[0.5, 0.5]), &LossSpec::Logarithmic).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn point_mass_is_zero_for_closed_forms() {
        let p = Pmf::point_mass(OutcomeSpace::indexed(3).unwrap(), 1).unwrap();
        for loss in [
            LossSpec::Logarithmic,
            LossSpec::Quadratic,
            LossSpec::ZeroOne,
        ] {
            assert_eq!(entropy(&p, &loss).unwrap(), 0.0, "{loss:?}");
        }
    }

    #[test]
    fn bernoulli_quadratic() {
        let r = bayes_action(&pmf(&[0.5, 0.5]), &LossSpec::Quadratic).unwrap();
        assert_eq!(r.action, Action::Point(0.5));
        assert!((r.value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_one_uniform_four() {
        let v = entropy(&pmf(&[0.25; 4]), &LossSpec::ZeroOne).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
        // tie broken toward the first label
        let r = bayes_action(&pmf(&[0.25; 4]), &LossSpec::ZeroOne).unwrap();
        assert_eq!(r.action, Action::Label(0));
    }

    #[test]
    fn skewed_log_entropy() {
        let v = entropy(&pmf(&[0.25, 0.75]), &LossSpec::Logarithmic).unwrap();
        let direct = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert!((v - direct).abs() < 1e-15);
        assert!((v - 0.562335).abs() < 1e-6);
    }

    #[test]
    fn quadratic_needs_numeric_space() {
        let s = OutcomeSpace::categorical(["a", "b"]).unwrap();
        let p = Pmf::uniform(s);
        assert!(matches!(
            entropy(&p, &LossSpec::Quadratic),
            Err(Error::IncompatibleLoss { .. })
        ));
    }

    fn copy_joint() -> JointPmf {
        JointPmf::new(
            vec![
                Variable::new("X", bin_space()),
                Variable::new("Y", bin_space()),
            ],
            vec![0.3, 0.0, 0.0, 0.7],
        )
        .unwrap()
    }

    #[test]
    fn copy_has_zero_conditional_entropy() {
        let h = conditional_entropy(&copy_joint(), "Y", &["X"], &LossSpec::Logarithmic).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn target_in_given_rejected() {
        assert!(matches!(
            conditional_entropy(&copy_joint(), "Y", &["Y"], &LossSpec::Logarithmic),
            Err(Error::TargetInGiven(_))
        ));
        assert!(matches!(
            conditional_entropy(&copy_joint(), "Y", &["Z"], &LossSpec::Logarithmic),
            Err(Error::UnknownVariable(_))
        ));
    }

    #[test]
    fn empty_given_is_unconditional() {
        let j = copy_joint();
        let h = conditional_entropy(&j, "Y", &[] as &[&str], &LossSpec::ZeroOne).unwrap();
        assert!((h - 0.3).abs() < 1e-15);
    }

    #[test]
    fn copy_mutual_information_quadratic() {
        let j = JointPmf::new(
            vec![
                Variable::new("X", bin_space()),
                Variable::new("Y", bin_space()),
            ],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let i = mutual_information(&j, "Y", &["X"], &LossSpec::Quadratic).unwrap();
        assert!((i - 0.25).abs() < 1e-15);
    }

    #[test]
    fn overlapping_sets_rejected() {
        assert!(matches!(
            conditional_mutual_information(&copy_joint(), "Y", &["X"], &["X"], &LossSpec::ZeroOne),
            Err(Error::OverlappingVariables(_))
        ));
    }

    #[test]
    fn cross_entropy_examples() {
        let v = cross_entropy(
            &pmf(&[0.5, 0.5]),
            &pmf(&[0.25, 0.75]),
            &LossSpec::Logarithmic,
        )
        .unwrap();
        let direct = -0.5 * 0.25f64.ln() - 0.5 * 0.75f64.ln();
        assert!((v - direct).abs() < 1e-15);
        assert!((v - 0.836988).abs() < 1e-6);

        let p = pmf(&[0.2, 0.5, 0.3]);
        let q = pmf(&[0.6, 0.1, 0.3]);
        let cq = cross_entropy(&p, &q, &LossSpec::Quadratic).unwrap();
        let (mp, mq) = (p.mean().unwrap(), q.mean().unwrap());
        let var = entropy(&p, &LossSpec::Quadratic).unwrap();
        assert!((cq - (var + (mp - mq).powi(2))).abs() < 1e-14);
    }

    #[test]
    fn unbounded_log_cross_entropy() {
        let e = cross_entropy(&pmf(&[0.5, 0.5]), &pmf(&[1.0, 0.0]), &LossSpec::Logarithmic);
        assert_eq!(e, Err(Error::UnboundedCrossEntropy("1".into())));
    }

    #[test]
    fn untrained_cells_are_listed() {
        let train = JointPmf::new(
            vec![
                Variable::new("X", bin_space()),
                Variable::new("Y", bin_space()),
            ],
            vec![0.5, 0.5, 0.0, 0.0],
        )
        .unwrap();
        let test = JointPmf::new(
            vec![
                Variable::new("X", bin_space()),
                Variable::new("Y", bin_space()),
            ],
            vec![0.25, 0.25, 0.25, 0.25],
        )
        .unwrap();
        let e = conditional_cross_entropy(&test, &train, "Y", &["X"], &LossSpec::ZeroOne);
        assert_eq!(e, Err(Error::UntrainedCells(vec!["X=1".into()])));
    }
}
