use serde::{Deserialize, Serialize};

use super::space::{check_probabilities, OutcomeSpace, Pmf};
use crate::error::{Error, Result};
use crate::numeric::stable_sum;

/// A named random variable with its outcome space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub space: OutcomeSpace,
}

impl Variable {
    pub fn new(name: impl Into<String>, space: OutcomeSpace) -> Self {
        Self {
            name: name.into(),
            space,
        }
    }
}

/// Joint probability mass function over an ordered list of named variables.
///
/// Probabilities are stored densely in row-major order: the last variable
/// varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointRepr", into = "JointRepr")]
pub struct JointPmf {
    variables: Vec<Variable>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct JointRepr {
    variables: Vec<Variable>,
    probs: Vec<f64>,
}

impl TryFrom<JointRepr> for JointPmf {
    type Error = Error;
    fn try_from(r: JointRepr) -> Result<Self> {
        JointPmf::new(r.variables, r.probs)
    }
}

impl From<JointPmf> for JointRepr {
    fn from(j: JointPmf) -> Self {
        JointRepr {
            variables: j.variables,
            probs: j.probs,
        }
    }
}

impl JointPmf {
    pub fn new(variables: Vec<Variable>, probs: Vec<f64>) -> Result<Self> {
        check_variables(&variables)?;
        let n: usize = variables.iter().map(|v| v.space.len()).product();
        if probs.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} probabilities for {} cells",
                probs.len(),
                n
            )));
        }
        check_probabilities(&probs)?;
        Ok(Self { variables, probs })
    }

    /// Builds a joint from unnormalized nonnegative weights.
    pub fn from_weights(variables: Vec<Variable>, weights: Vec<f64>) -> Result<Self> {
        let total = stable_sum(weights.iter().copied());
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NotNormalized(total));
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Self::new(variables, probs)
    }

    pub(crate) fn from_parts_unchecked(variables: Vec<Variable>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(
            variables.iter().map(|v| v.space.len()).product::<usize>(),
            probs.len()
        );
        Self { variables, probs }
    }

    pub fn from_pmf(name: impl Into<String>, pmf: &Pmf) -> Self {
        Self {
            variables: vec![Variable::new(name, pmf.space().clone())],
            probs: pmf.probs().to_vec(),
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_cells(&self) -> usize {
        self.probs.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.space.len()).collect()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.shape())
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Resolves a list of names, rejecting unknown and repeated names.
    pub fn indices<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            let i = self.index_of(n.as_ref())?;
            if out.contains(&i) {
                return Err(Error::DuplicateVariable(n.as_ref().to_string()));
            }
            out.push(i);
        }
        Ok(out)
    }

    /// Multi-index of a flat cell.
    pub fn cell_index(&self, flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        let mut rem = flat;
        for k in (0..shape.len()).rev() {
            idx[k] = rem % shape[k];
            rem /= shape[k];
        }
        idx
    }

    /// Human-readable `name=label` rendering of a flat cell.
    pub fn cell_label(&self, flat: usize) -> String {
        let idx = self.cell_index(flat);
        describe_cell(&self.variables, &idx)
    }

    /// Marginal over the named variables, in the order given.
    pub fn marginal<S: AsRef<str>>(&self, names: &[S]) -> Result<JointPmf> {
        let idx = self.indices(names)?;
        Ok(self.marginal_by_index(&idx))
    }

    /// Marginal over variables selected by position; the output keeps the
    /// order of `idx`, so this also permutes variables.
    pub(crate) fn marginal_by_index(&self, idx: &[usize]) -> JointPmf {
        let shape = self.shape();
        let out_shape: Vec<usize> = idx.iter().map(|&i| shape[i]).collect();
        let out_strides = strides(&out_shape);
        let mut contrib = vec![0usize; shape.len()];
        for (pos, &i) in idx.iter().enumerate() {
            contrib[i] = out_strides[pos];
        }
        let out_len: usize = out_shape.iter().product();
        let mut out = vec![0.0; out_len];
        for_each_cell(&shape, &contrib, |flat, off| out[off] += self.probs[flat]);
        JointPmf {
            variables: idx.iter().map(|&i| self.variables[i].clone()).collect(),
            probs: out,
        }
    }

    /// Law of the remaining variables given `assignments` (name, label).
    pub fn condition(&self, assignments: &[(&str, &str)]) -> Result<JointPmf> {
        let shape = self.shape();
        let st = strides(&shape);
        let mut fixed: Vec<Option<usize>> = vec![None; shape.len()];
        for (name, label) in assignments {
            let i = self.index_of(name)?;
            if fixed[i].is_some() {
                return Err(Error::DuplicateVariable(name.to_string()));
            }
            let pos = self.variables[i].space.position(label).ok_or_else(|| {
                Error::ShapeMismatch(format!("label {label:?} not in space of {name}"))
            })?;
            fixed[i] = Some(pos);
        }
        let free: Vec<usize> = (0..shape.len()).filter(|&i| fixed[i].is_none()).collect();
        let free_shape: Vec<usize> = free.iter().map(|&i| shape[i]).collect();
        let base: usize = fixed
            .iter()
            .zip(&st)
            .map(|(f, s)| f.map_or(0, |p| p * s))
            .sum();
        let n: usize = free_shape.iter().product();
        let mut out = Vec::with_capacity(n);
        let mut counter = vec![0usize; free.len()];
        for _ in 0..n {
            let off: usize = base
                + counter
                    .iter()
                    .zip(&free)
                    .map(|(c, &i)| c * st[i])
                    .sum::<usize>();
            out.push(self.probs[off]);
            increment(&mut counter, &free_shape);
        }
        let mass = stable_sum(out.iter().copied());
        if mass <= 0.0 {
            let desc = assignments
                .iter()
                .map(|(n, l)| format!("{n}={l}"))
                .collect::<Vec<_>>()
                .join(", ");
            return Err(Error::ZeroProbabilityCell(desc));
        }
        for p in &mut out {
            *p /= mass;
        }
        Ok(JointPmf {
            variables: free.iter().map(|&i| self.variables[i].clone()).collect(),
            probs: out,
        })
    }

    /// Single-variable joint as a [`Pmf`].
    pub fn to_pmf(&self) -> Result<Pmf> {
        if self.variables.len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "expected one variable, found {}",
                self.variables.len()
            )));
        }
        Ok(Pmf::from_parts_unchecked(
            self.variables[0].space.clone(),
            self.probs.clone(),
        ))
    }

    /// `(1 - weight) * self + weight * other` on an identical cell grid.
    pub fn mix(&self, other: &JointPmf, weight: f64) -> Result<JointPmf> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter {
                name: "weight".into(),
                reason: format!("{weight} outside [0, 1]"),
            });
        }
        self.require_same_grid(other)?;
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (1.0 - weight) * a + weight * b)
            .collect();
        Ok(JointPmf {
            variables: self.variables.clone(),
            probs,
        })
    }

    /// Independent product: variables of `self` followed by those of `other`.
    pub fn product(&self, other: &JointPmf) -> Result<JointPmf> {
        let mut variables = self.variables.clone();
        variables.extend(other.variables.iter().cloned());
        check_variables(&variables)?;
        let mut probs = Vec::with_capacity(self.probs.len() * other.probs.len());
        for a in &self.probs {
            for b in &other.probs {
                probs.push(a * b);
            }
        }
        Ok(JointPmf { variables, probs })
    }

    /// Same law with variables renamed positionally.
    pub fn renamed<S: Into<String>>(&self, names: Vec<S>) -> Result<JointPmf> {
        if names.len() != self.variables.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} names for {} variables",
                names.len(),
                self.variables.len()
            )));
        }
        let variables: Vec<Variable> = names
            .into_iter()
            .zip(&self.variables)
            .map(|(n, v)| Variable::new(n, v.space.clone()))
            .collect();
        check_variables(&variables)?;
        Ok(JointPmf {
            variables,
            probs: self.probs.clone(),
        })
    }

    pub fn same_grid(&self, other: &JointPmf) -> bool {
        self.variables.len() == other.variables.len()
            && self
                .variables
                .iter()
                .zip(&other.variables)
                .all(|(a, b)| a.name == b.name && a.space.labels() == b.space.labels())
    }

    pub(crate) fn require_same_grid(&self, other: &JointPmf) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "variables [{}] vs [{}] or their label sets differ",
                self.names().join(", "),
                other.names().join(", ")
            )))
        }
    }
}

fn check_variables(variables: &[Variable]) -> Result<()> {
    if variables.is_empty() {
        return Err(Error::ShapeMismatch(
            "joint law needs at least one variable".into(),
        ));
    }
    let mut seen = std::collections::HashSet::new();
    for v in variables {
        if !seen.insert(v.name.as_str()) {
            return Err(Error::DuplicateVariable(v.name.clone()));
        }
    }
    Ok(())
}

pub(crate) fn describe_cell(variables: &[Variable], idx: &[usize]) -> String {
    variables
        .iter()
        .zip(idx)
        .map(|(v, &i)| format!("{}={}", v.name, v.space.label(i)))
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut st = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        st[k] = st[k + 1] * shape[k + 1];
    }
    st
}

/// Odometer increment, last position fastest.
pub(crate) fn increment(counter: &mut [usize], shape: &[usize]) {
    for k in (0..counter.len()).rev() {
        counter[k] += 1;
        if counter[k] < shape[k] {
            return;
        }
        counter[k] = 0;
    }
}

/// Visits every cell of `shape` in row-major order, passing the flat index
/// and the running offset `sum_k idx[k] * contrib[k]`.
pub(crate) fn for_each_cell(shape: &[usize], contrib: &[usize], mut f: impl FnMut(usize, usize)) {
    let n: usize = shape.iter().product();
    if n == 0 {
        return;
    }
    let mut counter = vec![0usize; shape.len()];
    let mut off = 0usize;
    for flat in 0..n {
        f(flat, off);
        for k in (0..shape.len()).rev() {
            counter[k] += 1;
            off += contrib[k];
            if counter[k] < shape[k] {
                break;
            }
            off -= contrib[k] * shape[k];
            counter[k] = 0;
        }
    }
}
