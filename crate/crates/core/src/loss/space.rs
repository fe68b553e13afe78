use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::stable_sum;

/// Tolerance on the total mass of a probability vector.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Ordered finite set of outcome labels, optionally carrying numeric levels.
///
/// Label order is significant: it fixes the row-major layout of joint laws
/// and breaks ties between equally good Bayes actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct OutcomeSpace {
    labels: Vec<String>,
    levels: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<f64>>,
}

impl TryFrom<SpaceRepr> for OutcomeSpace {
    type Error = Error;
    fn try_from(r: SpaceRepr) -> Result<Self> {
        match r.levels {
            Some(levels) => OutcomeSpace::with_levels(r.labels, levels),
            None => OutcomeSpace::categorical(r.labels),
        }
    }
}

impl From<OutcomeSpace> for SpaceRepr {
    fn from(s: OutcomeSpace) -> Self {
        SpaceRepr {
            labels: s.labels,
            levels: s.levels,
        }
    }
}

impl OutcomeSpace {
    pub fn categorical<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        check_labels(&labels)?;
        Ok(Self {
            labels,
            levels: None,
        })
    }

    /// Numeric space whose labels are the shortest decimal rendering of each level.
    pub fn numeric(levels: Vec<f64>) -> Result<Self> {
        let labels = levels.iter().map(|v| format!("{v}")).collect();
        Self::with_levels(labels, levels)
    }

    pub fn with_levels(labels: Vec<String>, levels: Vec<f64>) -> Result<Self> {
        check_labels(&labels)?;
        if labels.len() != levels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels but {} numeric levels",
                labels.len(),
                levels.len()
            )));
        }
        if let Some(v) = levels.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "levels".into(),
                reason: format!("non-finite level {v}"),
            });
        }
        Ok(Self {
            labels,
            levels: Some(levels),
        })
    }

    /// Numeric space `{0, 1, ..., n-1}`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::numeric((0..n).map(|i| i as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn levels(&self) -> Option<&[f64]> {
        self.levels.as_deref()
    }

    pub fn is_numeric(&self) -> bool {
        self.levels.is_some()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn check_labels(labels: &[String]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::EmptySpace);
    }
    let mut seen = std::collections::HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

pub(crate) fn check_probabilities(probs: &[f64]) -> Result<()> {
    for (index, &value) in probs.iter().enumerate() {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidProbability { index, value });
        }
    }
    let total = stable_sum(probs.iter().copied());
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized(total));
    }
    Ok(())
}

/// Probability mass function over a single [`OutcomeSpace`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfRepr", into = "PmfRepr")]
pub struct Pmf {
    space: OutcomeSpace,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PmfRepr {
    space: OutcomeSpace,
    probs: Vec<f64>,
}

impl TryFrom<PmfRepr> for Pmf {
    type Error = Error;
    fn try_from(r: PmfRepr) -> Result<Self> {
        Pmf::new(r.space, r.probs)
    }
}

impl From<Pmf> for PmfRepr {
    fn from(p: Pmf) -> Self {
        PmfRepr {
            space: p.space,
            probs: p.probs,
        }
    }
}

impl Pmf {
    pub fn new(space: OutcomeSpace, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} probabilities for a space of {} labels",
                probs.len(),
                space.len()
            )));
        }
        check_probabilities(&probs)?;
        Ok(Self { space, probs })
    }

    pub fn uniform(space: OutcomeSpace) -> Self {
        let n = space.len();
        Self {
            space,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(space: OutcomeSpace, index: usize) -> Result<Self> {
        if index >= space.len() {
            return Err(Error::ShapeMismatch(format!(
                "index {index} outside a space of {} labels",
                space.len()
            )));
        }
        let mut probs = vec![0.0; space.len()];
        probs[index] = 1.0;
        Ok(Self { space, probs })
    }

    pub(crate) fn from_parts_unchecked(space: OutcomeSpace, probs: Vec<f64>) -> Self {
        debug_assert_eq!(space.len(), probs.len());
        Self { space, probs }
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, label: &str) -> Option<f64> {
        self.space.position(label).map(|i| self.probs[i])
    }

    /// Mean of a numeric pmf.
    pub fn mean(&self) -> Option<f64> {
        let levels = self.space.levels()?;
        Some(stable_sum(
            self.probs.iter().zip(levels).map(|(p, y)| p * y),
        ))
    }
}
