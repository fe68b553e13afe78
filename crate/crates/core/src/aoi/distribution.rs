use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::NORMALIZATION_TOL;
use crate::numeric::stable_sum;

/// Per-source ages (or lags) in slots.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgeVector(Vec<usize>);

impl AgeVector {
    pub fn new(components: Vec<usize>) -> Self {
        Self(components)
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0; m])
    }

    pub fn uniform(m: usize, age: usize) -> Self {
        Self(vec![age; m])
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn max_component(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &AgeVector) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Every vector with components in `0..=max`, lexicographic.
    pub fn grid(m: usize, max: usize) -> Vec<AgeVector> {
        let shape = vec![max + 1; m];
        let n: usize = shape.iter().product();
        let mut c = vec![0usize; m];
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(AgeVector(c.clone()));
            crate::loss::increment(&mut c, &shape);
        }
        out
    }
}

impl From<Vec<usize>> for AgeVector {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl fmt::Display for AgeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl std::str::FromStr for AgeVector {
    type Err = Error;

    /// Parses `1,2`, `(1,2)` or `1 2`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad age component {p:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .and_then(|v| {
                if v.is_empty() {
                    Err(Error::Parse(format!("empty age vector {s:?}")))
                } else {
                    Ok(AgeVector(v))
                }
            })
    }
}

/// Finite distribution over age vectors of a common dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistRepr", into = "DistRepr")]
pub struct AgeDistribution {
    support: Vec<AgeVector>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistRepr {
    support: Vec<AgeVector>,
    probs: Vec<f64>,
}

impl TryFrom<DistRepr> for AgeDistribution {
    type Error = Error;
    fn try_from(r: DistRepr) -> Result<Self> {
        AgeDistribution::new(r.support, r.probs)
    }
}

impl From<AgeDistribution> for DistRepr {
    fn from(d: AgeDistribution) -> Self {
        DistRepr {
            support: d.support,
            probs: d.probs,
        }
    }
}

impl AgeDistribution {
    /// Support points must be distinct and share a dimension; probabilities
    /// must be a pmf. Zero-probability points are kept.
    pub fn new(support: Vec<AgeVector>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptySpace);
        }
        if support.len() != probs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} support points, {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        let m = support[0].dims();
        for (i, v) in support.iter().enumerate() {
            if v.dims() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: v.dims(),
                });
            }
            if support[..i].contains(v) {
                return Err(Error::DuplicateLabel(v.to_string()));
            }
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidProbability { index, value });
            }
        }
        let s = stable_sum(probs.iter().copied());
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(s));
        }
        Ok(Self { support, probs })
    }

    pub fn point_mass(v: AgeVector) -> Self {
        Self {
            support: vec![v],
            probs: vec![1.0],
        }
    }

    pub fn uniform(support: Vec<AgeVector>) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![1.0 / n as f64; n.max(1)])
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (AgeVector, usize)>) -> Result<Self> {
        let (support, counts): (Vec<_>, Vec<_>) = counts.into_iter().unzip();
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptySpace);
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::new(support, probs)
    }

    pub fn support(&self) -> &[AgeVector] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dims(&self) -> usize {
        self.support[0].dims()
    }

    pub fn prob(&self, v: &AgeVector) -> f64 {
        self.support
            .iter()
            .position(|s| s == v)
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn max_component(&self) -> usize {
        self.support
            .iter()
            .map(AgeVector::max_component)
            .max()
            .unwrap_or(0)
    }

    /// Points with positive probability.
    pub fn iter_positive(&self) -> impl Iterator<Item = (&AgeVector, f64)> {
        self.support
            .iter()
            .zip(self.probs.iter().copied())
            .filter(|(_, p)| *p > 0.0)
    }
}
