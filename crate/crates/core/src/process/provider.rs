use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aoi::AgeVector;
use crate::error::{Error, Result};
use crate::loss::JointPmf;

/// Which observed series a lagged variable reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Target,
    /// Feature source, zero-based.
    Feature(usize),
}

/// A series observed `lag` slots before the reference time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LagVar {
    pub series: Series,
    pub lag: usize,
}

impl LagVar {
    pub fn target(lag: usize) -> Self {
        Self {
            series: Series::Target,
            lag,
        }
    }

    pub fn feature(source: usize, lag: usize) -> Self {
        Self {
            series: Series::Feature(source),
            lag,
        }
    }

    /// Variable name used in window laws: `Y@0`, `X1@3` (sources one-based).
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for LagVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.series {
            Series::Target => write!(f, "Y@{}", self.lag),
            Series::Feature(l) => write!(f, "X{}@{}", l + 1, self.lag),
        }
    }
}

/// Joint law of a list of lagged variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowLaw {
    pub requests: Vec<LagVar>,
    pub law: JointPmf,
    /// Number of windows behind an empirical law; `None` for exact laws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

/// Source of stationary window laws over a fixed set of feature sources.
pub trait LawProvider: Send + Sync {
    fn num_sources(&self) -> usize;

    /// Largest lag any request may use.
    fn lag_cap(&self) -> usize;

    fn window_law(&self, requests: &[LagVar]) -> Result<WindowLaw>;

    fn describe(&self) -> String;
}

impl<P: LawProvider + ?Sized> LawProvider for Arc<P> {
    fn num_sources(&self) -> usize {
        (**self).num_sources()
    }
    fn lag_cap(&self) -> usize {
        (**self).lag_cap()
    }
    fn window_law(&self, requests: &[LagVar]) -> Result<WindowLaw> {
        (**self).window_law(requests)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<P: LawProvider + ?Sized> LawProvider for &P {
    fn num_sources(&self) -> usize {
        (**self).num_sources()
    }
    fn lag_cap(&self) -> usize {
        (**self).lag_cap()
    }
    fn window_law(&self, requests: &[LagVar]) -> Result<WindowLaw> {
        (**self).window_law(requests)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Requests `Y@0, X1@delta_1, ..., Xm@delta_m`.
pub fn age_requests(delta: &AgeVector) -> Vec<LagVar> {
    let mut r = vec![LagVar::target(0)];
    r.extend(
        delta
            .components()
            .iter()
            .enumerate()
            .map(|(l, &d)| LagVar::feature(l, d)),
    );
    r
}

pub(crate) fn check_requests(requests: &[LagVar], sources: usize, cap: usize) -> Result<()> {
    if requests.is_empty() {
        return Err(Error::InvalidParameter {
            name: "requests".into(),
            reason: "empty request list".into(),
        });
    }
    for (i, r) in requests.iter().enumerate() {
        if let Series::Feature(l) = r.series {
            if l >= sources {
                return Err(Error::UnknownVariable(r.name()));
            }
        }
        if r.lag > cap {
            return Err(Error::LagCapExceeded { lag: r.lag, cap });
        }
        if requests[..i].contains(r) {
            return Err(Error::DuplicateVariable(r.name()));
        }
    }
    Ok(())
}

/// Window laws `(1 - weight) * base + weight * other`.
///
/// A mixture of two stationary processes is itself stationary (draw which
/// process to run once, up front), so the mixed laws are mutually consistent.
pub struct MixtureProvider {
    base: Arc<dyn LawProvider>,
    other: Arc<dyn LawProvider>,
    weight: f64,
}

impl MixtureProvider {
    pub fn new(
        base: Arc<dyn LawProvider>,
        other: Arc<dyn LawProvider>,
        weight: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) || weight.is_nan() {
            return Err(Error::InvalidParameter {
                name: "eta".into(),
                reason: format!("{weight} outside [0, 1]"),
            });
        }
        if base.num_sources() != other.num_sources() {
            return Err(Error::IncompatibleProviders(format!(
                "{} vs {} feature sources",
                base.num_sources(),
                other.num_sources()
            )));
        }
        Ok(Self {
            base,
            other,
            weight,
        })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl LawProvider for MixtureProvider {
    fn num_sources(&self) -> usize {
        self.base.num_sources()
    }

    fn lag_cap(&self) -> usize {
        self.base.lag_cap().min(self.other.lag_cap())
    }

    fn window_law(&self, requests: &[LagVar]) -> Result<WindowLaw> {
        let a = self.base.window_law(requests)?;
        let b = self.other.window_law(requests)?;
        if !a.law.same_grid(&b.law) {
            return Err(Error::IncompatibleProviders(
                "mixture components produce different cell grids".into(),
            ));
        }
        let law = a.law.mix(&b.law, self.weight)?;
        Ok(WindowLaw {
            requests: requests.to_vec(),
            law,
            samples: None,
        })
    }

    fn describe(&self) -> String {
        format!(
            "mixture[(1-{w})*{} + {w}*{}]",
            self.base.describe(),
            self.other.describe(),
            w = self.weight
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names() {
        assert_eq!(LagVar::target(0).name(), "Y@0");
        assert_eq!(LagVar::feature(1, 3).name(), "X2@3");
    }

    #[test]
    fn request_checks() {
        let r = [LagVar::target(0), LagVar::target(0)];
        assert!(matches!(
            check_requests(&r, 1, 4),
            Err(Error::DuplicateVariable(_))
        ));
        let r = [LagVar::feature(0, 9)];
        assert!(matches!(
            check_requests(&r, 1, 4),
            Err(Error::LagCapExceeded { .. })
        ));
        let r = [LagVar::feature(2, 0)];
        assert!(matches!(
            check_requests(&r, 2, 4),
            Err(Error::UnknownVariable(_))
        ));
    }
}
