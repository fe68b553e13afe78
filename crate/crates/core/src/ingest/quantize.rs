use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::OutcomeSpace;

use super::dataset::{Dataset, Record};

/// Half-open bins `[e_i, e_{i+1})` labelled `B0, B1, ...`; values below the
/// first edge or at/above the last land in the end bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Quantizer {
    edges: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Quantizer {
    type Error = Error;
    fn try_from(edges: Vec<f64>) -> Result<Self> {
        Quantizer::new(edges)
    }
}

impl From<Quantizer> for Vec<f64> {
    fn from(q: Quantizer) -> Self {
        q.edges
    }
}

impl Quantizer {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "edges".into(),
                reason: "need at least two edges".into(),
            });
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter {
                name: "edges".into(),
                reason: format!("edges must be finite and strictly increasing: {edges:?}"),
            });
        }
        Ok(Self { edges })
    }

    /// `bins` equal-width bins over `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidParameter {
                name: "bins".into(),
                reason: "must be positive".into(),
            });
        }
        let w = (hi - lo) / bins as f64;
        Self::new((0..=bins).map(|i| lo + w * i as f64).collect())
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn num_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.num_bins()).map(|i| format!("B{i}")).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn bin(&self, value: f64) -> usize {
        // number of interior edges <= value
        self.edges[1..self.edges.len() - 1].partition_point(|&e| e <= value)
    }
}

/// Column name to quantizer, e.g. `{"x_1": [0, 1, 2], "y": [0, 5, 10]}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuantizerConfig {
    pub columns: BTreeMap<String, Quantizer>,
}

impl QuantizerConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Bins the configured columns; other columns keep their symbols.
pub fn quantize(records: &[Record], config: &QuantizerConfig) -> Result<Dataset> {
    let m = records.first().map_or(0, |r| r.features.len());
    for name in config.columns.keys() {
        let known = name == "y"
            || name
                .strip_prefix("x_")
                .and_then(|i| i.parse::<usize>().ok())
                .is_some_and(|i| (1..=m).contains(&i));
        if !known {
            return Err(Error::InvalidParameter {
                name: "quantizer".into(),
                reason: format!("unknown column {name:?}"),
            });
        }
    }
    let feature_q: Vec<Option<&Quantizer>> = (1..=m)
        .map(|l| config.columns.get(&format!("x_{l}")))
        .collect();
    let target_q = config.columns.get("y");

    let apply = |q: &Quantizer, column: &str, value: &str| -> Result<String> {
        let v: f64 = value.parse().map_err(|_| Error::NonNumericColumn {
            column: column.to_string(),
            value: value.to_string(),
        })?;
        if !v.is_finite() {
            return Err(Error::NonNumericColumn {
                column: column.to_string(),
                value: value.to_string(),
            });
        }
        Ok(format!("B{}", q.bin(v)))
    };
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let mut r = r.clone();
        for (l, q) in feature_q.iter().enumerate() {
            if let Some(q) = q {
                r.features[l] = apply(q, &format!("x_{}", l + 1), &r.features[l])?;
            }
        }
        if let Some(q) = target_q {
            r.target = apply(q, "y", &r.target)?;
        }
        out.push(r);
    }

    // Quantized columns declare every bin; the rest are inferred.
    let inferred = Dataset::new(out.clone(), None, None)?;
    let feature_spaces = feature_q
        .iter()
        .enumerate()
        .map(|(l, q)| match q {
            Some(q) => OutcomeSpace::categorical(q.labels()),
            None => Ok(inferred.feature_space(l).clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    let target_space = match target_q {
        Some(q) => OutcomeSpace::with_levels(q.labels(), q.midpoints())?,
        None => inferred.target_space().clone(),
    };
    let mut d = Dataset::new(out, Some(feature_spaces), Some(target_space))?;
    for (name, q) in &config.columns {
        d = d.with_metadata(
            format!("quantizer.{name}"),
            serde_json::to_string(q.edges())?,
        );
    }
    Ok(d)
}
