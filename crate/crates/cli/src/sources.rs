use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use aof_core::ingest::{
    quantize, read_records, stationarity_diagnostic, Dataset, EmpiricalProvider, QuantizerConfig,
};
use aof_core::{AgeDistribution, AgeVector, LawProvider, ProcessModel};

use crate::config::Globals;

/// A law provider built from a file: `.json` is a serialized model,
/// anything else a dataset CSV.
pub enum Source {
    Model(Box<ProcessModel>),
    Data(Arc<Dataset>),
}

impl Source {
    pub fn load(path: &Path, quantizer: Option<&Path>) -> Result<Self> {
        let is_model = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_model {
            if quantizer.is_some() {
                bail!(
                    "quantize applies to datasets, not to model {}",
                    path.display()
                );
            }
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading model {}", path.display()))?;
            let model: ProcessModel = serde_json::from_str(&text)
                .with_context(|| format!("parsing model {}", path.display()))?;
            return Ok(Source::Model(Box::new(model)));
        }
        let data = match quantizer {
            None => Dataset::read_csv(path)
                .with_context(|| format!("reading dataset {}", path.display()))?,
            Some(q) => {
                let cfg = QuantizerConfig::from_json(
                    &std::fs::read_to_string(q)
                        .with_context(|| format!("reading {}", q.display()))?,
                )
                .with_context(|| format!("parsing quantizer {}", q.display()))?;
                let file = std::fs::File::open(path)
                    .with_context(|| format!("reading dataset {}", path.display()))?;
                let records = read_records(file, b',')?;
                quantize(&records, &cfg)?
            }
        };
        let report = stationarity_diagnostic(&data)?;
        if report.warned {
            log::warn!(
                "{}: first and second halves differ (distance {:.4}); laws may not be stationary",
                path.display(),
                report.max
            );
        }
        Ok(Source::Data(Arc::new(data)))
    }

    pub fn model(&self) -> Option<&ProcessModel> {
        match self {
            Source::Model(m) => Some(m),
            Source::Data(_) => None,
        }
    }

    pub fn provider(&self, g: &Globals) -> Arc<dyn LawProvider> {
        match self {
            Source::Model(m) => {
                let m = ProcessModel::clone(m);
                Arc::new(match g.lag_cap {
                    Some(cap) => m.with_lag_cap(cap),
                    None => m,
                })
            }
            Source::Data(d) => {
                let mut p = EmpiricalProvider::new(d.clone());
                if let Some(cap) = g.lag_cap {
                    p = p.with_lag_cap(cap);
                }
                if let Some(l) = g.lambda.filter(|&l| l > 0.0) {
                    p = p.with_smoothing(l);
                }
                Arc::new(p)
            }
        }
    }
}

/// Reads an age law from CSV with columns `age_1..age_m,prob`.
pub fn read_age_distribution(path: &Path) -> Result<AgeDistribution> {
    let file = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    parse_age_distribution(file).with_context(|| format!("parsing age law {}", path.display()))
}

fn parse_age_distribution<R: std::io::Read>(reader: R) -> Result<AgeDistribution> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let m = headers.len().saturating_sub(1);
    if m == 0 || &headers[m] != "prob" {
        bail!("expected columns age_1..age_m,prob");
    }
    let (mut support, mut probs) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ages = (0..m)
            .map(|l| rec[l].parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("row {}: ages must be nonnegative integers", i + 1))?;
        let p: f64 = rec[m]
            .parse()
            .with_context(|| format!("row {}: bad probability", i + 1))?;
        support.push(AgeVector::new(ages));
        probs.push(p);
    }
    Ok(AgeDistribution::new(support, probs)?)
}
