use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::aoi::{AgeDistribution, AgeVector};
use crate::error::{Error, Result};
use crate::loss::{JointPmf, OutcomeSpace, Variable};
use crate::process::{
    age_requests, check_requests, LagVar, LawProvider, Series, WindowLaw, DEFAULT_LAG_CAP,
};

use super::dataset::Dataset;

/// Fewest windows (or rows per age cell) an empirical law may rest on.
pub const DEFAULT_MIN_WINDOWS: usize = 30;

/// First-half vs second-half distance above which ingestion warns.
pub const STATIONARITY_WARN: f64 = 0.05;

fn space_of(dataset: &Dataset, r: &LagVar) -> OutcomeSpace {
    match r.series {
        Series::Target => dataset.target_space().clone(),
        Series::Feature(l) => dataset.feature_space(l).clone(),
    }
}

fn symbol_index(dataset: &Dataset, row: usize, r: &LagVar) -> usize {
    let rec = &dataset.records()[row];
    match r.series {
        Series::Target => dataset.target_space().position(&rec.target),
        Series::Feature(l) => dataset.feature_space(l).position(&rec.features[l]),
    }
    .expect("dataset rows are validated against their spaces")
}

/// Sliding-window relative frequencies of the requested lagged variables.
/// A window at row `t` needs a row at `t - lag` for every request.
pub fn empirical_law(
    dataset: &Dataset,
    requests: &[LagVar],
    min_windows: usize,
) -> Result<WindowLaw> {
    empirical_law_with_history(dataset, requests, min_windows, 0)
}

/// Like [`empirical_law`], but only rows preceded by `history` consecutive
/// slots serve as windows. With `history` at least the largest lag, every
/// request is counted over the same windows, so the laws are marginals of
/// one joint law.
pub fn empirical_law_with_history(
    dataset: &Dataset,
    requests: &[LagVar],
    min_windows: usize,
    history: usize,
) -> Result<WindowLaw> {
    check_requests(requests, dataset.num_sources(), usize::MAX)?;
    let by_t: HashMap<i64, usize> = dataset
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.t, i))
        .collect();
    let run = contiguous_history(dataset, history);
    let variables: Vec<Variable> = requests
        .iter()
        .map(|r| Variable::new(r.name(), space_of(dataset, r)))
        .collect();
    let shape: Vec<usize> = variables.iter().map(|v| v.space.len()).collect();
    let strides = crate::loss::strides(&shape);
    let mut counts = vec![0usize; shape.iter().product()];
    let mut windows = 0usize;
    'rows: for (i, rec) in dataset.records().iter().enumerate() {
        if run[i] < history {
            continue;
        }
        let mut flat = 0;
        for (v, r) in requests.iter().enumerate() {
            let Some(&row) = i64::try_from(r.lag)
                .ok()
                .and_then(|lag| by_t.get(&(rec.t - lag)))
            else {
                continue 'rows;
            };
            flat += symbol_index(dataset, row, r) * strides[v];
        }
        counts[flat] += 1;
        windows += 1;
    }
    if windows < min_windows.max(1) {
        return Err(Error::InsufficientWindows {
            found: windows,
            required: min_windows.max(1),
        });
    }
    let probs = counts.iter().map(|&c| c as f64 / windows as f64).collect();
    Ok(WindowLaw {
        requests: requests.to_vec(),
        law: JointPmf::from_parts_unchecked(variables, probs),
        samples: Some(windows),
    })
}

/// Per row, how many immediately preceding slots are present, capped at `cap`.
fn contiguous_history(dataset: &Dataset, cap: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let recs = dataset.records();
    order.sort_by_key(|&i| recs[i].t);
    let mut run = vec![0usize; recs.len()];
    for w in 1..order.len() {
        let (prev, cur) = (order[w - 1], order[w]);
        if recs[cur].t == recs[prev].t + 1 {
            run[cur] = (run[prev] + 1).min(cap);
        }
    }
    run
}

/// Empirical law of the target and every feature at the lags in `delta`.
pub fn empirical_window_law(dataset: &Dataset, delta: &AgeVector) -> Result<WindowLaw> {
    if delta.dims() != dataset.num_sources() {
        return Err(Error::DimensionMismatch {
            expected: dataset.num_sources(),
            found: delta.dims(),
        });
    }
    empirical_law(dataset, &age_requests(delta), DEFAULT_MIN_WINDOWS)
}

/// Add-`lambda` smoothing of a law estimated from `samples` windows:
/// `(N p + lambda) / (N + C lambda)` over all `C` cells.
pub fn smooth_counts(law: &JointPmf, samples: usize, lambda: f64) -> Result<JointPmf> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "lambda".into(),
            reason: format!("{lambda} is not a finite nonnegative number"),
        });
    }
    if lambda == 0.0 {
        return Ok(law.clone());
    }
    let n = samples as f64;
    let c = law.num_cells() as f64;
    let probs = law
        .probs()
        .iter()
        .map(|p| (n * p + lambda) / (n + c * lambda))
        .collect();
    Ok(JointPmf::from_parts_unchecked(
        law.variables().to_vec(),
        probs,
    ))
}

/// Smooths an empirical window law using its own window count.
pub fn smooth(law: &WindowLaw, lambda: f64) -> Result<WindowLaw> {
    let samples = law.samples.ok_or_else(|| Error::InvalidParameter {
        name: "law".into(),
        reason: "smoothing needs the sample count of an empirical law".into(),
    })?;
    Ok(WindowLaw {
        requests: law.requests.clone(),
        law: smooth_counts(&law.law, samples, lambda)?,
        samples: law.samples,
    })
}

/// Sliding-window laws of one dataset, optionally smoothed.
///
/// By default every law is counted over the rows with a full history of
/// `lag_cap` slots, so laws of different request sets agree on shared
/// variables.
#[derive(Clone, Debug)]
pub struct EmpiricalProvider {
    dataset: Arc<Dataset>,
    min_windows: usize,
    lambda: Option<f64>,
    lag_cap: usize,
    common_windows: bool,
}

impl EmpiricalProvider {
    pub fn new(dataset: Arc<Dataset>) -> Self {
        Self {
            dataset,
            min_windows: DEFAULT_MIN_WINDOWS,
            lambda: None,
            lag_cap: DEFAULT_LAG_CAP,
            common_windows: true,
        }
    }

    /// `false` lets each request use every row its own lags allow.
    pub fn with_common_windows(mut self, common: bool) -> Self {
        self.common_windows = common;
        self
    }

    pub fn with_min_windows(mut self, n: usize) -> Self {
        self.min_windows = n;
        self
    }

    pub fn with_smoothing(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_lag_cap(mut self, cap: usize) -> Self {
        self.lag_cap = cap;
        self
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }
}

impl LawProvider for EmpiricalProvider {
    fn num_sources(&self) -> usize {
        self.dataset.num_sources()
    }

    fn lag_cap(&self) -> usize {
        self.lag_cap
    }

    fn window_law(&self, requests: &[LagVar]) -> Result<WindowLaw> {
        check_requests(requests, self.num_sources(), self.lag_cap)?;
        let history = if self.common_windows { self.lag_cap } else { 0 };
        let law = empirical_law_with_history(&self.dataset, requests, self.min_windows, history)?;
        match self.lambda {
            Some(l) => smooth(&law, l),
            None => Ok(law),
        }
    }

    fn describe(&self) -> String {
        format!(
            "empirical[rows={}, sources={}{}]",
            self.dataset.len(),
            self.dataset.num_sources(),
            self.lambda
                .map(|l| format!(", lambda={l}"))
                .unwrap_or_default()
        )
    }
}

/// One law of `(Y, X^m)` per observed age vector, built from the rows that
/// carry that age vector. Serves requests of the form `Y@0, X_l@delta_l`.
#[derive(Clone, Debug)]
pub struct AgeLawFamily {
    sources: usize,
    laws: BTreeMap<AgeVector, WindowLaw>,
}

impl AgeLawFamily {
    pub fn laws(&self) -> &BTreeMap<AgeVector, WindowLaw> {
        &self.laws
    }
}

impl LawProvider for AgeLawFamily {
    fn num_sources(&self) -> usize {
        self.sources
    }

    fn lag_cap(&self) -> usize {
        self.laws
            .keys()
            .map(AgeVector::max_component)
            .max()
            .unwrap_or(0)
    }

    fn window_law(&self, requests: &[LagVar]) -> Result<WindowLaw> {
        check_requests(requests, self.sources, usize::MAX)?;
        let mut delta = vec![None; self.sources];
        for r in requests {
            match r.series {
                Series::Target if r.lag == 0 => {}
                Series::Feature(l) => delta[l] = Some(r.lag),
                _ => return Err(Error::UnknownVariable(r.name())),
            }
        }
        let delta: Option<Vec<usize>> = delta.into_iter().collect();
        let delta = delta.ok_or_else(|| Error::InvalidParameter {
            name: "requests".into(),
            reason: "per-age laws need every source at its age lag".into(),
        })?;
        let key = AgeVector::new(delta);
        let w = self
            .laws
            .get(&key)
            .ok_or_else(|| Error::UnknownVariable(format!("age vector {key}")))?;
        let names: Vec<String> = requests.iter().map(LagVar::name).collect();
        Ok(WindowLaw {
            requests: requests.to_vec(),
            law: w.law.marginal(&names)?,
            samples: w.samples,
        })
    }

    fn describe(&self) -> String {
        format!("age-family[cells={}]", self.laws.len())
    }
}

/// Age-vector frequencies of the rows plus the per-age law family.
pub fn dynamic_age_law(
    dataset: &Dataset,
    min_rows: usize,
) -> Result<(AgeDistribution, AgeLawFamily)> {
    let mut rows: BTreeMap<AgeVector, Vec<usize>> = BTreeMap::new();
    for (i, r) in dataset.records().iter().enumerate() {
        rows.entry(r.age_vector()).or_default().push(i);
    }
    let sparse: Vec<(String, usize)> = rows
        .iter()
        .filter(|(_, r)| r.len() < min_rows)
        .map(|(a, r)| (a.to_string(), r.len()))
        .collect();
    if !sparse.is_empty() {
        return Err(Error::SparseAgeCells(sparse));
    }
    let dist = AgeDistribution::from_counts(rows.iter().map(|(a, r)| (a.clone(), r.len())))?;
    let mut laws = BTreeMap::new();
    for (age, idx) in rows {
        let requests = age_requests(&age);
        let variables: Vec<Variable> = requests
            .iter()
            .map(|r| Variable::new(r.name(), space_of(dataset, r)))
            .collect();
        let shape: Vec<usize> = variables.iter().map(|v| v.space.len()).collect();
        let strides = crate::loss::strides(&shape);
        let mut probs = vec![0.0; shape.iter().product()];
        for &i in &idx {
            let mut flat = 0;
            for (v, r) in requests.iter().enumerate() {
                let lag0 = LagVar { lag: 0, ..*r };
                flat += symbol_index(dataset, i, &lag0) * strides[v];
            }
            probs[flat] += 1.0 / idx.len() as f64;
        }
        laws.insert(
            age,
            WindowLaw {
                requests,
                law: JointPmf::from_parts_unchecked(variables, probs),
                samples: Some(idx.len()),
            },
        );
    }
    Ok((
        dist,
        AgeLawFamily {
            sources: dataset.num_sources(),
            laws,
        },
    ))
}

/// Joint law of the target and the features as stored in each row, with
/// variables `Y, X1, ..., Xm`.
pub fn pooled_law(dataset: &Dataset) -> Result<JointPmf> {
    let mut variables = vec![Variable::new("Y", dataset.target_space().clone())];
    variables.extend(
        (0..dataset.num_sources())
            .map(|l| Variable::new(format!("X{}", l + 1), dataset.feature_space(l).clone())),
    );
    let shape: Vec<usize> = variables.iter().map(|v| v.space.len()).collect();
    let strides = crate::loss::strides(&shape);
    let mut counts = vec![0.0; shape.iter().product()];
    for i in 0..dataset.len() {
        let mut flat = symbol_index(dataset, i, &LagVar::target(0)) * strides[0];
        for l in 0..dataset.num_sources() {
            flat += symbol_index(dataset, i, &LagVar::feature(l, 0)) * strides[l + 1];
        }
        counts[flat] += 1.0;
    }
    JointPmf::from_weights(variables, counts)
}

/// Distance between first-half and second-half marginals of each column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// `(column, distance)`; the distance is `sum (p - q)^2 / ((p + q) / 2)`.
    pub columns: Vec<(String, f64)>,
    pub max: f64,
    pub warned: bool,
}

/// Compares the two halves of the dataset column by column and logs a
/// warning when they differ by more than [`STATIONARITY_WARN`].
pub fn stationarity_diagnostic(dataset: &Dataset) -> Result<StationarityReport> {
    if dataset.len() < 2 {
        return Err(Error::InvalidDataset("need at least two rows".into()));
    }
    let half = dataset.len() / 2;
    let (a, b) = dataset.records().split_at(half);
    let mut columns = Vec::new();
    let distance = |space: &OutcomeSpace, get: &dyn Fn(usize) -> String| -> f64 {
        let k = space.len();
        let mut p = vec![0.0; k];
        let mut q = vec![0.0; k];
        for i in 0..a.len() {
            p[space.position(&get(i)).unwrap()] += 1.0 / a.len() as f64;
        }
        for i in 0..b.len() {
            q[space.position(&get(half + i)).unwrap()] += 1.0 / b.len() as f64;
        }
        p.iter()
            .zip(&q)
            .filter(|(x, y)| *x + *y > 0.0)
            .map(|(x, y)| (x - y) * (x - y) / ((x + y) / 2.0))
            .sum()
    };
    let recs = dataset.records();
    for l in 0..dataset.num_sources() {
        let d = distance(dataset.feature_space(l), &|i| recs[i].features[l].clone());
        columns.push((format!("x_{}", l + 1), d));
    }
    let d = distance(dataset.target_space(), &|i| recs[i].target.clone());
    columns.push(("y".into(), d));
    let max = columns.iter().map(|c| c.1).fold(0.0, f64::max);
    let warned = max > STATIONARITY_WARN;
    if warned {
        warn!("first and second halves of the dataset differ (max marginal distance {max:.4}); stationarity is assumed");
    }
    Ok(StationarityReport {
        columns,
        max,
        warned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Record;

    fn series(xs: &[&str], ys: &[&str], ages: &[usize]) -> Dataset {
        let records = xs
            .iter()
            .zip(ys)
            .zip(ages)
            .enumerate()
            .map(|(t, ((x, y), a))| Record {
                t: t as i64,
                features: vec![x.to_string()],
                ages: vec![*a],
                target: y.to_string(),
            })
            .collect();
        Dataset::new(records, None, None).unwrap()
    }

    #[test]
    fn constant_series_is_point_mass() {
        let d = series(&["a"; 40], &["1"; 40], &[0; 40]);
        let w = empirical_window_law(&d, &AgeVector::new(vec![2])).unwrap();
        assert_eq!(w.samples, Some(38));
        assert_eq!(w.law.probs(), &[1.0]);
    }

    #[test]
    fn lag_longer_than_series() {
        let d = series(&["a"; 40], &["1"; 40], &[0; 40]);
        assert!(matches!(
            empirical_window_law(&d, &AgeVector::new(vec![40])),
            Err(Error::InsufficientWindows { found: 0, .. })
        ));
    }

    #[test]
    fn lag_pairs_follow_time_index() {
        let xs: Vec<&str> = (0..41)
            .map(|i| if i % 2 == 0 { "a" } else { "b" })
            .collect();
        let ys: Vec<&str> = (0..41)
            .map(|i| if i % 2 == 0 { "0" } else { "1" })
            .collect();
        let d = series(&xs, &ys, &[0; 41]);
        let w = empirical_window_law(&d, &AgeVector::new(vec![1])).unwrap();
        // Y=0 pairs with the previous X=b
        assert_eq!(w.law.probs(), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn smoothing_formula() {
        let d = series(&["a", "b", "a", "a"], &["0", "0", "0", "1"], &[0; 4]);
        let law = empirical_law(&d, &age_requests(&AgeVector::new(vec![0])), 1).unwrap();
        assert_eq!(smooth(&law, 0.0).unwrap(), law);
        let s = smooth(&law, 1.0).unwrap();
        // cell (Y=1, X=b) is empty: 1 / (N + C) with N = 4, C = 4
        assert!((s.law.probs()[3] - 1.0 / 8.0).abs() < 1e-15);
        let u = smooth(&law, 1e6).unwrap();
        assert!(u.law.probs().iter().all(|p| (p - 0.25).abs() < 1e-4));
    }

    #[test]
    fn age_census_and_sparse_cells() {
        let ages: Vec<usize> = (0..60).map(|i| 1 + i % 2).collect();
        let d = series(&["a"; 60], &["1"; 60], &ages);
        let (dist, fam) = dynamic_age_law(&d, 30).unwrap();
        assert_eq!(dist.probs(), &[0.5, 0.5]);
        assert_eq!(fam.laws().len(), 2);
        let err = dynamic_age_law(&d, 31).unwrap_err();
        assert!(matches!(err, Error::SparseAgeCells(ref v) if v.len() == 2 && v[0].1 == 30));
    }

    #[test]
    fn stationarity_flags_shift() {
        let mut xs = vec!["a"; 50];
        xs.extend(vec!["b"; 50]);
        let d = series(&xs, &["1"; 100], &[0; 100]);
        let r = stationarity_diagnostic(&d).unwrap();
        assert!(r.warned);
        assert!((r.columns[0].1 - 4.0).abs() < 1e-12);
    }
}
