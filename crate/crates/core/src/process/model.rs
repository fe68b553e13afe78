use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::OutcomeSpace;
use crate::numeric::stable_sum;

/// Default cap on requested lags.
pub const DEFAULT_LAG_CAP: usize = 16;

const ROW_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

/// Stationary hidden-Markov generator of features and target.
///
/// A hidden state chain `S_t` drives one emission per source per slot and
/// the target `Y_t`. The feature of source `l` at time `t` is the tuple of
/// its last `window` emissions delayed by `delay` slots, most recent first:
/// `(e_{l,t-delay}, ..., e_{l,t-delay-window+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct ProcessModel {
    state_labels: Vec<String>,
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
    feature_labels: Vec<Vec<String>>,
    emissions: Vec<Vec<Vec<f64>>>,
    target_levels: Vec<f64>,
    target_kernel: Vec<Vec<f64>>,
    window: usize,
    delay: usize,
    lag_cap: usize,
    seed: Option<u64>,
    // derived
    feature_spaces: Vec<OutcomeSpace>,
    target_space: OutcomeSpace,
}

/// Serialized form of a [`ProcessModel`]; the stationary law is recomputed on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelRepr {
    pub state_labels: Vec<String>,
    pub transition: Vec<Vec<f64>>,
    /// Per source, the symbol labels of a single emission.
    pub feature_labels: Vec<Vec<String>>,
    /// Per source, per state, the emission pmf.
    pub emissions: Vec<Vec<Vec<f64>>>,
    pub target_levels: Vec<f64>,
    /// Per state, the target pmf.
    pub target_kernel: Vec<Vec<f64>>,
    pub window: usize,
    pub delay: usize,
    #[serde(default = "default_cap")]
    pub lag_cap: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_cap() -> usize {
    DEFAULT_LAG_CAP
}

impl TryFrom<ModelRepr> for ProcessModel {
    type Error = Error;
    fn try_from(r: ModelRepr) -> Result<Self> {
        ProcessModel::new(r)
    }
}

impl From<ProcessModel> for ModelRepr {
    fn from(m: ProcessModel) -> Self {
        m.repr()
    }
}

impl ProcessModel {
    pub fn new(r: ModelRepr) -> Result<Self> {
        let n = r.state_labels.len();
        if n == 0 {
            return Err(Error::InvalidModel("no states".into()));
        }
        if r.transition.len() != n {
            return Err(Error::InvalidModel(format!(
                "transition has {} rows for {n} states",
                r.transition.len()
            )));
        }
        for (i, row) in r.transition.iter().enumerate() {
            check_row(row, n, &format!("transition row {i}"))?;
        }
        if r.window == 0 {
            return Err(Error::InvalidModel(
                "window length must be at least 1".into(),
            ));
        }
        if r.feature_labels.len() != r.emissions.len() {
            return Err(Error::InvalidModel(format!(
                "{} label lists for {} emission kernels",
                r.feature_labels.len(),
                r.emissions.len()
            )));
        }
        for (l, (labels, kernel)) in r.feature_labels.iter().zip(&r.emissions).enumerate() {
            OutcomeSpace::categorical(labels.iter().cloned())?;
            if kernel.len() != n {
                return Err(Error::InvalidModel(format!(
                    "emission kernel {l} has {} rows",
                    kernel.len()
                )));
            }
            for (s, row) in kernel.iter().enumerate() {
                check_row(
                    row,
                    labels.len(),
                    &format!("emission kernel {l}, state {s}"),
                )?;
            }
        }
        if r.target_kernel.len() != n {
            return Err(Error::InvalidModel(format!(
                "target kernel has {} rows",
                r.target_kernel.len()
            )));
        }
        for (s, row) in r.target_kernel.iter().enumerate() {
            check_row(
                row,
                r.target_levels.len(),
                &format!("target kernel, state {s}"),
            )?;
        }
        let target_space = OutcomeSpace::numeric(r.target_levels.clone())?;
        if !is_primitive(&r.transition) {
            return Err(Error::InvalidModel(
                "transition matrix is reducible or periodic; stationary law is not unique".into(),
            ));
        }
        let stationary = stationary_law(&r.transition)?;
        let feature_spaces = r
            .feature_labels
            .iter()
            .map(|labels| window_space(labels, r.window))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            state_labels: r.state_labels,
            transition: r.transition,
            stationary,
            feature_labels: r.feature_labels,
            emissions: r.emissions,
            target_levels: r.target_levels,
            target_kernel: r.target_kernel,
            window: r.window,
            delay: r.delay,
            lag_cap: r.lag_cap,
            seed: r.seed,
            feature_spaces,
            target_space,
        })
    }

    pub fn repr(&self) -> ModelRepr {
        ModelRepr {
            state_labels: self.state_labels.clone(),
            transition: self.transition.clone(),
            feature_labels: self.feature_labels.clone(),
            emissions: self.emissions.clone(),
            target_levels: self.target_levels.clone(),
            target_kernel: self.target_kernel.clone(),
            window: self.window,
            delay: self.delay,
            lag_cap: self.lag_cap,
            seed: self.seed,
        }
    }

    /// Same chain and kernels with a different feature window length.
    pub fn with_window(&self, window: usize) -> Result<Self> {
        let mut r = self.repr();
        r.window = window;
        Self::new(r)
    }

    pub fn with_delay(&self, delay: usize) -> Result<Self> {
        let mut r = self.repr();
        r.delay = delay;
        Self::new(r)
    }

    pub fn with_lag_cap(mut self, cap: usize) -> Self {
        self.lag_cap = cap;
        self
    }

    pub fn num_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn num_sources(&self) -> usize {
        self.emissions.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn emission(&self, source: usize) -> &[Vec<f64>] {
        &self.emissions[source]
    }

    pub fn target_kernel(&self) -> &[Vec<f64>] {
        &self.target_kernel
    }

    pub fn symbol_labels(&self, source: usize) -> &[String] {
        &self.feature_labels[source]
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn lag_cap(&self) -> usize {
        self.lag_cap
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Space of the windowed feature of `source`.
    pub fn feature_space(&self, source: usize) -> &OutcomeSpace {
        &self.feature_spaces[source]
    }

    pub fn target_space(&self) -> &OutcomeSpace {
        &self.target_space
    }

    /// Whether two models produce laws on the same cell grids.
    pub fn compatible_with(&self, other: &ProcessModel) -> Result<()> {
        let mismatch = |what: &str| {
            Err(Error::IncompatibleProviders(format!(
                "models differ in {what}"
            )))
        };
        if self.num_sources() != other.num_sources() {
            return mismatch("number of sources");
        }
        if self.feature_labels != other.feature_labels {
            return mismatch("feature symbols");
        }
        if self.target_levels != other.target_levels {
            return mismatch("target levels");
        }
        if self.window != other.window || self.delay != other.delay {
            return mismatch("window length or delay");
        }
        Ok(())
    }
}

fn check_row(row: &[f64], len: usize, what: &str) -> Result<()> {
    if row.len() != len {
        return Err(Error::InvalidModel(format!(
            "{what} has {} entries, expected {len}",
            row.len()
        )));
    }
    if let Some(v) = row.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidModel(format!("{what} has invalid entry {v}")));
    }
    let s = stable_sum(row.iter().copied());
    if (s - 1.0).abs() > ROW_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// Labels of `window`-tuples of symbols, most recent first, joined by `|`.
/// Lexicographic tuple order matches the row-major index order.
pub(crate) fn window_space(labels: &[String], window: usize) -> Result<OutcomeSpace> {
    if window == 1 {
        return OutcomeSpace::categorical(labels.iter().cloned());
    }
    let k = labels.len();
    let n = k.pow(window as u32);
    let mut out = Vec::with_capacity(n);
    let mut c = vec![0usize; window];
    for _ in 0..n {
        out.push(
            c.iter()
                .map(|&i| labels[i].as_str())
                .collect::<Vec<_>>()
                .join("|"),
        );
        crate::loss::increment(&mut c, &vec![k; window]);
    }
    OutcomeSpace::categorical(out)
}

/// Primitive (irreducible and aperiodic) iff a high enough power is positive.
fn is_primitive(t: &[Vec<f64>]) -> bool {
    let n = t.len();
    let mut m: Vec<Vec<bool>> = t
        .iter()
        .map(|r| r.iter().map(|&v| v > 0.0).collect())
        .collect();
    // Wielandt: primitive iff A^k > 0 for k = (n-1)^2 + 1.
    let bound = (n - 1) * (n - 1) + 1;
    let mut power = 1usize;
    while power < bound {
        let mut sq = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if m[i][k] {
                    for j in 0..n {
                        sq[i][j] |= m[k][j];
                    }
                }
            }
        }
        m = sq;
        power *= 2;
    }
    m.iter().all(|r| r.iter().all(|&b| b))
}

fn stationary_law(t: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = t.len();
    // (T^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = t[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidModel("stationary system is singular".into()))?;
    let mut pi: Vec<f64> = sol.iter().map(|v| v.max(0.0)).collect();
    // polish with a few power steps
    for _ in 0..8 {
        let mut next = vec![0.0; n];
        for (i, p) in pi.iter().enumerate() {
            for j in 0..n {
                next[j] += p * t[i][j];
            }
        }
        let s = stable_sum(next.iter().copied());
        pi = next.into_iter().map(|v| v / s).collect();
    }
    let residual = (0..n)
        .map(|j| ((0..n).map(|i| pi[i] * t[i][j]).sum::<f64>() - pi[j]).abs())
        .fold(0.0, f64::max);
    if residual > STATIONARY_TOL {
        return Err(Error::InvalidModel(format!(
            "stationary residual {residual:e}"
        )));
    }
    Ok(pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_state(flip: f64) -> ProcessModel {
        ProcessModel::new(ModelRepr {
            state_labels: vec!["a".into(), "b".into()],
            transition: vec![vec![1.0 - flip, flip], vec![flip, 1.0 - flip]],
            feature_labels: vec![vec!["0".into(), "1".into()]],
            emissions: vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            target_levels: vec![0.0, 1.0],
            target_kernel: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            window: 1,
            delay: 0,
            lag_cap: DEFAULT_LAG_CAP,
            seed: None,
        })
        .unwrap()
    }

    #[test]
    fn symmetric_chain_is_uniform() {
        let m = two_state(0.3);
        assert!((m.stationary()[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn stationary_satisfies_balance() {
        let t = vec![
            vec![0.1, 0.6, 0.3],
            vec![0.5, 0.25, 0.25],
            vec![0.2, 0.2, 0.6],
        ];
        let pi = stationary_law(&t).unwrap();
        for j in 0..3 {
            let v: f64 = (0..3).map(|i| pi[i] * t[i][j]).sum();
            assert!((v - pi[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_and_reducible_chains_rejected() {
        let mut r = two_state(0.3).repr();
        r.transition = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(
            ProcessModel::new(r.clone()),
            Err(Error::InvalidModel(_))
        ));
        r.transition = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(ProcessModel::new(r), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn bad_rows_rejected() {
        let mut r = two_state(0.3).repr();
        r.emissions[0][1] = vec![0.5, 0.6];
        assert!(matches!(ProcessModel::new(r), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn window_labels_are_lexicographic() {
        let s = window_space(&["0".into(), "1".into()], 2).unwrap();
        assert_eq!(s.labels(), &["0|0", "0|1", "1|0", "1|1"]);
    }

    #[test]
    fn json_round_trip() {
        let m = two_state(0.2);
        let text = serde_json::to_string(&m).unwrap();
        let back: ProcessModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
