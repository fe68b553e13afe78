//! Seeded random model families.
//!
//! Random draws happen in a fixed order that does not depend on the window
//! length, delay or noise level, so the same seed yields the same chain under
//! any of those settings.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::model::{ModelRepr, ProcessModel, DEFAULT_LAG_CAP};
use super::provider::MixtureProvider;

/// Sizes shared by the generators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSizes {
    pub states: usize,
    pub sources: usize,
    /// Emission alphabet size per source. Ignored by
    /// [`make_markov_observable`], which emits relabelled states.
    pub symbols: usize,
    pub targets: usize,
    pub window: usize,
    pub delay: usize,
}

impl Default for ModelSizes {
    fn default() -> Self {
        Self {
            states: 4,
            sources: 2,
            symbols: 2,
            targets: 2,
            window: 1,
            delay: 0,
        }
    }
}

impl ModelSizes {
    fn check(&self) -> Result<()> {
        let positive = [
            ("states", self.states),
            ("sources", self.sources),
            ("symbols", self.symbols),
            ("targets", self.targets),
            ("window", self.window),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: "must be at least 1".into(),
                });
            }
        }
        Ok(())
    }
}

/// Dirichlet(1) row mixed with a uniform floor so every entry is positive.
fn positive_row(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw
        .iter()
        .map(|v| (1.0 - floor) * v / s + floor / n as f64)
        .collect();
    renormalize(&mut row);
    row
}

fn renormalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    for v in row.iter_mut() {
        *v /= s;
    }
}

/// A map `0..from -> 0..to` that is onto when `from >= to` and one-to-one otherwise.
fn balanced_map(rng: &mut ChaCha8Rng, from: usize, to: usize) -> Vec<usize> {
    let mut targets: Vec<usize> = (0..to).collect();
    targets.shuffle(rng);
    let mut order: Vec<usize> = (0..from).collect();
    order.shuffle(rng);
    let mut map = vec![0; from];
    for (i, &s) in order.iter().enumerate() {
        map[s] = if i < to {
            targets[i]
        } else {
            rng.random_range(0..to)
        };
    }
    map
}

fn state_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

fn symbol_labels(k: usize) -> Vec<String> {
    (0..k).map(|i| i.to_string()).collect()
}

fn target_levels(k: usize) -> Vec<f64> {
    (0..k).map(|i| i as f64).collect()
}

fn target_kernel(
    rng: &mut ChaCha8Rng,
    states: usize,
    targets: usize,
    lo: f64,
    hi: f64,
) -> Vec<Vec<f64>> {
    let h = balanced_map(rng, states, targets);
    let kappa = rng.random_range(lo..hi);
    (0..states)
        .map(|s| {
            let mix = positive_row(rng, targets, 0.1);
            let mut row: Vec<f64> = mix.iter().map(|v| kappa * v).collect();
            row[h[s]] += 1.0 - kappa;
            renormalize(&mut row);
            row
        })
        .collect()
}

/// Model whose features reveal the state exactly (each source emits a
/// relabelling of `S_t`) on a fully positive chain.
///
/// Features are then Markov by construction: the current feature screens the
/// target off from every older observation.
pub fn make_markov_observable(seed: u64, sizes: &ModelSizes) -> Result<ProcessModel> {
    sizes.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sizes.states;
    let transition: Vec<Vec<f64>> = (0..n).map(|_| positive_row(&mut rng, n, 0.2)).collect();
    let mut emissions = Vec::with_capacity(sizes.sources);
    for _ in 0..sizes.sources {
        let mut sigma: Vec<usize> = (0..n).collect();
        sigma.shuffle(&mut rng);
        emissions.push(
            (0..n)
                .map(|s| {
                    let mut row = vec![0.0; n];
                    row[sigma[s]] = 1.0;
                    row
                })
                .collect(),
        );
    }
    let target_kernel = target_kernel(&mut rng, n, sizes.targets, 0.1, 0.4);
    ProcessModel::new(ModelRepr {
        state_labels: state_labels(n),
        transition,
        feature_labels: vec![symbol_labels(n); sizes.sources],
        emissions,
        target_levels: target_levels(sizes.targets),
        target_kernel,
        window: sizes.window,
        delay: sizes.delay,
        lag_cap: DEFAULT_LAG_CAP,
        seed: Some(seed),
    })
}

/// Model with a sticky cyclic hidden chain and noisy emissions.
///
/// The chain moves around a random cycle with occasional random jumps; each
/// source emits a (possibly many-to-one) function of the state, corrupted by
/// uniform noise with probability `noise`. With noise or fewer symbols than
/// states, older observations carry information about the target that the
/// newest one lacks.
pub fn make_hidden_nonmarkov(seed: u64, sizes: &ModelSizes, noise: f64) -> Result<ProcessModel> {
    sizes.check()?;
    if !(0.0..=1.0).contains(&noise) || noise.is_nan() {
        return Err(Error::InvalidParameter {
            name: "noise".into(),
            reason: format!("{noise} outside [0, 1]"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sizes.states;
    let mut cycle: Vec<usize> = (0..n).collect();
    cycle.shuffle(&mut rng);
    let rho = rng.random_range(0.05..0.35);
    let mut transition = vec![vec![0.0; n]; n];
    for i in 0..n {
        let jump = positive_row(&mut rng, n, 0.1);
        let (from, to) = (cycle[i], cycle[(i + 1) % n]);
        for j in 0..n {
            transition[from][j] = rho * jump[j];
        }
        transition[from][to] += 1.0 - rho;
        renormalize(&mut transition[from]);
    }
    let k = sizes.symbols;
    let mut emissions = Vec::with_capacity(sizes.sources);
    for _ in 0..sizes.sources {
        let g = balanced_map(&mut rng, n, k);
        emissions.push(
            (0..n)
                .map(|s| {
                    let mut row = vec![noise / k as f64; k];
                    row[g[s]] += 1.0 - noise;
                    row
                })
                .collect::<Vec<_>>(),
        );
    }
    let target_kernel = target_kernel(&mut rng, n, sizes.targets, 0.05, 0.3);
    ProcessModel::new(ModelRepr {
        state_labels: state_labels(n),
        transition,
        feature_labels: vec![symbol_labels(k); sizes.sources],
        emissions,
        target_levels: target_levels(sizes.targets),
        target_kernel,
        window: sizes.window,
        delay: sizes.delay,
        lag_cap: DEFAULT_LAG_CAP,
        seed: Some(seed),
    })
}

/// Fully positive model with independent states on the spaces of `like`.
///
/// Slots are i.i.d., so its features are Markov at every lag, and mixing it
/// with another model moves every window law by an amount proportional to
/// the mixing weight.
pub fn make_markov_reference(seed: u64, like: &ProcessModel) -> Result<ProcessModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = like.num_states();
    let pi = positive_row(&mut rng, n, 0.2);
    let transition = vec![pi; n];
    let feature_labels: Vec<Vec<String>> = (0..like.num_sources())
        .map(|l| like.symbol_labels(l).to_vec())
        .collect();
    let emissions = feature_labels
        .iter()
        .map(|labels| {
            (0..n)
                .map(|_| positive_row(&mut rng, labels.len(), 0.2))
                .collect()
        })
        .collect();
    let levels = like.target_space().levels().unwrap_or_default().to_vec();
    let target_kernel = (0..n)
        .map(|_| positive_row(&mut rng, levels.len(), 0.2))
        .collect();
    ProcessModel::new(ModelRepr {
        state_labels: state_labels(n),
        transition,
        feature_labels,
        emissions,
        target_levels: levels,
        target_kernel,
        window: like.window(),
        delay: like.delay(),
        lag_cap: like.lag_cap(),
        seed: Some(seed),
    })
}

/// `(1 - eta) * markov_ref + eta * model`, a stationary family that is
/// Markov at `eta = 0`.
pub fn mix_toward_markov(
    model: &ProcessModel,
    markov_ref: &ProcessModel,
    eta: f64,
) -> Result<MixtureProvider> {
    model.compatible_with(markov_ref)?;
    MixtureProvider::new(Arc::new(markov_ref.clone()), Arc::new(model.clone()), eta)
}
