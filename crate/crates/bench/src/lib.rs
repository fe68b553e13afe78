//! Shared fixtures for the benchmarks.

use aof_core::aoi::{AgeDistribution, AgeVector};
use aof_core::process::{make_hidden_nonmarkov, ModelSizes};
use aof_core::ProcessModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn hidden_model(states: usize, window: usize) -> ProcessModel {
    let sizes = ModelSizes {
        states,
        window,
        ..ModelSizes::default()
    };
    make_hidden_nonmarkov(1, &sizes, 0.1).expect("valid sizes")
}

/// Random law on `points` distinct age vectors in `[0, 6)^m`.
pub fn random_ages(seed: u64, m: usize, points: usize) -> AgeDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut support: Vec<AgeVector> = Vec::with_capacity(points);
    while support.len() < points {
        let v = AgeVector::new((0..m).map(|_| rng.random_range(0..6)).collect());
        if !support.contains(&v) {
            support.push(v);
        }
    }
    let weights: Vec<f64> = (0..points).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    AgeDistribution::new(support, weights.iter().map(|w| w / total).collect()).expect("valid law")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(hidden_model(4, 2).window(), 2);
        let a = random_ages(3, 2, 10);
        assert_eq!(a.support().len(), 10);
    }
}
