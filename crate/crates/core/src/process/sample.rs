use rand::distr::weighted::WeightedIndex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::ingest::{Dataset, Record};

use super::model::ProcessModel;

fn samplers(rows: &[Vec<f64>]) -> Result<Vec<WeightedIndex<f64>>> {
    rows.iter()
        .map(|r| WeightedIndex::new(r).map_err(|e| Error::InvalidModel(e.to_string())))
        .collect()
}

/// Stationary trajectory of `length` rows with ages fixed at zero.
///
/// The chain starts from the stationary law `window + delay - 1` slots
/// before row 0 so every row has a complete feature window.
pub fn sample_trajectory(model: &ProcessModel, length: usize, seed: u64) -> Result<Dataset> {
    if length == 0 {
        return Err(Error::InvalidParameter {
            name: "length".into(),
            reason: "must be positive".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init =
        WeightedIndex::new(model.stationary()).map_err(|e| Error::InvalidModel(e.to_string()))?;
    let step = samplers(model.transition())?;
    let emit: Vec<Vec<WeightedIndex<f64>>> = (0..model.num_sources())
        .map(|l| samplers(model.emission(l)))
        .collect::<Result<_>>()?;
    let target = samplers(model.target_kernel())?;

    let burn = model.window() + model.delay() - 1;
    let slots = length + burn;
    let m = model.num_sources();
    let mut emissions = vec![Vec::with_capacity(slots); m];
    let mut targets = Vec::with_capacity(slots);
    let mut s = init.sample(&mut rng);
    for i in 0..slots {
        if i > 0 {
            s = step[s].sample(&mut rng);
        }
        for (l, e) in emissions.iter_mut().enumerate() {
            e.push(emit[l][s].sample(&mut rng));
        }
        targets.push(target[s].sample(&mut rng));
    }

    let b = model.window();
    let delay = model.delay();
    let records = (0..length)
        .map(|row| {
            let now = row + burn;
            let features = (0..m)
                .map(|l| {
                    (0..b)
                        .map(|j| model.symbol_labels(l)[emissions[l][now - delay - j]].as_str())
                        .collect::<Vec<_>>()
                        .join("|")
                })
                .collect();
            Record {
                t: row as i64,
                features,
                ages: vec![0; m],
                target: model.target_space().label(targets[now]).to_string(),
            }
        })
        .collect();
    let spaces = (0..m).map(|l| model.feature_space(l).clone()).collect();
    Dataset::new(records, Some(spaces), Some(model.target_space().clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{make_hidden_nonmarkov, ModelSizes};

    #[test]
    fn deterministic_per_seed() {
        let m = make_hidden_nonmarkov(4, &ModelSizes::default(), 0.2).unwrap();
        let a = sample_trajectory(&m, 200, 9).unwrap();
        let b = sample_trajectory(&m, 200, 9).unwrap();
        let c = sample_trajectory(&m, 200, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn window_labels_have_b_parts() {
        let s = ModelSizes {
            window: 3,
            ..ModelSizes::default()
        };
        let m = make_hidden_nonmarkov(4, &s, 0.2).unwrap();
        let d = sample_trajectory(&m, 10, 1).unwrap();
        assert_eq!(d.records()[0].features[0].split('|').count(), 3);
    }
}
