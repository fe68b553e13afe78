use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aoi::AgeVector;
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::process::LawProvider;

use super::training::min_training_loss;

/// Minimum training loss over a grid of age vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub grid: Vec<AgeVector>,
    pub values: Vec<f64>,
    pub loss: String,
    pub provider: String,
    /// Total drop along unit coordinate increases; 0 for a monotone curve.
    pub non_monotonicity: f64,
}

impl LossCurve {
    pub fn value(&self, delta: &AgeVector) -> Option<f64> {
        self.grid
            .iter()
            .position(|g| g == delta)
            .map(|i| self.values[i])
    }

    /// Columns `delta_1..delta_m, loss`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let m = self.grid.first().map_or(0, AgeVector::dims);
        let mut header: Vec<String> = (1..=m).map(|l| format!("delta_{l}")).collect();
        header.push("loss".into());
        w.write_record(&header)?;
        for (g, v) in self.grid.iter().zip(&self.values) {
            let mut rec: Vec<String> = g.components().iter().map(|c| c.to_string()).collect();
            rec.push(v.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sum of `max(0, h(g) - h(g + e_l))` over grid points `g` whose unit
/// successor `g + e_l` is also on the grid.
pub fn non_monotonicity_index(grid: &[AgeVector], values: &[f64]) -> f64 {
    let at: HashMap<&AgeVector, f64> = grid.iter().zip(values.iter().copied()).collect();
    let mut total = 0.0;
    for (g, &v) in grid.iter().zip(values) {
        for l in 0..g.dims() {
            let mut up = g.components().to_vec();
            up[l] += 1;
            if let Some(&next) = at.get(&AgeVector::new(up)) {
                total += (v - next).max(0.0);
            }
        }
    }
    total
}

/// Evaluates the minimum training loss at every grid point, in parallel.
pub fn loss_curve(
    provider: &dyn LawProvider,
    grid: &[AgeVector],
    loss: &LossSpec,
) -> Result<LossCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid".into(),
            reason: "empty".into(),
        });
    }
    for (i, g) in grid.iter().enumerate() {
        if grid[..i].contains(g) {
            return Err(Error::InvalidParameter {
                name: "grid".into(),
                reason: format!("duplicate point {g}"),
            });
        }
    }
    let values = grid
        .par_iter()
        .map(|g| min_training_loss(provider, g, loss))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossCurve {
        non_monotonicity: non_monotonicity_index(grid, &values),
        grid: grid.to_vec(),
        values,
        loss: loss.name().to_string(),
        provider: provider.describe(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_counts_unit_drops() {
        let grid = AgeVector::grid(1, 3);
        assert_eq!(non_monotonicity_index(&grid, &[0.0, 1.0, 2.0, 3.0]), 0.0);
        assert_eq!(non_monotonicity_index(&grid, &[0.0, 1.0, 0.5, 0.75]), 0.5);
        let grid2 = AgeVector::grid(2, 1);
        // (0,0)=1 drops to (0,1)=0 and (1,0)=0.5
        assert_eq!(non_monotonicity_index(&grid2, &[1.0, 0.0, 0.5, 2.0]), 1.5);
    }

    #[test]
    fn single_point_grid() {
        let m = crate::process::make_markov_observable(1, &Default::default()).unwrap();
        let c = loss_curve(&m, &[AgeVector::new(vec![1, 2])], &LossSpec::Logarithmic).unwrap();
        let mut out = Vec::new();
        c.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("delta_1,delta_2,loss\n1,2,"));
    }
}
