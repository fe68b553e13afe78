//! Exact window laws of a [`ProcessModel`] by a forward pass over slots.

use crate::error::{Error, Result};
use crate::loss::{for_each_cell, strides, JointPmf, Variable};

use super::model::ProcessModel;
use super::provider::{check_requests, LagVar, LawProvider, Series, WindowLaw};

/// Largest `cells * states` forward table the exact computation accepts.
const MAX_FORWARD_ENTRIES: usize = 1 << 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Raw {
    Target,
    Emission(usize),
}

impl ProcessModel {
    /// Exact stationary joint law of the requested lagged variables.
    pub fn exact_window_law(&self, requests: &[LagVar]) -> Result<WindowLaw> {
        check_requests(requests, self.num_sources(), self.lag_cap())?;
        let b = self.window();
        let delay = self.delay();

        // Raw observations (slot offset before t, series), deduplicated.
        let mut raw: Vec<(usize, Raw)> = Vec::new();
        for r in requests {
            match r.series {
                Series::Target => raw.push((r.lag, Raw::Target)),
                Series::Feature(l) => {
                    for j in 0..b {
                        raw.push((r.lag + delay + j, Raw::Emission(l)));
                    }
                }
            }
        }
        raw.sort_by(|a, b| b.0.cmp(&a.0).then(order(a.1).cmp(&order(b.1))));
        raw.dedup();

        let n = self.num_states();
        let arity = |r: Raw| match r {
            Raw::Target => self.target_space().len(),
            Raw::Emission(l) => self.symbol_labels(l).len(),
        };
        let raw_shape: Vec<usize> = raw.iter().map(|&(_, r)| arity(r)).collect();
        let raw_cells: usize = raw_shape.iter().product();
        if raw_cells.saturating_mul(n) > MAX_FORWARD_ENTRIES {
            return Err(Error::InvalidParameter {
                name: "requests".into(),
                reason: format!("forward table of {raw_cells} x {n} entries is too large"),
            });
        }

        // alpha[obs][state], observations appended as the fastest index.
        let pi = self.stationary();
        let mut alpha = pi.to_vec();
        let mut cells = 1usize;
        let mut slot = raw[0].0;
        for &(offset, r) in &raw {
            while slot > offset {
                alpha = step(&alpha, cells, self.transition());
                slot -= 1;
            }
            let kernel = match r {
                Raw::Target => self.target_kernel(),
                Raw::Emission(l) => self.emission(l),
            };
            let k = arity(r);
            let mut next = vec![0.0; cells * k * n];
            for o in 0..cells {
                for x in 0..k {
                    let dst = (o * k + x) * n;
                    for s in 0..n {
                        next[dst + s] = alpha[o * n + s] * kernel[s][x];
                    }
                }
            }
            alpha = next;
            cells *= k;
        }
        let marginal: Vec<f64> = alpha.chunks(n).map(|c| c.iter().sum()).collect();

        // Map raw cells to the requested variables.
        let variables: Vec<Variable> = requests
            .iter()
            .map(|r| {
                let space = match r.series {
                    Series::Target => self.target_space().clone(),
                    Series::Feature(l) => self.feature_space(l).clone(),
                };
                Variable::new(r.name(), space)
            })
            .collect();
        let out_shape: Vec<usize> = variables.iter().map(|v| v.space.len()).collect();
        let out_strides = strides(&out_shape);
        let mut contrib = vec![0usize; raw.len()];
        for (v, r) in requests.iter().enumerate() {
            match r.series {
                Series::Target => {
                    let p = raw.iter().position(|&x| x == (r.lag, Raw::Target)).unwrap();
                    contrib[p] += out_strides[v];
                }
                Series::Feature(l) => {
                    let k = self.symbol_labels(l).len();
                    for j in 0..b {
                        let p = raw
                            .iter()
                            .position(|&x| x == (r.lag + delay + j, Raw::Emission(l)))
                            .unwrap();
                        contrib[p] += k.pow((b - 1 - j) as u32) * out_strides[v];
                    }
                }
            }
        }
        let mut probs = vec![0.0; out_shape.iter().product()];
        for_each_cell(&raw_shape, &contrib, |flat, off| {
            probs[off] += marginal[flat]
        });
        let total: f64 = crate::numeric::stable_sum(probs.iter().copied());
        for p in &mut probs {
            *p /= total;
        }
        Ok(WindowLaw {
            requests: requests.to_vec(),
            law: JointPmf::from_parts_unchecked(variables, probs),
            samples: None,
        })
    }
}

fn order(r: Raw) -> usize {
    match r {
        Raw::Target => 0,
        Raw::Emission(l) => l + 1,
    }
}

fn step(alpha: &[f64], cells: usize, t: &[Vec<f64>]) -> Vec<f64> {
    let n = t.len();
    let mut out = vec![0.0; alpha.len()];
    for o in 0..cells {
        let src = &alpha[o * n..(o + 1) * n];
        let dst = &mut out[o * n..(o + 1) * n];
        for (s, &a) in src.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (d, &p) in dst.iter_mut().zip(&t[s]) {
                *d += a * p;
            }
        }
    }
    out
}

impl LawProvider for ProcessModel {
    fn num_sources(&self) -> usize {
        ProcessModel::num_sources(self)
    }

    fn lag_cap(&self) -> usize {
        ProcessModel::lag_cap(self)
    }

    fn window_law(&self, requests: &[LagVar]) -> Result<WindowLaw> {
        self.exact_window_law(requests)
    }

    fn describe(&self) -> String {
        format!(
            "process[states={}, sources={}, window={}, delay={}{}]",
            self.num_states(),
            ProcessModel::num_sources(self),
            self.window(),
            self.delay(),
            self.seed()
                .map(|s| format!(", seed={s}"))
                .unwrap_or_default()
        )
    }
}
