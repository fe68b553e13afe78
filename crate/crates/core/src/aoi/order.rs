use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::Pmf;

use super::distribution::{AgeDistribution, AgeVector};

/// Slack on probability comparisons.
pub const ORDER_TOL: f64 = 1e-12;

/// `P(X > x) <= P(Z > x)` at every support point, for pmfs on numeric spaces.
pub fn stochastic_order_univariate(p: &Pmf, q: &Pmf) -> Result<bool> {
    let levels = |d: &Pmf| -> Result<Vec<(f64, f64)>> {
        let lv = d.space().levels().ok_or_else(|| Error::IncompatibleLoss {
            loss: "stochastic order".into(),
            reason: "outcome space has no numeric levels".into(),
        })?;
        Ok(lv.iter().copied().zip(d.probs().iter().copied()).collect())
    };
    let (a, b) = (levels(p)?, levels(q)?);
    let tail = |d: &[(f64, f64)], x: f64| -> f64 {
        d.iter().filter(|(v, _)| *v > x).map(|(_, p)| p).sum()
    };
    Ok(a.iter()
        .chain(&b)
        .all(|&(x, _)| tail(&a, x) <= tail(&b, x) + ORDER_TOL))
}

/// Union of the orthants `{x : x_l >= g_l for every constrained l}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpperSet {
    /// One lower corner per orthant; `None` leaves a coordinate free.
    pub generators: Vec<Vec<Option<usize>>>,
}

impl UpperSet {
    pub fn contains(&self, x: &AgeVector) -> bool {
        self.generators.iter().any(|g| {
            g.iter()
                .zip(x.components())
                .all(|(lo, v)| lo.is_none_or(|lo| *v >= lo))
        })
    }

    pub fn mass(&self, d: &AgeDistribution) -> f64 {
        d.support()
            .iter()
            .zip(d.probs())
            .filter(|(v, _)| self.contains(v))
            .fold(0.0, |acc, (_, p)| acc + p)
    }
}

impl std::fmt::Display for UpperSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .generators
            .iter()
            .map(|g| {
                let c: Vec<String> = g
                    .iter()
                    .enumerate()
                    .filter_map(|(l, lo)| lo.map(|lo| format!("x{} >= {lo}", l + 1)))
                    .collect();
                if c.is_empty() {
                    "everything".to_string()
                } else {
                    c.join(" and ")
                }
            })
            .collect();
        write!(f, "{{{}}}", parts.join(" or "))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderVerdict {
    /// Whether the first distribution is stochastically smaller.
    pub holds: bool,
    /// Mass moved by the best monotone coupling.
    pub coupled_mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

/// Upper set with more mass under the first law than under the second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub set: UpperSet,
    pub description: String,
    pub mass_first: f64,
    pub mass_second: f64,
}

/// Decides `p <=_st q` for age-vector laws by checking whether a coupling
/// that only moves mass from `x` to some `z >= x` exists.
pub fn stochastic_order_multivariate(
    p: &AgeDistribution,
    q: &AgeDistribution,
) -> Result<OrderVerdict> {
    if p.dims() != q.dims() {
        return Err(Error::DimensionMismatch {
            expected: p.dims(),
            found: q.dims(),
        });
    }
    let left: Vec<(&AgeVector, f64)> = p.iter_positive().collect();
    let right: Vec<(&AgeVector, f64)> = q.iter_positive().collect();
    let (nl, nr) = (left.len(), right.len());
    let source = nl + nr;
    let sink = source + 1;
    let mut net = FlowNetwork::new(nl + nr + 2);
    for (i, &(_, w)) in left.iter().enumerate() {
        net.add_edge(source, i, w);
    }
    for (j, &(_, w)) in right.iter().enumerate() {
        net.add_edge(nl + j, sink, w);
    }
    for (i, (x, _)) in left.iter().enumerate() {
        for (j, (z, _)) in right.iter().enumerate() {
            if x.dominated_by(z) {
                net.add_edge(i, nl + j, f64::INFINITY);
            }
        }
    }
    let total: f64 = left.iter().map(|(_, w)| w).sum();
    let flow = net.max_flow(source, sink);
    if flow >= total - ORDER_TOL {
        return Ok(OrderVerdict {
            holds: true,
            coupled_mass: flow,
            witness: None,
        });
    }
    // Left nodes still reachable from the source form a Hall violator; its
    // upward closure is a violating upper set.
    let reach = net.reachable(source);
    let corners: Vec<&AgeVector> = (0..nl).filter(|&i| reach[i]).map(|i| left[i].0).collect();
    let mut generators: Vec<Vec<Option<usize>>> = corners
        .iter()
        .map(|c| c.components().iter().map(|&v| Some(v)).collect())
        .collect();
    let points: Vec<&AgeVector> = p.support().iter().chain(q.support()).collect();
    let covered = |g: &[Vec<Option<usize>>]| -> Vec<bool> {
        let set = UpperSet {
            generators: g.to_vec(),
        };
        points.iter().map(|v| set.contains(v)).collect()
    };
    let reference = covered(&generators);
    for gi in 0..generators.len() {
        for l in 0..p.dims() {
            let saved = generators[gi][l].take();
            if covered(&generators) != reference {
                generators[gi][l] = saved;
            }
        }
    }
    // drop orthants contained in another
    let mut kept: Vec<Vec<Option<usize>>> = Vec::new();
    for g in &generators {
        let inside = |h: &Vec<Option<usize>>| {
            h.iter().zip(g).all(|(a, b)| match (a, b) {
                (None, _) => true,
                (Some(_), None) => false,
                (Some(a), Some(b)) => a <= b,
            })
        };
        if !kept.iter().any(inside) {
            kept.retain(|h| {
                !h.iter().zip(g).all(|(a, b)| match (b, a) {
                    (None, _) => true,
                    (Some(_), None) => false,
                    (Some(b), Some(a)) => b <= a,
                })
            });
            kept.push(g.clone());
        }
    }
    let set = UpperSet { generators: kept };
    Ok(OrderVerdict {
        holds: false,
        coupled_mass: flow,
        witness: Some(Witness {
            description: set.to_string(),
            mass_first: set.mass(p),
            mass_second: set.mass(q),
            set,
        }),
    })
}

struct Edge {
    to: usize,
    cap: f64,
}

/// Edmonds-Karp on a small dense graph.
struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(n: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0 });
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        loop {
            let mut prev: Vec<Option<usize>> = vec![None; self.adj.len()];
            let mut queue = VecDeque::from([s]);
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.edges[e].to;
                    if !seen[v] && self.edges[e].cap > 0.0 {
                        seen[v] = true;
                        prev[v] = Some(e);
                        queue.push_back(v);
                    }
                }
            }
            if !seen[t] {
                return flow;
            }
            let mut push = f64::INFINITY;
            let mut v = t;
            while let Some(e) = prev[v] {
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while let Some(e) = prev[v] {
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                v = self.edges[e ^ 1].to;
            }
            flow += push;
        }
    }

    fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &e in &self.adj[u] {
                let v = self.edges[e].to;
                if !seen[v] && self.edges[e].cap > ORDER_TOL {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::OutcomeSpace;

    fn pmf(levels: &[f64], p: &[f64]) -> Pmf {
        Pmf::new(OutcomeSpace::numeric(levels.to_vec()).unwrap(), p.to_vec()).unwrap()
    }

    fn point(v: &[usize]) -> AgeDistribution {
        AgeDistribution::point_mass(AgeVector::new(v.to_vec()))
    }

    #[test]
    fn univariate_examples() {
        assert!(stochastic_order_univariate(&pmf(&[1.0], &[1.0]), &pmf(&[2.0], &[1.0])).unwrap());
        assert!(stochastic_order_univariate(
            &pmf(&[0.0, 1.0], &[0.5, 0.5]),
            &pmf(&[1.0, 2.0], &[0.5, 0.5])
        )
        .unwrap());
        assert!(
            !stochastic_order_univariate(&pmf(&[0.0, 3.0], &[0.5, 0.5]), &pmf(&[2.0], &[1.0]))
                .unwrap()
        );
    }

    #[test]
    fn componentwise_dominance_holds() {
        let v = stochastic_order_multivariate(&point(&[1, 1]), &point(&[2, 3])).unwrap();
        assert!(v.holds && v.witness.is_none());
    }

    #[test]
    fn crossing_points_give_coordinate_witness() {
        let v = stochastic_order_multivariate(&point(&[1, 3]), &point(&[2, 2])).unwrap();
        assert!(!v.holds);
        let w = v.witness.unwrap();
        assert_eq!(w.set.generators, vec![vec![None, Some(3)]]);
        assert_eq!(w.description, "{x2 >= 3}");
        assert_eq!((w.mass_first, w.mass_second), (1.0, 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(stochastic_order_multivariate(&point(&[1]), &point(&[1, 2])).is_err());
    }
}
