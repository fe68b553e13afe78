//! Chi-squared machinery.
//!
//! Neyman's divergence `D(P || Q) = sum (P - Q)^2 / Q` measures both how far
//! a lagged feature process is from being Markov (the epsilon coefficient)
//! and how far a test law is from the training law (beta).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{conditional_entropy_idx, JointPmf, LossSpec, Pmf};
use crate::numeric::stable_sum;
use crate::process::{LagVar, LawProvider};

/// Default lag caps for the epsilon grid.
pub const DEFAULT_TAU_MAX: usize = 8;
pub const DEFAULT_MU_MAX: usize = 8;

const MAX_LISTED_CELLS: usize = 20;

/// Dense probability table with a cell grid that can be compared.
pub trait ProbabilityTable {
    fn cells(&self) -> &[f64];
    fn same_cells(&self, other: &Self) -> bool;
    fn describe_cell(&self, flat: usize) -> String;
}

impl ProbabilityTable for Pmf {
    fn cells(&self) -> &[f64] {
        self.probs()
    }
    fn same_cells(&self, other: &Self) -> bool {
        self.space().labels() == other.space().labels()
    }
    fn describe_cell(&self, flat: usize) -> String {
        self.space().label(flat).to_string()
    }
}

impl ProbabilityTable for JointPmf {
    fn cells(&self) -> &[f64] {
        self.probs()
    }
    fn same_cells(&self, other: &Self) -> bool {
        self.same_grid(other)
    }
    fn describe_cell(&self, flat: usize) -> String {
        self.cell_label(flat)
    }
}

/// Neyman's chi-squared divergence `D(p || q)`.
///
/// The reference `q` must be strictly positive on every cell.
pub fn chi2_divergence<D: ProbabilityTable>(p: &D, q: &D) -> Result<f64> {
    if !p.same_cells(q) {
        return Err(Error::ShapeMismatch(
            "divergence arguments are on different cell grids".into(),
        ));
    }
    let mut terms = Vec::with_capacity(p.cells().len());
    for (i, (&a, &b)) in p.cells().iter().zip(q.cells()).enumerate() {
        if b <= 0.0 {
            return Err(Error::ReferenceNotInterior(q.describe_cell(i)));
        }
        let d = a - b;
        terms.push(d * d / b);
    }
    Ok(stable_sum(terms))
}

/// How [`chi2_conditional_mi`] treats zeros in `P_X`, `P_{Y|X}` and `P_{Z|X}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Positivity {
    /// Any zero is an error listing the offending cells.
    Strict,
    /// Cells where the Markov reference vanishes are skipped. `P` is always
    /// absolutely continuous with respect to `P_{Y|X} P_{Z|X} P_X`, so the
    /// divergence stays finite.
    #[default]
    Support,
}

/// Joint `P(X, Y, Z)` laid out as `[x][y][z]`.
struct TripleTable {
    nx: usize,
    ny: usize,
    nz: usize,
    p: Vec<f64>,
    joint: JointPmf,
    given_len: usize,
    future_len: usize,
}

fn triple(
    joint: &JointPmf,
    target: usize,
    future: &[usize],
    given: &[usize],
) -> Result<TripleTable> {
    if future.contains(&target) || given.contains(&target) {
        return Err(Error::TargetInGiven(joint.variables()[target].name.clone()));
    }
    if let Some(&i) = future.iter().find(|i| given.contains(i)) {
        return Err(Error::OverlappingVariables(
            joint.variables()[i].name.clone(),
        ));
    }
    let mut order = given.to_vec();
    order.push(target);
    order.extend_from_slice(future);
    let m = joint.marginal_by_index(&order);
    let shape = m.shape();
    let nx: usize = shape[..given.len()].iter().product();
    let ny = shape[given.len()];
    let nz: usize = shape[given.len() + 1..].iter().product();
    Ok(TripleTable {
        nx,
        ny,
        nz,
        p: m.probs().to_vec(),
        joint: m,
        given_len: given.len(),
        future_len: future.len(),
    })
}

impl TripleTable {
    fn chi2(&self, positivity: Positivity) -> Result<f64> {
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        let mut pxy = vec![0.0; nx * ny];
        let mut pxz = vec![0.0; nx * nz];
        let mut px = vec![0.0; nx];
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    let v = self.p[(x * ny + y) * nz + z];
                    pxy[x * ny + y] += v;
                    pxz[x * nz + z] += v;
                    px[x] += v;
                }
            }
        }
        if positivity == Positivity::Strict {
            let mut bad = Vec::new();
            for x in 0..nx {
                if px[x] <= 0.0 {
                    bad.push(self.describe_given(x, None, None));
                    continue;
                }
                for y in 0..ny {
                    if pxy[x * ny + y] <= 0.0 {
                        bad.push(self.describe_given(x, Some(y), None));
                    }
                }
                for z in 0..nz {
                    if pxz[x * nz + z] <= 0.0 {
                        bad.push(self.describe_given(x, None, Some(z)));
                    }
                }
            }
            if !bad.is_empty() {
                let extra = bad.len().saturating_sub(MAX_LISTED_CELLS);
                bad.truncate(MAX_LISTED_CELLS);
                if extra > 0 {
                    bad.push(format!("... {extra} more"));
                }
                return Err(Error::PositivityViolated(bad));
            }
        }
        let mut terms = Vec::new();
        for x in 0..nx {
            if px[x] <= 0.0 {
                continue;
            }
            for y in 0..ny {
                let a = pxy[x * ny + y];
                if a <= 0.0 {
                    continue;
                }
                for z in 0..nz {
                    let b = pxz[x * nz + z];
                    if b <= 0.0 {
                        continue;
                    }
                    let q = a * b / px[x];
                    let d = self.p[(x * ny + y) * nz + z] - q;
                    terms.push(d * d / q);
                }
            }
        }
        Ok(stable_sum(terms))
    }

    /// `I_L(Y; Z | X) = H_L(Y | X) - H_L(Y | X, Z)`.
    fn information(&self, loss: &LossSpec) -> Result<f64> {
        let target = self.given_len;
        loss.check_space(&self.joint.variables()[target].space)?;
        let given: Vec<usize> = (0..self.given_len).collect();
        let mut both = given.clone();
        both.extend(target + 1..target + 1 + self.future_len);
        Ok(conditional_entropy_idx(&self.joint, target, &given, loss)
            - conditional_entropy_idx(&self.joint, target, &both, loss))
    }

    fn describe_given(&self, x: usize, y: Option<usize>, z: Option<usize>) -> String {
        let vars = self.joint.variables();
        let given_shape: Vec<usize> = vars[..self.given_len]
            .iter()
            .map(|v| v.space.len())
            .collect();
        let mut idx = vec![0; self.given_len];
        let mut rem = x;
        for k in (0..self.given_len).rev() {
            idx[k] = rem % given_shape[k];
            rem /= given_shape[k];
        }
        let mut s = if self.given_len == 0 {
            "(unconditional)".to_string()
        } else {
            crate::loss::describe_cell(&vars[..self.given_len], &idx)
        };
        if let Some(y) = y {
            s.push_str(&format!(
                " | {}={}",
                vars[self.given_len].name,
                vars[self.given_len].space.label(y)
            ));
        }
        if let Some(z) = z {
            s.push_str(&format!(" | future cell {z}"));
        }
        s
    }
}

/// Chi-squared conditional mutual information
/// `I_chi2(Y; Z | X) = D(P_{Y,X,Z} || P_{Y|X} P_{Z|X} P_X)`.
pub fn chi2_conditional_mi<S: AsRef<str>, T: AsRef<str>>(
    joint: &JointPmf,
    target: &str,
    future: &[S],
    given: &[T],
    positivity: Positivity,
) -> Result<f64> {
    let t = joint.index_of(target)?;
    let f = joint.indices(future)?;
    let g = joint.indices(given)?;
    triple(joint, t, &f, &g)?.chi2(positivity)
}

/// One point of the `(tau, mu)` lag grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub tau: Vec<usize>,
    pub mu: Vec<usize>,
    /// `I_chi2(Y_t; Z | X)` for this lag pair.
    pub chi2: f64,
    /// `I_L(Y_t; Z | X)` when a loss was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub information: Option<f64>,
}

/// Largest chi-squared conditional mutual information over the capped lag
/// grid, reported as its square root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonReport {
    pub epsilon: f64,
    pub tau_max: usize,
    pub mu_max: usize,
    pub argmax_tau: Vec<usize>,
    pub argmax_mu: Vec<usize>,
    /// The grid is finite, so `epsilon` is a lower bound on the uncapped supremum.
    pub horizon_capped: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<GridPoint>,
}

impl EpsilonReport {
    /// Largest `I_L(Y; Z | X)` over the grid, if the grid carried a loss.
    pub fn max_information(&self) -> Option<f64> {
        self.grid
            .iter()
            .filter_map(|g| g.information)
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            })
    }
}

/// All `(tau, mu)` pairs with components in `0..=tau_max` / `0..=mu_max`,
/// `mu != 0`, in lexicographic order.
pub fn lag_grid(sources: usize, tau_max: usize, mu_max: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let taus = cube(sources, tau_max);
    let mus: Vec<Vec<usize>> = cube(sources, mu_max)
        .into_iter()
        .filter(|m| m.iter().any(|&v| v > 0))
        .collect();
    let mut out = Vec::with_capacity(taus.len() * mus.len());
    for t in &taus {
        for m in &mus {
            out.push((t.clone(), m.clone()));
        }
    }
    out
}

fn cube(dim: usize, max: usize) -> Vec<Vec<usize>> {
    let shape = vec![max + 1; dim];
    let n: usize = shape.iter().product();
    let mut out = Vec::with_capacity(n);
    let mut c = vec![0usize; dim];
    for _ in 0..n {
        out.push(c.clone());
        crate::loss::increment(&mut c, &shape);
    }
    out
}

/// Requests for `Y_t`, `X_{t - tau}` and the older copies `X_{t - tau - mu}`
/// of sources with `mu_l > 0`, plus the positions of each group.
pub(crate) fn markov_triple_requests(
    tau: &[usize],
    mu: &[usize],
) -> (Vec<LagVar>, Vec<usize>, Vec<usize>) {
    let mut req = vec![LagVar::target(0)];
    let mut given = Vec::new();
    let mut future = Vec::new();
    for (l, &t) in tau.iter().enumerate() {
        given.push(req.len());
        req.push(LagVar::feature(l, t));
    }
    for (l, (&t, &m)) in tau.iter().zip(mu).enumerate() {
        if m > 0 {
            future.push(req.len());
            req.push(LagVar::feature(l, t + m));
        }
    }
    (req, given, future)
}

/// Evaluates the epsilon grid; `loss` adds `I_L(Y; Z | X)` to every point.
pub fn epsilon_grid(
    provider: &dyn LawProvider,
    tau_max: usize,
    mu_max: usize,
    loss: Option<&LossSpec>,
) -> Result<Vec<GridPoint>> {
    let grid = lag_grid(provider.num_sources(), tau_max, mu_max);
    grid.into_par_iter()
        .map(|(tau, mu)| {
            let (req, given, future) = markov_triple_requests(&tau, &mu);
            let law = provider.window_law(&req)?;
            let t = triple(&law.law, 0, &future, &given)?;
            let chi2 = t.chi2(Positivity::Support)?;
            let information = loss.map(|l| t.information(l)).transpose()?;
            Ok(GridPoint {
                tau,
                mu,
                chi2,
                information,
            })
        })
        .collect()
}

/// Epsilon-Markov coefficient of a law provider over the capped lag grid.
///
/// Ties in the argmax go to the lexicographically smallest `(tau, mu)`.
pub fn epsilon_coefficient(
    provider: &dyn LawProvider,
    tau_max: usize,
    mu_max: usize,
) -> Result<EpsilonReport> {
    let grid = epsilon_grid(provider, tau_max, mu_max, None)?;
    Ok(summarize_grid(grid, tau_max, mu_max, false))
}

/// Like [`epsilon_coefficient`] but keeps the full grid, with `I_L` values
/// when a loss is given.
pub fn epsilon_coefficient_with_grid(
    provider: &dyn LawProvider,
    tau_max: usize,
    mu_max: usize,
    loss: Option<&LossSpec>,
) -> Result<EpsilonReport> {
    let grid = epsilon_grid(provider, tau_max, mu_max, loss)?;
    Ok(summarize_grid(grid, tau_max, mu_max, true))
}

fn summarize_grid(
    grid: Vec<GridPoint>,
    tau_max: usize,
    mu_max: usize,
    keep: bool,
) -> EpsilonReport {
    let mut best: Option<&GridPoint> = None;
    for g in &grid {
        if best.is_none_or(|b| g.chi2 > b.chi2) {
            best = Some(g);
        }
    }
    let (epsilon, argmax_tau, argmax_mu) = match best {
        Some(b) => (b.chi2.max(0.0).sqrt(), b.tau.clone(), b.mu.clone()),
        None => (0.0, Vec::new(), Vec::new()),
    };
    EpsilonReport {
        epsilon,
        tau_max,
        mu_max,
        argmax_tau,
        argmax_mu,
        horizon_capped: true,
        grid: if keep { grid } else { Vec::new() },
    }
}

/// `beta = sqrt(D(test || train))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    pub beta: f64,
    pub divergence: f64,
}

/// Chi-squared distance of a test law from a strictly positive training law.
pub fn beta_between(train: &JointPmf, test: &JointPmf) -> Result<BetaReport> {
    let divergence = chi2_divergence(test, train)?;
    Ok(BetaReport {
        beta: divergence.sqrt(),
        divergence,
    })
}
