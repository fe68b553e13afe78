use serde::{Deserialize, Serialize};

use crate::aoi::AgeVector;
use crate::error::{Error, Result};
use crate::loss::{conditional_entropy_idx, LossSpec};
use crate::numeric::stable_sum;
use crate::process::{LagVar, LawProvider};

use super::training::{check_dims, min_training_loss};

/// Tolerance of the identity `h = f1 - f2`.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    /// `I(Y; X_j@k | X_j@k+1, rest)`: what the fresher copy adds.
    Gain,
    /// `I(Y; X_j@k+1 | X_j@k, rest)`: what the staler copy adds.
    Loss,
}

/// One conditional mutual information summand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub kind: TermKind,
    /// One-based source index.
    pub source: usize,
    pub k: usize,
    /// Lags of all sources while this coordinate steps; its own entry is 0.
    pub context: AgeVector,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub delta: AgeVector,
    pub loss: String,
    /// Zero-based source order of the staircase.
    pub path: Vec<usize>,
    /// Minimum training loss, computed directly.
    pub h: f64,
    /// `H_L(Y | X@0)`.
    pub h_fresh: f64,
    pub f1: f64,
    pub f2: f64,
    /// `h - (f1 - f2)`.
    pub residual: f64,
    pub terms: Vec<Term>,
}

impl DecompositionReport {
    pub fn identity_holds(&self) -> bool {
        self.residual.abs() <= IDENTITY_TOL
    }

    pub fn min_term(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.value)
            .fold(f64::INFINITY, f64::min)
    }
}

/// The identity order `0, 1, ..., m-1`.
pub fn default_path(m: usize) -> Vec<usize> {
    (0..m).collect()
}

fn check_path(path: &[usize], m: usize) -> Result<()> {
    let mut seen = vec![false; m];
    for &j in path {
        if j >= m || seen[j] {
            return Err(Error::InvalidParameter {
                name: "path".into(),
                reason: format!("{path:?} is not an ordering of 0..{m}"),
            });
        }
        seen[j] = true;
    }
    if path.len() != m {
        return Err(Error::InvalidParameter {
            name: "path".into(),
            reason: format!("{path:?} is not an ordering of 0..{m}"),
        });
    }
    Ok(())
}

/// Splits `h(delta)` into `f1 - f2` by a coordinate staircase.
///
/// Lags start at `delta`. Coordinate `path[0]` steps down from `delta` to 0
/// with the others at their `delta` lags, then `path[1]` with `path[0]`
/// already at 0, and so on. Each unit step from lag `k + 1` to `k` changes the
/// loss by `Loss_k - Gain_k` (see [`TermKind`]), so telescoping gives
/// `h = H(Y | X@0) + sum(Gain) - sum(Loss)` with every summand a
/// nonnegative conditional information.
pub fn decompose(
    provider: &dyn LawProvider,
    delta: &AgeVector,
    loss: &LossSpec,
    path: &[usize],
) -> Result<DecompositionReport> {
    check_dims(provider, delta)?;
    let m = delta.dims();
    check_path(path, m)?;
    let h = min_training_loss(provider, delta, loss)?;
    let h_fresh = min_training_loss(provider, &AgeVector::zeros(m), loss)?;

    let mut current = delta.components().to_vec();
    let mut terms = Vec::new();
    for &j in path {
        for k in (0..delta.components()[j]).rev() {
            // Y, X_j@k, X_j@k+1, then the other sources at their current lags
            let mut req = vec![
                LagVar::target(0),
                LagVar::feature(j, k),
                LagVar::feature(j, k + 1),
            ];
            let others: Vec<usize> = (0..m).filter(|&i| i != j).collect();
            req.extend(others.iter().map(|&i| LagVar::feature(i, current[i])));
            let w = provider.window_law(&req)?;
            let rest: Vec<usize> = (3..req.len()).collect();
            let with = |extra: &[usize]| {
                let mut g = extra.to_vec();
                g.extend(&rest);
                conditional_entropy_idx(&w.law, 0, &g, loss)
            };
            let h_new = with(&[1]);
            let h_old = with(&[2]);
            let h_both = with(&[1, 2]);
            let mut context = current.clone();
            context[j] = 0;
            let context = AgeVector::new(context);
            terms.push(Term {
                kind: TermKind::Gain,
                source: j + 1,
                k,
                context: context.clone(),
                value: h_old - h_both,
            });
            terms.push(Term {
                kind: TermKind::Loss,
                source: j + 1,
                k,
                context,
                value: h_new - h_both,
            });
            current[j] = k;
        }
    }
    let gains = stable_sum(
        terms
            .iter()
            .filter(|t| t.kind == TermKind::Gain)
            .map(|t| t.value),
    );
    let losses = stable_sum(
        terms
            .iter()
            .filter(|t| t.kind == TermKind::Loss)
            .map(|t| t.value),
    );
    let f1 = h_fresh + gains;
    let f2 = losses;
    Ok(DecompositionReport {
        delta: delta.clone(),
        loss: loss.name().to_string(),
        path: path.to_vec(),
        h,
        h_fresh,
        f1,
        f2,
        residual: h - (f1 - f2),
        terms,
    })
}
