use serde::{Deserialize, Serialize};

use super::space::OutcomeSpace;
use crate::error::{Error, Result};
use crate::numeric::stable_sum;

/// A loss function `L(y, a)` together with its action space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// `L(y, q) = -ln q(y)`; actions are pmfs over the outcome space.
    Logarithmic,
    /// `L(y, a) = (y - a)^2`; actions are reals, outcomes need numeric levels.
    Quadratic,
    /// `L(y, a) = 1{y != a}`; actions are outcome labels.
    ZeroOne,
    /// Explicit finite action list with a loss table.
    Table(LossTable),
}

/// Finite loss table: `loss[y][a]` for outcome position `y` and action `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct LossTable {
    actions: Vec<String>,
    loss: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    actions: Vec<String>,
    loss: Vec<Vec<f64>>,
}

impl TryFrom<TableRepr> for LossTable {
    type Error = Error;
    fn try_from(r: TableRepr) -> Result<Self> {
        LossTable::new(r.actions, r.loss)
    }
}

impl From<LossTable> for TableRepr {
    fn from(t: LossTable) -> Self {
        TableRepr {
            actions: t.actions,
            loss: t.loss,
        }
    }
}

impl LossTable {
    pub fn new(actions: Vec<String>, loss: Vec<Vec<f64>>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidLossTable("empty action list".into()));
        }
        if loss.is_empty() {
            return Err(Error::InvalidLossTable("no outcome rows".into()));
        }
        for (y, row) in loss.iter().enumerate() {
            if row.len() != actions.len() {
                return Err(Error::InvalidLossTable(format!(
                    "row {y} has {} entries for {} actions",
                    row.len(),
                    actions.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidLossTable(format!(
                    "non-finite loss {v} in row {y}"
                )));
            }
        }
        Ok(Self { actions, loss })
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn num_outcomes(&self) -> usize {
        self.loss.len()
    }

    pub fn loss(&self, y: usize, a: usize) -> f64 {
        self.loss[y][a]
    }
}

/// An element of a loss's action space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// A pmf, indexed like the outcome space (logarithmic loss).
    Distribution(Vec<f64>),
    /// A real prediction (quadratic loss).
    Point(f64),
    /// An outcome position (zero-one loss).
    Label(usize),
    /// A position in a [`LossTable`]'s action list.
    Choice(usize),
}

/// Minimizing action and its expected loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesResult {
    pub action: Action,
    pub value: f64,
}

impl LossSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Logarithmic => "log",
            LossSpec::Quadratic => "quad",
            LossSpec::ZeroOne => "zero-one",
            LossSpec::Table(_) => "table",
        }
    }

    /// Whether `H_L` is a smooth function of the pmf (log and quadratic).
    pub fn is_smooth(&self) -> bool {
        matches!(self, LossSpec::Logarithmic | LossSpec::Quadratic)
    }

    pub fn check_space(&self, space: &OutcomeSpace) -> Result<()> {
        match self {
            LossSpec::Quadratic if !space.is_numeric() => Err(Error::IncompatibleLoss {
                loss: self.name().into(),
                reason: "quadratic loss needs numeric outcome levels".into(),
            }),
            LossSpec::Table(t) if t.num_outcomes() != space.len() => Err(Error::IncompatibleLoss {
                loss: self.name().into(),
                reason: format!(
                    "table has {} outcome rows, space has {} labels",
                    t.num_outcomes(),
                    space.len()
                ),
            }),
            _ => Ok(()),
        }
    }

    /// Bayes action for a normalized probability vector. The space must have
    /// passed [`LossSpec::check_space`].
    pub(crate) fn bayes(&self, p: &[f64], space: &OutcomeSpace) -> BayesResult {
        match self {
            LossSpec::Logarithmic => BayesResult {
                action: Action::Distribution(p.to_vec()),
                value: shannon(p),
            },
            LossSpec::Quadratic => {
                let levels = space.levels().expect("checked numeric space");
                let mean = stable_sum(p.iter().zip(levels).map(|(p, y)| p * y));
                let var = stable_sum(
                    p.iter()
                        .zip(levels)
                        .map(|(p, y)| p * (y - mean) * (y - mean)),
                );
                BayesResult {
                    action: Action::Point(mean),
                    value: var,
                }
            }
            LossSpec::ZeroOne => {
                let i = first_argmax(p);
                BayesResult {
                    action: Action::Label(i),
                    value: 1.0 - p[i],
                }
            }
            LossSpec::Table(t) => {
                let mut best = 0usize;
                let mut best_val = f64::INFINITY;
                for a in 0..t.actions.len() {
                    let v = stable_sum(p.iter().enumerate().map(|(y, p)| p * t.loss[y][a]));
                    if v < best_val {
                        best_val = v;
                        best = a;
                    }
                }
                BayesResult {
                    action: Action::Choice(best),
                    value: best_val,
                }
            }
        }
    }

    /// Value of the Bayes action only; avoids allocating the action.
    pub(crate) fn bayes_value(&self, p: &[f64], space: &OutcomeSpace) -> f64 {
        match self {
            LossSpec::Logarithmic => shannon(p),
            LossSpec::ZeroOne => 1.0 - p[first_argmax(p)],
            _ => self.bayes(p, space).value,
        }
    }

    /// `E_{Y~p}[L(Y, action)]`.
    pub(crate) fn expected_loss(
        &self,
        p: &[f64],
        action: &Action,
        space: &OutcomeSpace,
    ) -> Result<f64> {
        match (self, action) {
            (LossSpec::Logarithmic, Action::Distribution(q)) => {
                if q.len() != p.len() {
                    return Err(Error::ShapeMismatch("action pmf length".into()));
                }
                let mut terms = Vec::with_capacity(p.len());
                for (y, (&py, &qy)) in p.iter().zip(q).enumerate() {
                    if py > 0.0 {
                        if qy <= 0.0 {
                            return Err(Error::UnboundedCrossEntropy(space.label(y).to_string()));
                        }
                        terms.push(-py * qy.ln());
                    }
                }
                Ok(stable_sum(terms))
            }
            (LossSpec::Quadratic, Action::Point(a)) => {
                let levels = space.levels().ok_or_else(|| Error::IncompatibleLoss {
                    loss: "quad".into(),
                    reason: "quadratic loss needs numeric outcome levels".into(),
                })?;
                Ok(stable_sum(
                    p.iter().zip(levels).map(|(p, y)| p * (y - a) * (y - a)),
                ))
            }
            (LossSpec::ZeroOne, Action::Label(i)) if *i < p.len() => Ok(1.0 - p[*i]),
            (LossSpec::Table(t), Action::Choice(a)) if *a < t.actions.len() => Ok(stable_sum(
                p.iter().enumerate().map(|(y, p)| p * t.loss[y][*a]),
            )),
            _ => Err(Error::IncompatibleLoss {
                loss: self.name().into(),
                reason: format!("action {action:?} is not in the action space"),
            }),
        }
    }
}

impl std::str::FromStr for LossSpec {
    type Err = Error;

    /// Parses `log`, `quad`, `zero-one`. Tables are loaded from files by the caller.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" | "logarithmic" => Ok(LossSpec::Logarithmic),
            "quad" | "quadratic" => Ok(LossSpec::Quadratic),
            "zero-one" | "zero_one" | "01" => Ok(LossSpec::ZeroOne),
            other => Err(Error::InvalidParameter {
                name: "loss".into(),
                reason: format!("unknown loss kind {other:?}"),
            }),
        }
    }
}

/// Shannon entropy in nats.
pub(crate) fn shannon(p: &[f64]) -> f64 {
    stable_sum(p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()))
}

fn first_argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}
