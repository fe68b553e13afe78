use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use aof_core::analysis::{
    beta_sweep, decompose, default_path, epsilon_sweep, eta_grid, loss_curve, min_training_loss,
    testing_loss, write_rows_csv, EpsilonHorizon,
};
use aof_core::aoi::{age_process, stochastic_order_multivariate, DeliveryTrace};
use aof_core::divergence::{
    beta_between, epsilon_coefficient_with_grid, DEFAULT_MU_MAX, DEFAULT_TAU_MAX,
};
use aof_core::process::{
    make_hidden_nonmarkov, make_markov_observable, make_markov_reference, sample_trajectory,
    LawProvider, ModelSizes,
};
use aof_core::{AgeDistribution, AgeVector};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::Globals;
use crate::output::Output;
use crate::sources::{read_age_distribution, Source};

/// A subcommand's parameters. After layering and `fill_defaults` the
/// serialized value is the effective configuration echoed into reports.
pub trait Command: Serialize {
    const NAME: &'static str;
    fn fill_defaults(&mut self);
    fn run(&self, g: &Globals, out: &mut Output) -> Result<()>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Hidden chain with noisy emissions; features are not Markov.
    Hidden,
    /// Features reveal the hidden state; Markov at every lag.
    Markov,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ModelKind>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<usize>,
    /// Feature window length b.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<usize>,
    /// Emission noise of the hidden model, in [0, 1].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    /// Trajectory length; 0 writes the model only.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
}

impl Command for GenArgs {
    const NAME: &'static str = "gen";

    fn fill_defaults(&mut self) {
        let d = ModelSizes::default();
        self.kind.get_or_insert(ModelKind::Hidden);
        self.states.get_or_insert(d.states);
        self.sources.get_or_insert(d.sources);
        self.symbols.get_or_insert(d.symbols);
        self.targets.get_or_insert(d.targets);
        self.window.get_or_insert(d.window);
        self.delay.get_or_insert(d.delay);
        self.noise.get_or_insert(0.1);
        self.length.get_or_insert(0);
    }

    fn run(&self, g: &Globals, out: &mut Output) -> Result<()> {
        let sizes = ModelSizes {
            states: self.states.unwrap(),
            sources: self.sources.unwrap(),
            symbols: self.symbols.unwrap(),
            targets: self.targets.unwrap(),
            window: self.window.unwrap(),
            delay: self.delay.unwrap(),
        };
        let mut model = match self.kind.unwrap() {
            ModelKind::Hidden => make_hidden_nonmarkov(g.seed, &sizes, self.noise.unwrap())?,
            ModelKind::Markov => make_markov_observable(g.seed, &sizes)?,
        };
        if let Some(cap) = g.lag_cap {
            model = model.with_lag_cap(cap);
        }
        let mut files = vec!["model.json"];
        let length = self.length.unwrap();
        let trajectory = (length > 0)
            .then(|| sample_trajectory(&model, length, g.seed))
            .transpose()?;
        out.write_raw(
            "model.json",
            serde_json::to_string_pretty(&model)?.as_bytes(),
        )?;
        if let Some(d) = trajectory {
            let mut buf = Vec::new();
            d.write_csv(&mut buf)?;
            out.write_raw("trajectory.csv", &buf)?;
            files.push("trajectory.csv");
        }
        out.json_report("gen.meta.json", &json!({ "files": files }))?;
        Ok(())
    }
}

/// Exactly one of a model or a dataset.
fn load_law(
    model: &Option<PathBuf>,
    data: &Option<PathBuf>,
    quantizer: &Option<PathBuf>,
) -> Result<Source> {
    match (model, data) {
        (Some(m), None) => Source::load(m, quantizer.as_deref()),
        (None, Some(d)) => Source::load(d, quantizer.as_deref()),
        _ => bail!("give exactly one of --model or --data"),
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeCurveArgs {
    /// Model JSON written by `gen`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Dataset CSV with columns t, x_1..x_m, [age_1..age_m,] y.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// JSON map from column name to bin edges, for numeric datasets.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantize: Option<PathBuf>,
    /// Grid of all age vectors with components 0..=max-age.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_age: Option<usize>,
    /// Feature window lengths to sweep (models only), e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<usize>>,
}

impl Command for AgeCurveArgs {
    const NAME: &'static str = "age-curve";

    fn fill_defaults(&mut self) {
        self.max_age.get_or_insert(3);
    }

    fn run(&self, g: &Globals, out: &mut Output) -> Result<()> {
        let loss = g.loss_spec()?;
        let source = load_law(&self.model, &self.data, &self.quantize)?;
        let base = source.provider(g);
        let grid = AgeVector::grid(base.num_sources(), self.max_age.unwrap());
        let mut providers: Vec<(Option<usize>, Arc<dyn LawProvider>)> = Vec::new();
        match (&self.windows, source.model()) {
            (None, _) => providers.push((None, base)),
            (Some(ws), Some(m)) => {
                ensure!(!ws.is_empty(), "windows list is empty");
                for &b in ws {
                    let mut mb = m.with_window(b).with_context(|| format!("window {b}"))?;
                    if let Some(cap) = g.lag_cap {
                        mb = mb.with_lag_cap(cap);
                    }
                    providers.push((Some(b), Arc::new(mb)));
                }
            }
            (Some(_), None) => bail!("windows can only be swept on a model"),
        }
        let mut curves = Vec::new();
        for (b, p) in providers {
            let curve = loss_curve(p.as_ref(), &grid, &loss)?;
            let name = b.map_or_else(
                || "age_curve.csv".to_string(),
                |b| format!("age_curve_b{b}.csv"),
            );
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            out.write_raw(&name, &buf)?;
            curves.push(json!({
                "window": b,
                "file": name,
                "points": curve.grid.len(),
                "non_monotonicity": curve.non_monotonicity,
            }));
        }
        out.json_report("age_curve.json", &json!({ "curves": curves }))?;
        Ok(())
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeArgs {
    /// Model JSON written by `gen`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Dataset CSV with columns t, x_1..x_m, [age_1..age_m,] y.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// JSON map from column name to bin edges, for numeric datasets.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantize: Option<PathBuf>,
    /// Age vector, e.g. 2,1. Defaults to all zeros.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<usize>>,
    /// Zero-based source order of the staircase; both the identity
    /// order and its reverse when omitted.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<usize>>,
}

impl Command for DecomposeArgs {
    const NAME: &'static str = "decompose";

    fn fill_defaults(&mut self) {}

    fn run(&self, g: &Globals, out: &mut Output) -> Result<()> {
        let loss = g.loss_spec()?;
        let p = load_law(&self.model, &self.data, &self.quantize)?.provider(g);
        let m = p.num_sources();
        let delta = AgeVector::new(self.delta.clone().unwrap_or_else(|| vec![0; m]));
        let paths = match &self.path {
            Some(path) => vec![path.clone()],
            None => {
                let first = default_path(m);
                let mut rev = first.clone();
                rev.reverse();
                if rev == first {
                    vec![first]
                } else {
                    vec![first, rev]
                }
            }
        };
        let reports = paths
            .iter()
            .map(|path| decompose(p.as_ref(), &delta, &loss, path))
            .collect::<aof_core::Result<Vec<_>>>()?;
        out.json_report("decompose.json", &reports)?;
        Ok(())
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonArgs {
    /// Model JSON written by `gen`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Dataset CSV with columns t, x_1..x_m, [age_1..age_m,] y.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// JSON map from column name to bin edges, for numeric datasets.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantize: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_max: Option<usize>,
    /// Keep every lag pair in the report.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keep_grid: Option<bool>,
    /// Mix the model toward a Markov reference with weights 2^-1..2^-K
    /// and write (eta, epsilon) pairs.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<usize>,
    /// Markov reference model for the sweep; generated from the seed
    /// when omitted.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
}

impl Command for EpsilonArgs {
    const NAME: &'static str = "epsilon";

    fn fill_defaults(&mut self) {
        self.tau_max.get_or_insert(DEFAULT_TAU_MAX);
        self.mu_max.get_or_insert(DEFAULT_MU_MAX);
        self.keep_grid.get_or_insert(false);
    }

    fn run(&self, g: &Globals, out: &mut Output) -> Result<()> {
        let horizon = EpsilonHorizon {
            tau_max: self.tau_max.unwrap(),
            mu_max: self.mu_max.unwrap(),
        };
        ensure!(horizon.mu_max > 0, "mu_max must be positive");
        let source = load_law(&self.model, &self.data, &self.quantize)?;
        let p = source.provider(g);
        let Some(k) = self.sweep else {
            let loss = self.keep_grid.unwrap().then(|| g.loss_spec()).transpose()?;
            let mut r = epsilon_coefficient_with_grid(
                p.as_ref(),
                horizon.tau_max,
                horizon.mu_max,
                loss.as_ref(),
            )?;
            if !self.keep_grid.unwrap() {
                r.grid.clear();
            }
            out.json_report("epsilon.json", &r)?;
            return Ok(());
        };
        ensure!(k > 0, "sweep needs at least one point");
        let Some(model) = source.model() else {
            bail!("the epsilon sweep needs a model, not a dataset");
        };
        let reference = match &self.reference {
            Some(path) => match Source::load(path, None)? {
                Source::Model(r) => *r,
                Source::Data(_) => bail!("reference must be a model"),
            },
            None => make_markov_reference(g.seed, model)?,
        };
        let reference = match g.lag_cap {
            Some(cap) => reference.with_lag_cap(cap),
            None => reference,
        };
        let rows = epsilon_sweep(
            p,
            Arc::new(reference),
            &eta_grid(k),
            horizon,
            &g.loss_spec()?,
        )?;
        let mut buf = Vec::new();
        write_rows_csv(&rows, &mut buf)?;
        out.csv_report("epsilon_sweep.csv", &buf, json!({ "points": rows.len() }))?;
        Ok(())
    }
}

/// Window-law source given as a single path (model JSON or dataset CSV).
fn load_path(
    path: &Option<PathBuf>,
    what: &str,
    quantizer: Option<&std::path::Path>,
) -> Result<Source> {
    let path = path.as_ref().with_context(|| format!("missing --{what}"))?;
    Source::load(path, quantizer)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaArgs {
    /// Training law source (model JSON or dataset CSV).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    /// Test law source; the training source when omitted.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantize: Option<PathBuf>,
    /// Age vector at which the two window laws are compared.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<usize>>,
}

impl Command for BetaArgs {
    const NAME: &'static str = "beta";

    fn fill_defaults(&mut self) {
        if self.test.is_none() {
            self.test = self.train.clone();
        }
    }

    fn run(&self, g: &Globals, out: &mut Output) -> Result<()> {
        let q = self.quantize.as_deref();
        let train = load_path(&self.train, "train", q)?.provider(g);
        let test = load_path(&self.test, "test", q)?.provider(g);
        let delta = AgeVector::new(
            self.delta
                .clone()
                .unwrap_or_else(|| vec![0; train.num_sources()]),
        );
        let (tr, te) = (
            aof_core::analysis::age_law(train.as_ref(), &delta)?,
            aof_core::analysis::age_law(test.as_ref(), &delta)?,
        );
        let r = beta_between(&tr.law, &te.law)?;
        out.json_report(
            "beta.json",
            &json!({ "delta": delta, "beta": r.beta, "divergence": r.divergence }),
        )?;
        Ok(())
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderCheckArgs {
    /// Age law claimed to be stochastically smaller (CSV age_1..age_m,prob).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<PathBuf>,
}

impl Command for OrderCheckArgs {
    const NAME: &'static str = "order-check";

    fn fill_defaults(&mut self) {}

    fn run(&self, _g: &Globals, out: &mut Output) -> Result<()> {
        let first = read_age_distribution(self.first.as_ref().context("missing --first")?)?;
        let second = read_age_distribution(self.second.as_ref().context("missing --second")?)?;
        let verdict = stochastic_order_multivariate(&first, &second)?;
        out.json_report("order.json", &verdict)?;
        Ok(())
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossLossArgs {
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    /// Test law source; the training source when omitted.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantize: Option<PathBuf>,
    /// Test-time age law (CSV age_1..age_m,prob).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ages: Option<PathBuf>,
    /// Single test-time age vector, instead of --ages.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<usize>>,
    /// Use test laws (1 - eta) train + eta other for eta = 2^-1..2^-K
    /// and write (beta, training, testing, gap) rows.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<usize>,
    /// The `other` law of the sweep; a Markov reference generated from
    /// the seed when omitted.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other: Option<PathBuf>,
}

impl CrossLossArgs {
    fn ages(&self, m: usize) -> Result<AgeDistribution> {
        match (&self.ages, &self.delta) {
            (Some(_), Some(_)) => bail!("give at most one of --ages and --delta"),
            (Some(path), None) => read_age_distribution(path),
            (None, Some(d)) => Ok(AgeDistribution::point_mass(AgeVector::new(d.clone()))),
            (None, None) => Ok(AgeDistribution::point_mass(AgeVector::zeros(m))),
        }
    }
}

impl Command for CrossLossArgs {
    const NAME: &'static str = "cross-loss";

    fn fill_defaults(&mut self) {
        if self.test.is_none() && self.sweep.is_none() {
            self.test = self.train.clone();
        }
    }

    fn run(&self, g: &Globals, out: &mut Output) -> Result<()> {
        let loss = g.loss_spec()?;
        let q = self.quantize.as_deref();
        let train_src = load_path(&self.train, "train", q)?;
        let train = train_src.provider(g);
        let ages = self.ages(train.num_sources())?;

        if let Some(k) = self.sweep {
            ensure!(k > 0, "sweep needs at least one point");
            ensure!(
                self.test.is_none(),
                "--test and --sweep are exclusive; the sweep builds its own test laws"
            );
            let other: Arc<dyn LawProvider> = match (&self.other, train_src.model()) {
                (Some(path), _) => Source::load(path, q)?.provider(g),
                (None, Some(m)) => Arc::new(make_markov_reference(g.seed, m)?),
                (None, None) => bail!("a dataset sweep needs --other"),
            };
            let rows = beta_sweep(train, other, &ages, &eta_grid(k), &loss)?;
            let mut buf = Vec::new();
            write_rows_csv(&rows, &mut buf)?;
            out.csv_report(
                "cross_loss_sweep.csv",
                &buf,
                json!({ "points": rows.len() }),
            )?;
            return Ok(());
        }

        let test = load_path(&self.test, "test", q)?.provider(g);
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (1..=ages.dims()).map(|l| format!("age_{l}")).collect();
        header.extend(["weight", "training", "testing", "gap"].map(String::from));
        w.write_record(&header)?;
        for (a, weight) in ages.iter_positive() {
            let training = min_training_loss(train.as_ref(), a, &loss)?;
            let testing = testing_loss(
                train.as_ref(),
                test.as_ref(),
                &AgeDistribution::point_mass(a.clone()),
                &loss,
            )?;
            let mut rec: Vec<String> = a.components().iter().map(usize::to_string).collect();
            rec.extend([weight, training, testing, testing - training].map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        let buf = w
            .into_inner()
            .map_err(|e| anyhow::anyhow!("{}", e.error()))?;
        let joint_testing = testing_loss(train.as_ref(), test.as_ref(), &ages, &loss)?;
        let joint_training =
            aof_core::analysis::joint_training_loss(train.as_ref(), &ages, &loss, true)?;
        let beta = beta_between(
            &aof_core::analysis::age_augmented_law(train.as_ref(), &ages)?,
            &aof_core::analysis::age_augmented_law(test.as_ref(), &ages)?,
        )?;
        out.csv_report(
            "cross_loss.csv",
            &buf,
            json!({
                "training": joint_training,
                "testing": joint_testing,
                "gap": joint_testing - joint_training,
                "beta": beta.beta,
            }),
        )?;
        Ok(())
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateAoiArgs {
    /// Delivery trace CSV with columns source_id,G,D.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    /// Number of slots, starting at 0.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Drop leading slots where some age is still undefined.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trim_warmup: Option<bool>,
}

impl Command for SimulateAoiArgs {
    const NAME: &'static str = "simulate-aoi";

    fn fill_defaults(&mut self) {
        self.trim_warmup.get_or_insert(false);
    }

    fn run(&self, _g: &Globals, out: &mut Output) -> Result<()> {
        let path = self.trace.as_ref().context("missing --trace")?;
        let horizon = self.horizon.context("missing --horizon")?;
        let trace = DeliveryTrace::read_csv(path)
            .with_context(|| format!("reading trace {}", path.display()))?;
        let mut ages = age_process(&trace, horizon)?;
        if self.trim_warmup.unwrap() {
            ages = ages.trim_warmup();
        }
        let mut buf = Vec::new();
        ages.write_csv(&mut buf)?;
        out.csv_report(
            "ages.csv",
            &buf,
            json!({ "slots": ages.len(), "start": ages.start() }),
        )?;
        Ok(())
    }
}
