use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use aof_core::{LossSpec, LossTable};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to built-in defaults.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalArgs {
    /// TOML file with global keys at top level and one table per subcommand.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// log, quad, zero-one or table:<path to JSON loss table>.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<String>,

    /// Output directory.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    /// Additive smoothing applied to empirical window laws.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,

    /// Largest lag, in slots, any window law may request.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lag_cap: Option<usize>,
}

/// Global settings after layering.
#[derive(Clone, Debug, Serialize)]
pub struct Globals {
    pub seed: u64,
    pub loss: String,
    pub out: PathBuf,
    pub lambda: Option<f64>,
    pub lag_cap: Option<usize>,
}

impl Globals {
    pub fn loss_spec(&self) -> Result<LossSpec> {
        parse_loss(&self.loss)
    }
}

pub fn parse_loss(text: &str) -> Result<LossSpec> {
    Ok(match text {
        "log" => LossSpec::Logarithmic,
        "quad" => LossSpec::Quadratic,
        "zero-one" => LossSpec::ZeroOne,
        other => match other.strip_prefix("table:") {
            Some(path) => {
                let raw = std::fs::read_to_string(path)
                    .with_context(|| format!("reading loss table {path}"))?;
                let table: LossTable = serde_json::from_str(&raw)
                    .with_context(|| format!("parsing loss table {path}"))?;
                LossSpec::Table(table)
            }
            None => bail!("unknown loss {other:?}; expected log, quad, zero-one or table:<path>"),
        },
    })
}

/// Raw config file contents, split by scope.
#[derive(Debug, Default)]
pub struct ConfigFile {
    global: Map<String, Value>,
    commands: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let table: toml::Table =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let mut out = Self::default();
        for (k, v) in table {
            let v = serde_json::to_value(v)?;
            if v.is_object() {
                out.commands.insert(k, v);
            } else {
                out.global.insert(k, v);
            }
        }
        Ok(out)
    }

    pub fn globals(&self, flags: &GlobalArgs) -> Result<Globals> {
        let merged: GlobalArgs =
            overlay(Value::Object(self.global.clone()), flags).context("in global settings")?;
        if let Some(l) = merged.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                bail!("invalid lambda {l}: must be a finite nonnegative number");
            }
        }
        if merged.lag_cap == Some(0) {
            bail!("invalid lag_cap 0: must be positive");
        }
        Ok(Globals {
            seed: merged.seed.unwrap_or(0),
            loss: merged.loss.unwrap_or_else(|| "log".into()),
            out: merged.out.unwrap_or_else(|| PathBuf::from(".")),
            lambda: merged.lambda,
            lag_cap: merged.lag_cap,
        })
    }

    /// Command flags layered over the command's table in the file.
    pub fn command<T: Serialize + DeserializeOwned>(&self, name: &str, flags: &T) -> Result<T> {
        let base = self
            .commands
            .get(name)
            .cloned()
            .unwrap_or(Value::Object(Map::new()));
        overlay(base, flags).with_context(|| format!("in [{name}] settings"))
    }
}

fn overlay<T: Serialize + DeserializeOwned>(base: Value, flags: &T) -> Result<T> {
    let mut merged = match base {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    if let Value::Object(top) = serde_json::to_value(flags)? {
        merged.extend(top);
    }
    Ok(serde_json::from_value(Value::Object(merged))?)
}
