//! Experiment configuration files and the per-command parameter blocks they
//! share with the command-line flags.

use crate::CliError;
use clap::{Args, ValueEnum};
use condsub::{CtmcSpec, EulerInversion, JumpLaw, SubordinatorSpec, Thresholds};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// A JSON experiment file. Every block is optional; command-line flags
/// override the values found here.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Subcommand this file is meant for; a mismatch is rejected.
    pub module: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub n_paths: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub model: Option<SubordinatorSpec>,
    pub chain: Option<CtmcSpec>,
    pub inversion: Option<EulerInversion>,
    pub thresholds: Option<Thresholds>,
    pub scale: Option<f64>,
    pub simulate: Option<SimulateParams>,
    pub potential: Option<PotentialParams>,
    pub strip: Option<StripParams>,
    pub hit: Option<HitParams>,
    pub lamperti: Option<LampertiParams>,
    pub lastpassage: Option<LastPassageParams>,
    pub ladderbox: Option<LadderBoxParams>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config schema error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if self.n_paths == Some(0) {
            return bad("n_paths must be at least 1".into());
        }
        if let Some(s) = self.scale {
            if !(s > 0.0 && s <= 10.0) {
                return bad(format!("scale must lie in (0, 10], got {s}"));
            }
        }
        if let Some(m) = &self.model {
            m.validate().map_err(|e| CliError::Config(format!("model: {e}")))?;
        }
        if let Some(c) = &self.chain {
            c.validate().map_err(|e| CliError::Config(format!("chain: {e}")))?;
        }
        Ok(())
    }
}

/// Lays the non-null fields of `cli` over the config block.
pub fn overlay<T>(cli: &T, cfg: Option<&T>) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned + Default + Clone,
{
    let to_value = |v: &T| serde_json::to_value(v).map_err(|e| CliError::Config(e.to_string()));
    let mut base = to_value(&cfg.cloned().unwrap_or_default())?;
    if let (Value::Object(base), Value::Object(top)) = (&mut base, to_value(cli)?) {
        base.extend(top.into_iter().filter(|(_, v)| !v.is_null()));
    }
    serde_json::from_value(base).map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Drift,
    Poisson,
    Cpd,
    Stable,
    Gamma,
}

/// Model flags. A `--family` flag replaces the config `model` block.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub jump_rate: Option<f64>,
    /// Rate of the exponential jump law for `--family cpd`.
    #[arg(long)]
    pub jump_exp_rate: Option<f64>,
    #[arg(long)]
    pub gamma_shape: Option<f64>,
    #[arg(long)]
    pub gamma_rate: Option<f64>,
}

impl ModelArgs {
    pub fn resolve(&self, cfg: &ExperimentConfig) -> Result<SubordinatorSpec, CliError> {
        let Some(family) = self.family else {
            return cfg
                .model
                .ok_or_else(|| CliError::Usage("no model: pass --family or a config with a model block".into()));
        };
        let need = |v: Option<f64>, flag: &str| {
            v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for this family")))
        };
        let spec = match family {
            Family::Drift => SubordinatorSpec::drift(need(self.kappa, "kappa")?),
            Family::Poisson => SubordinatorSpec::poisson(need(self.jump_rate, "jump-rate")?),
            Family::Cpd => SubordinatorSpec::compound_poisson_drift(
                need(self.kappa, "kappa")?,
                need(self.jump_rate, "jump-rate")?,
                JumpLaw::Exponential { rate: need(self.jump_exp_rate, "jump-exp-rate")? },
            ),
            Family::Stable => SubordinatorSpec::stable(need(self.alpha, "alpha")?),
            Family::Gamma => {
                SubordinatorSpec::gamma(need(self.gamma_shape, "gamma-shape")?, need(self.gamma_rate, "gamma-rate")?)
            }
        };
        Ok(spec?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    /// Grid step. Without it finite-activity families use exact jump times.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialParams {
    /// Killing rate q.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Number of grid points on [0, x_max].
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StripMethodArg {
    Decomposition,
    HTransform,
    Weight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitMethodArg {
    Exact,
    Weight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StripEmit {
    Paths,
    Histogram,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripParams {
    /// Upper end of the strip.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<StripMethodArg>,
    #[arg(long, value_enum)]
    pub emit: Option<StripEmit>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Horizon of the importance-weighted method.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HitParams {
    /// Level the path is conditioned to hit.
    #[arg(long)]
    pub y: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<HitMethodArg>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LampertiParams {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Lamperti time at which ξ is read off.
    #[arg(long)]
    pub u: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LastPassageEmit {
    G,
    Marginal,
    Identities,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LastPassageParams {
    /// Bundled chain: two_state, birth_death or cyclic_five.
    #[arg(long)]
    pub fixture: Option<String>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, value_enum)]
    pub emit: Option<LastPassageEmit>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Time of the marginal law.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderBoxEmit {
    Density,
    Histogram,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderBoxParams {
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Skeleton step.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum)]
    pub emit: Option<LadderBoxEmit>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long)]
    pub paths: Option<usize>,
}
