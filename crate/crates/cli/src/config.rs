//! Run configuration: a TOML file with every key optional, overridden by
//! command-line flags.

use std::path::Path;
use std::str::FromStr;

use rippler_core::{AdaptConfig, FixedModel, ModelParams, PriorSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Rippler,
    Rj,
    Iffbs,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rippler => "rippler",
            Algorithm::Rj => "rj",
            Algorithm::Iffbs => "iffbs",
        }
    }
}

impl FromStr for Algorithm {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rippler" => Ok(Algorithm::Rippler),
            "rj" => Ok(Algorithm::Rj),
            "iffbs" => Ok(Algorithm::Iffbs),
            other => Err(CliError::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Named burn-in lengths used by the different kinds of study.
pub const BURN_IN_PRESETS: [(&str, u64); 3] = [("simulation", 5000), ("real-data", 10000), ("extended", 20000)];

/// Parses a burn-in given either as a count or as a preset name.
pub fn parse_burn_in(s: &str) -> CliResult<u64> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    BURN_IN_PRESETS
        .iter()
        .find(|(name, _)| *name == s)
        .map(|&(_, n)| n)
        .ok_or_else(|| {
            let names: Vec<&str> = BURN_IN_PRESETS.iter().map(|p| p.0).collect();
            CliError::Config(format!("burn-in {s:?} is neither a count nor one of {names:?}"))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// K, outer iterations.
    pub iterations: u64,
    /// K′, latent updates per iteration.
    pub latent_updates: usize,
    /// K″, draws moved per Rippler proposal.
    pub elements: usize,
    /// Maximum RJ block size m.
    pub block_size: usize,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub chains: u64,
    /// Number of weeks T; taken from the largest test week when absent.
    pub n_steps: Option<usize>,
    /// Credible-interval level used by `diagnose`.
    pub level: f64,
    /// Iterations between checkpoints.
    pub checkpoint_every: u64,
    /// θ⁽⁰⁾ as (β_G, β_H, δ_A, δ_S).
    pub theta0: [f64; 4],
    /// Generating θ for `simulate`.
    pub theta_true: [f64; 4],
    pub fixed: FixedModel,
    pub priors: PriorSpec,
    pub adapt: AdaptConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Rippler,
            iterations: 100_000,
            latent_updates: 400,
            elements: 1,
            block_size: 4,
            burn_in: 5000,
            thin: 1,
            seed: 1,
            chains: 1,
            n_steps: None,
            level: 0.95,
            checkpoint_every: 1000,
            theta0: [0.5, 0.5, 0.0, 0.0],
            theta_true: [0.1, 1.5, 0.0, 0.0],
            fixed: FixedModel::default(),
            priors: PriorSpec::default(),
            adapt: AdaptConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn theta0(&self) -> ModelParams {
        ModelParams::from_array(self.theta0)
    }

    pub fn theta_true(&self) -> ModelParams {
        ModelParams::from_array(self.theta_true)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if self.burn_in >= self.iterations {
            return bad(format!("burn-in ({}) must be smaller than iterations ({})", self.burn_in, self.iterations));
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.latent_updates == 0 {
            return bad("latent updates per iteration must be positive".into());
        }
        if self.elements == 0 {
            return bad("elements per proposal must be positive".into());
        }
        if self.block_size == 0 {
            return bad("block size must be positive".into());
        }
        if self.chains == 0 {
            return bad("at least one chain is required".into());
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint interval must be positive".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("credible level must lie in (0, 1), got {}", self.level));
        }
        if self.n_steps == Some(0) {
            return bad("n_steps must be positive".into());
        }
        if !self.theta0().in_support() {
            return bad("theta0 lies outside the prior support".into());
        }
        if !self.theta_true().in_support() {
            return bad("theta_true lies outside the prior support".into());
        }
        self.fixed.validate()?;
        self.priors.validate()?;
        self.adapt.validate()?;
        Ok(())
    }

    /// Iterations whose samples are written: the first after burn-in and
    /// every `thin`-th one from there.
    pub fn retains(&self, iteration: u64) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in - 1).is_multiple_of(self.thin)
    }
}
