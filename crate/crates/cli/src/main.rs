use std::path::PathBuf;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use rippler_cli::config::{parse_burn_in, Algorithm, RunConfig};
use rippler_cli::diagnose::run_diagnose;
use rippler_cli::infer::{run_infer, InferOptions};
use rippler_cli::simulate::run_simulate;
use rippler_core::ModelParams;

#[derive(Parser)]
#[command(name = "rippler", version, about = "Bayesian inference for household colonisation models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a latent epidemic and test results.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Take households, covariates and tested cells from this directory
        /// instead of drawing a study design.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run MCMC chains on a dataset.
    Infer {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Continue each chain from its last checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Summarise a finished run.
    Diagnose {
        /// Output directory of `infer`.
        #[arg(long)]
        out_dir: PathBuf,
        /// Output directory of `simulate`, for truth comparisons.
        #[arg(long)]
        truth_dir: Option<PathBuf>,
        /// Credible level.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Also render SVG figures.
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    algorithm: Option<Algorithm>,
    /// Outer iterations K.
    #[arg(long)]
    iterations: Option<u64>,
    /// Latent updates per iteration K′.
    #[arg(long)]
    latent_updates: Option<usize>,
    /// Draws moved per Rippler proposal K″.
    #[arg(long)]
    elements: Option<usize>,
    /// Maximum RJ block size.
    #[arg(long)]
    block_size: Option<usize>,
    /// Burn-in as a count or a preset (simulation, real-data, extended).
    #[arg(long)]
    burn_in: Option<String>,
    #[arg(long)]
    thin: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<u64>,
    /// Number of weeks T.
    #[arg(long)]
    n_steps: Option<usize>,
    /// Generating θ for `simulate` as β_G,β_H,δ_A,δ_S.
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.algorithm {
            cfg.algorithm = v;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.latent_updates {
            cfg.latent_updates = v;
        }
        if let Some(v) = self.elements {
            cfg.elements = v;
        }
        if let Some(v) = self.block_size {
            cfg.block_size = v;
        }
        if let Some(v) = &self.burn_in {
            cfg.burn_in = parse_burn_in(v)?;
        }
        if let Some(v) = self.thin {
            cfg.thin = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.chains {
            cfg.chains = v;
        }
        if self.n_steps.is_some() {
            cfg.n_steps = self.n_steps;
        }
        if let Some(v) = &self.theta {
            cfg.theta_true = v
                .as_slice()
                .try_into()
                .map_err(|_| anyhow::anyhow!("--theta takes four comma-separated values, got {}", v.len()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate { run, data_dir, out_dir } => {
            let cfg = run.resolve()?;
            let out = run_simulate(&cfg, data_dir.as_deref(), &out_dir).context("simulate")?;
            println!(
                "simulated {} individuals over {} weeks: {} tests, {} positive",
                out.record.n_individuals, out.record.n_steps, out.record.n_tests, out.record.n_positive
            );
        }
        Command::Infer { run, data_dir, out_dir, resume } => {
            let cfg = run.resolve()?;
            let outcomes =
                run_infer(&cfg, &data_dir, &out_dir, InferOptions { resume, stop_after: None }).context("infer")?;
            for o in outcomes {
                println!(
                    "{}: {} samples, parameter acceptance {:.3}, latent acceptance {:.3}, MSJD {:.1}",
                    o.dir.display(),
                    o.retained,
                    o.param_accepted as f64 / o.retained.max(1) as f64,
                    o.latent.acceptance_rate(),
                    o.msjd.msjd()
                );
            }
        }
        Command::Diagnose { out_dir, truth_dir, level, svg } => {
            let report = run_diagnose(&out_dir, truth_dir.as_deref(), level, svg).context("diagnose")?;
            let flags = report.truth_in_interval();
            for (k, name) in ModelParams::NAMES.iter().enumerate() {
                let p = report.pooled[k];
                let flag = flags.map_or(String::new(), |f| format!(" truth inside: {}", f[k]));
                println!("{name}: median {:.4} ({:.4}, {:.4}){flag}", p.median, p.lower, p.upper);
            }
            if let Some(c) = report.band_coverage {
                println!("colonised-count band covers the truth in {:.1}% of weeks", 100.0 * c);
            }
        }
    }
    Ok(())
}
