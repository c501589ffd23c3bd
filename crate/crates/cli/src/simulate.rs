//! `simulate`: draw a latent epidemic and test results from the model.

use std::path::Path;

use rippler_core::model::{simulate, simulate_observations};
use rippler_core::rng;
use rippler_core::synthetic::{simulate_study, STUDY_WEEKS};
use rippler_core::{ColonisationMatrix, Context, ModelParams, ObservationMatrix};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{write_file, Dataset};
use crate::error::{CliError, CliResult};
use crate::formats::encode_lattice;

pub const TRUTH_FILE: &str = "truth.json";
pub const TRUTH_LATENT_FILE: &str = "truth_latent.rle";

/// Stream of the run seed reserved for simulation; chains use 0, 1, ….
pub const SIMULATION_STREAM: u64 = u64::MAX;

/// Generating values stored next to a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub seed: u64,
    pub theta: ModelParams,
    pub fixed: rippler_core::FixedModel,
    pub n_steps: usize,
    pub n_individuals: usize,
    pub n_tests: usize,
    pub n_positive: usize,
}

impl TruthRecord {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(TRUTH_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::corrupt(&path, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub dataset: Dataset,
    pub truth: ColonisationMatrix,
    pub y: ObservationMatrix,
    pub record: TruthRecord,
}

/// Simulates under `theta_true`. With a `design_dir` the households,
/// covariates and tested cells come from its tables (their results are
/// replaced); otherwise a household study design is drawn.
pub fn run_simulate(cfg: &RunConfig, design_dir: Option<&Path>, out_dir: &Path) -> CliResult<SimulateOutcome> {
    cfg.validate()?;
    let theta = cfg.theta_true();
    let mut rng = rng::stream(cfg.seed, SIMULATION_STREAM);
    let (mut dataset, truth, y) = match design_dir {
        Some(dir) => {
            let design = Dataset::load(dir, cfg.n_steps)?;
            let population = design.population()?;
            let ctx = Context::new(&population, &cfg.fixed);
            let truth = simulate(&theta, &ctx, design.n_steps, &mut rng)?;
            let schedule: Vec<(usize, usize)> = design.tests.iter().map(|r| (r.week, r.individual)).collect();
            let y = simulate_observations(&truth, &schedule, &cfg.fixed, &mut rng);
            (design, truth, y)
        }
        None => {
            if cfg.n_steps.is_some_and(|t| t != STUDY_WEEKS) {
                return Err(CliError::Config(format!(
                    "the built-in study design spans {STUDY_WEEKS} weeks; give a design directory for other lengths"
                )));
            }
            let s = simulate_study(&theta, &cfg.fixed, &mut rng)?;
            (Dataset::from_study(&s.study, &s.y), s.truth, s.y)
        }
    };
    dataset.tests = Dataset::from_observations(&y);
    dataset.write(out_dir)?;
    write_file(&out_dir.join(TRUTH_LATENT_FILE), &encode_lattice(&truth))?;
    let record = TruthRecord {
        seed: cfg.seed,
        theta,
        fixed: cfg.fixed,
        n_steps: y.n_steps(),
        n_individuals: y.n_individuals(),
        n_tests: y.n_tested(),
        n_positive: dataset.tests.iter().filter(|r| r.positive).count(),
    };
    let json = serde_json::to_string_pretty(&record).expect("record serialises");
    write_file(&out_dir.join(TRUTH_FILE), &(json + "\n"))?;
    Ok(SimulateOutcome { dataset, truth, y, record })
}
