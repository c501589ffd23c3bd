//! Metropolis-within-Gibbs driver shared by all latent updates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::model::{
    observation_log_density, simulate, transmission_log_density, validate_reachable,
    ColonisationMatrix, Context, ModelParams, ObservationMatrix,
};
use crate::params::{log_prior, rwm_step, AdaptConfig, AdaptState, PriorSpec};
use crate::rng::{ChainRng, RngPosition};

/// A latent-state update that can be swept K′ times per outer iteration.
pub trait LatentUpdater {
    fn name(&self) -> &'static str;

    /// Rebuilds any θ- or X-dependent caches. Called after every parameter
    /// step and whenever X is modified outside the updater.
    fn prepare(&mut self, theta: &ModelParams, x: &ColonisationMatrix) -> Result<()>;

    fn sweep<R: Rng + ?Sized>(
        &mut self,
        x: &mut ColonisationMatrix,
        n_updates: usize,
        rng: &mut R,
        stats: &mut LatentStats,
    ) -> Result<()>;
}

/// Latent-step acceptance bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatentStats {
    pub proposed: u64,
    pub accepted: u64,
    /// Proposals rejected because no valid move existed.
    pub infeasible: u64,
    /// Cells changed by accepted updates.
    pub cells_changed: u64,
    /// Proposals and acceptances binned by the earliest perturbed row.
    pub by_origin_proposed: Vec<u64>,
    pub by_origin_accepted: Vec<u64>,
}

impl LatentStats {
    pub fn ensure_rows(&mut self, rows: usize) {
        if self.by_origin_proposed.len() < rows {
            self.by_origin_proposed.resize(rows, 0);
            self.by_origin_accepted.resize(rows, 0);
        }
    }

    #[inline]
    pub fn record(&mut self, accepted: bool, cells_changed: usize, origin_row: Option<usize>) {
        self.proposed += 1;
        self.cells_changed += cells_changed as u64;
        if accepted {
            self.accepted += 1;
        }
        if let Some(t) = origin_row {
            self.ensure_rows(t + 1);
            self.by_origin_proposed[t] += 1;
            if accepted {
                self.by_origin_accepted[t] += 1;
            }
        }
    }

    #[inline]
    pub fn record_infeasible(&mut self) {
        self.proposed += 1;
        self.infeasible += 1;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn merge(&mut self, other: &LatentStats) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
        self.infeasible += other.infeasible;
        self.cells_changed += other.cells_changed;
        self.ensure_rows(other.by_origin_proposed.len());
        for (t, (&p, &a)) in other.by_origin_proposed.iter().zip(&other.by_origin_accepted).enumerate() {
            self.by_origin_proposed[t] += p;
            self.by_origin_accepted[t] += a;
        }
    }
}

/// Output of one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iteration: u64,
    pub theta: ModelParams,
    /// log π(θ) + log π(X|θ) + log π(Y|X) after the latent sweep.
    pub log_posterior: f64,
    pub param_accepted: bool,
    pub latent: LatentStats,
}

/// Serializable chain state, enough to resume bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub iteration: u64,
    pub theta: ModelParams,
    pub x: ColonisationMatrix,
    pub adapt: AdaptState,
    pub rng: RngPosition,
}

pub struct Chain<'a, K: LatentUpdater> {
    ctx: Context<'a>,
    y: &'a ObservationMatrix,
    priors: PriorSpec,
    adapt_cfg: AdaptConfig,
    adapt: AdaptState,
    kernel: K,
    theta: ModelParams,
    x: ColonisationMatrix,
    rng: ChainRng,
    seed: u64,
    iteration: u64,
    latent_updates: usize,
    /// Cached log π(X|θ) + log π(θ) of the current state.
    param_target: f64,
}

impl<'a, K: LatentUpdater> Chain<'a, K> {
    /// Starts a chain at θ⁽⁰⁾ with X⁽⁰⁾ simulated from the model under θ⁽⁰⁾.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ctx: Context<'a>,
        y: &'a ObservationMatrix,
        priors: PriorSpec,
        adapt_cfg: AdaptConfig,
        kernel: K,
        theta0: ModelParams,
        latent_updates: usize,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        let mut rng = crate::rng::stream(seed, stream);
        let x0 = simulate(&theta0, &ctx, y.n_steps(), &mut rng)?;
        if observation_log_density(y, &x0, ctx.fixed) == f64::NEG_INFINITY {
            return Err(ModelError::InvalidInput(
                "initial latent state is incompatible with the test results".into(),
            ));
        }
        let adapt = AdaptState::new(&adapt_cfg, &theta0)?;
        Self::from_parts(ctx, y, priors, adapt_cfg, adapt, kernel, theta0, x0, rng, seed, 0, latent_updates)
    }

    /// Restores a chain from a checkpoint.
    pub fn resume(
        ctx: Context<'a>,
        y: &'a ObservationMatrix,
        priors: PriorSpec,
        adapt_cfg: AdaptConfig,
        kernel: K,
        state: ChainState,
        latent_updates: usize,
    ) -> Result<Self> {
        let rng = state
            .rng
            .restore()
            .ok_or_else(|| ModelError::InvalidInput("corrupt generator position".into()))?;
        Self::from_parts(
            ctx,
            y,
            priors,
            adapt_cfg,
            state.adapt,
            kernel,
            state.theta,
            state.x,
            rng,
            state.rng.seed,
            state.iteration,
            latent_updates,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        ctx: Context<'a>,
        y: &'a ObservationMatrix,
        priors: PriorSpec,
        adapt_cfg: AdaptConfig,
        adapt: AdaptState,
        kernel: K,
        theta: ModelParams,
        x: ColonisationMatrix,
        rng: ChainRng,
        seed: u64,
        iteration: u64,
        latent_updates: usize,
    ) -> Result<Self> {
        if !x.same_shape(y) {
            return Err(ModelError::InvalidInput("latent and observation lattices differ in shape".into()));
        }
        validate_reachable(&x, &theta, &ctx)?;
        priors.validate()?;
        let param_target = transmission_log_density(&x, &theta, &ctx) + log_prior(&theta, &priors);
        Ok(Self {
            ctx,
            y,
            priors,
            adapt_cfg,
            adapt,
            kernel,
            theta,
            x,
            rng,
            seed,
            iteration,
            latent_updates,
            param_target,
        })
    }

    pub fn theta(&self) -> &ModelParams {
        &self.theta
    }

    pub fn latent(&self) -> &ColonisationMatrix {
        &self.x
    }

    pub fn adapt(&self) -> &AdaptState {
        &self.adapt
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    pub fn state(&self) -> ChainState {
        ChainState {
            iteration: self.iteration,
            theta: self.theta,
            x: self.x.clone(),
            adapt: self.adapt.clone(),
            rng: RngPosition::capture(self.seed, &self.rng),
        }
    }

    /// One outer iteration: a parameter step, then K′ latent updates.
    pub fn step(&mut self) -> Result<IterationRecord> {
        self.iteration += 1;
        let out = rwm_step(
            &self.theta,
            &self.x,
            self.param_target,
            &mut self.adapt,
            &self.adapt_cfg,
            &self.priors,
            &self.ctx,
            &mut self.rng,
        );
        self.theta = out.theta;

        let mut latent = LatentStats::default();
        self.kernel.prepare(&self.theta, &self.x)?;
        self.kernel.sweep(&mut self.x, self.latent_updates, &mut self.rng, &mut latent)?;

        self.param_target = transmission_log_density(&self.x, &self.theta, &self.ctx) + log_prior(&self.theta, &self.priors);
        let log_posterior = self.param_target + observation_log_density(self.y, &self.x, self.ctx.fixed);
        Ok(IterationRecord {
            iteration: self.iteration,
            theta: self.theta,
            log_posterior,
            param_accepted: out.accepted,
            latent,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FixedModel, Population, TestResult};
    use crate::rippler::{RipplerConfig, RipplerKernel};

    fn setup() -> (Population, FixedModel, ObservationMatrix) {
        let pop = Population::new(vec![0, 0, 1, 1, 2], vec![[0.0; 2]; 5]).unwrap();
        let mut y = ObservationMatrix::untested(8, 5).unwrap();
        y.set(2, 0, TestResult::Positive);
        y.set(5, 3, TestResult::Negative);
        (pop, FixedModel::default(), y)
    }

    #[test]
    fn resumed_chain_matches_uninterrupted_chain() {
        let (pop, fixed, y) = setup();
        let ctx = Context::new(&pop, &fixed);
        let cfg = RipplerConfig { n_latent_updates: 5, n_elements: 1 };
        let theta0 = ModelParams::new(0.5, 0.5, 0.0, 0.0);
        let make = || RipplerKernel::new(ctx, &y, cfg).unwrap();
        let mut a = Chain::new(ctx, &y, PriorSpec::default(), AdaptConfig::default(), make(), theta0, 5, 3, 0).unwrap();
        let mut b = Chain::new(ctx, &y, PriorSpec::default(), AdaptConfig::default(), make(), theta0, 5, 3, 0).unwrap();
        for _ in 0..20 {
            a.step().unwrap();
            b.step().unwrap();
        }
        let saved = serde_json::to_string(&b.state()).unwrap();
        let restored: ChainState = serde_json::from_str(&saved).unwrap();
        let mut c = Chain::resume(ctx, &y, PriorSpec::default(), AdaptConfig::default(), make(), restored, 5).unwrap();
        for _ in 0..20 {
            let ra = a.step().unwrap();
            let rc = c.step().unwrap();
            assert_eq!(ra, rc);
        }
        assert_eq!(a.latent(), c.latent());
    }

    #[test]
    fn stats_merge_accumulates_bins() {
        let mut a = LatentStats::default();
        a.record(true, 3, Some(2));
        let mut b = LatentStats::default();
        b.record(false, 0, Some(4));
        b.record_infeasible();
        a.merge(&b);
        assert_eq!(a.proposed, 3);
        assert_eq!(a.accepted, 1);
        assert_eq!(a.by_origin_proposed, vec![0, 0, 1, 0, 1]);
        assert_eq!(a.by_origin_accepted, vec![0, 0, 1, 0, 0]);
    }
}
