//! Priors and the adaptive random-walk Metropolis step for θ.
//!
//! The proposal is a two-component mixture: with probability 1 − ε a
//! Normal(θ, κ²Σ) step, otherwise a Normal(θ, Σ⁽⁰⁾) escape step. Both are
//! symmetric, so acceptance uses the posterior ratio alone.
//!
//! Adaptation after iteration k (unless frozen):
//!
//! * ln κ += k^(−scale_decay) · (α − target), using the acceptance
//!   probability α of main-component proposals only;
//! * with weight w = (k + 1)^(−cov_decay) and d = θ − m:
//!   m += w d and C = (1 − w)(C + w d dᵀ), starting from m = θ⁽⁰⁾, C = Σ⁽⁰⁾;
//! * Σ = C once k ≥ shaping_start, Σ⁽⁰⁾ before.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::model::{transmission_log_density, ColonisationMatrix, Context, ModelParams};

/// Exponential rates for β_G, β_H and Laplace rates for δ_A, δ_S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    pub mu_g: f64,
    pub mu_h: f64,
    pub mu_a: f64,
    pub mu_s: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self { mu_g: 0.001, mu_h: 0.001, mu_a: 0.001, mu_s: 0.001 }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        if [self.mu_g, self.mu_h, self.mu_a, self.mu_s].iter().all(|&m| m > 0.0 && m.is_finite()) {
            Ok(())
        } else {
            Err(ModelError::InvalidInput("prior rates must be positive".into()))
        }
    }
}

pub fn log_prior(theta: &ModelParams, priors: &PriorSpec) -> f64 {
    if !theta.in_support() {
        return f64::NEG_INFINITY;
    }
    let exponential = |mu: f64, v: f64| mu.ln() - mu * v;
    let laplace = |mu: f64, v: f64| (mu / 2.0).ln() - mu * v.abs();
    exponential(priors.mu_g, theta.beta_g)
        + exponential(priors.mu_h, theta.beta_h)
        + laplace(priors.mu_a, theta.delta_a)
        + laplace(priors.mu_s, theta.delta_s)
}

/// log π(X|θ) + log π(θ). The observation term does not depend on θ and is
/// left out.
pub fn param_log_posterior(theta: &ModelParams, x: &ColonisationMatrix, priors: &PriorSpec, ctx: &Context<'_>) -> f64 {
    let prior = log_prior(theta, priors);
    if prior == f64::NEG_INFINITY {
        return prior;
    }
    prior + transmission_log_density(x, theta, ctx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptConfig {
    pub escape_prob: f64,
    pub initial_scale: f64,
    /// Standard deviations of the diagonal Σ⁽⁰⁾.
    pub initial_sd: [f64; 4],
    pub target_accept: f64,
    pub scale_decay: f64,
    pub cov_decay: f64,
    pub shaping_start: u64,
    /// Stop adapting after this many iterations.
    pub freeze_after: Option<u64>,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            escape_prob: 0.05,
            initial_scale: 1.19,
            initial_sd: [0.02, 0.2, 0.005, 0.05],
            target_accept: 0.234,
            scale_decay: 0.6,
            cov_decay: 0.7,
            shaping_start: 500,
            freeze_after: None,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidInput(m.to_string()));
        if !(self.escape_prob > 0.0 && self.escape_prob < 1.0) {
            return bad("escape probability must lie in (0, 1)");
        }
        if !(self.initial_scale > 0.0) {
            return bad("initial scale must be positive");
        }
        if self.initial_sd.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("initial standard deviations must be finite and non-negative");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target acceptance must lie in (0, 1)");
        }
        if !(self.scale_decay > 0.0 && self.scale_decay <= 1.0 && self.cov_decay > 0.0 && self.cov_decay <= 1.0) {
            return bad("decay exponents must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Mutable adaptation state, stored as plain arrays so it serialises directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptState {
    pub log_kappa: f64,
    pub sigma0: [[f64; 4]; 4],
    pub cov: [[f64; 4]; 4],
    pub mean: [f64; 4],
    pub n_steps: u64,
    pub n_accepted: u64,
}

fn to_matrix(a: &[[f64; 4]; 4]) -> Matrix4<f64> {
    Matrix4::from_fn(|r, c| a[r][c])
}

fn from_matrix(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    let mut a = [[0.0; 4]; 4];
    for (r, row) in a.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = m[(r, c)];
        }
    }
    a
}

/// A square root L with L Lᵀ = S; Cholesky when possible, eigen otherwise.
fn matrix_sqrt(s: &Matrix4<f64>) -> Matrix4<f64> {
    if let Some(ch) = s.cholesky() {
        return ch.l();
    }
    let eig = SymmetricEigen::new(*s);
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * Matrix4::from_diagonal(&root)
}

impl AdaptState {
    pub fn new(cfg: &AdaptConfig, theta0: &ModelParams) -> Result<Self> {
        cfg.validate()?;
        let mut sigma0 = [[0.0; 4]; 4];
        for (i, sd) in cfg.initial_sd.iter().enumerate() {
            sigma0[i][i] = sd * sd;
        }
        Ok(Self {
            log_kappa: cfg.initial_scale.ln(),
            sigma0,
            cov: sigma0,
            mean: theta0.to_array(),
            n_steps: 0,
            n_accepted: 0,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.log_kappa.exp()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.n_steps == 0 {
            0.0
        } else {
            self.n_accepted as f64 / self.n_steps as f64
        }
    }

    /// Proposal covariance of the main component, before scaling by κ².
    pub fn proposal_cov(&self, cfg: &AdaptConfig) -> [[f64; 4]; 4] {
        if self.n_steps >= cfg.shaping_start {
            self.cov
        } else {
            self.sigma0
        }
    }

    fn adapting(&self, cfg: &AdaptConfig) -> bool {
        cfg.freeze_after.is_none_or(|k| self.n_steps <= k)
    }

    /// Robbins-Monro step on ln κ after a main-component proposal.
    pub fn update_scale(&mut self, cfg: &AdaptConfig, accept_prob: f64) {
        let k = self.n_steps.max(1) as f64;
        let alpha = if accept_prob.is_nan() { 0.0 } else { accept_prob.clamp(0.0, 1.0) };
        self.log_kappa += k.powf(-cfg.scale_decay) * (alpha - cfg.target_accept);
    }

    /// Recursive weighted mean and covariance update.
    pub fn update_covariance(&mut self, cfg: &AdaptConfig, theta: &ModelParams) {
        let w = (self.n_steps as f64 + 1.0).powf(-cfg.cov_decay);
        let d = Vector4::from(theta.to_array()) - Vector4::from(self.mean);
        let mean = Vector4::from(self.mean) + d * w;
        let mut cov = (to_matrix(&self.cov) + d * d.transpose() * w) * (1.0 - w);
        cov = (cov + cov.transpose()) * 0.5;
        self.mean = mean.into();
        self.cov = from_matrix(&cov);
    }
}

/// Result of one parameter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamStep {
    pub theta: ModelParams,
    pub accepted: bool,
    /// log π(X|θ) + log π(θ) at the returned θ.
    pub target: f64,
    pub escape: bool,
}

/// One adaptive random-walk Metropolis step. `current_target` is
/// [`param_log_posterior`] at `theta`.
#[allow(clippy::too_many_arguments)]
pub fn rwm_step<R: Rng + ?Sized>(
    theta: &ModelParams,
    x: &ColonisationMatrix,
    current_target: f64,
    adapt: &mut AdaptState,
    cfg: &AdaptConfig,
    priors: &PriorSpec,
    ctx: &Context<'_>,
    rng: &mut R,
) -> ParamStep {
    let escape = rng.random::<f64>() < cfg.escape_prob;
    let root = if escape {
        matrix_sqrt(&to_matrix(&adapt.sigma0))
    } else {
        matrix_sqrt(&to_matrix(&adapt.proposal_cov(cfg))) * adapt.kappa()
    };
    let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    let step = root * z;
    let current = Vector4::from(theta.to_array());
    let proposal = ModelParams::from_array((current + step).into());

    let target = param_log_posterior(&proposal, x, priors, ctx);
    let log_ratio = target - current_target;
    let accepted = rng.random::<f64>().ln() < log_ratio;

    adapt.n_steps += 1;
    if accepted {
        adapt.n_accepted += 1;
    }
    let new_theta = if accepted { proposal } else { *theta };
    if adapt.adapting(cfg) {
        if !escape {
            adapt.update_scale(cfg, log_ratio.exp().min(1.0));
        }
        adapt.update_covariance(cfg, &new_theta);
    }
    ParamStep {
        theta: new_theta,
        accepted,
        target: if accepted { target } else { current_target },
        escape,
    }
}
