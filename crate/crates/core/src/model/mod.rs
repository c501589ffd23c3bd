//! The two-state household colonisation model.
//!
//! Lattices are indexed `(t, j)` with `t ∈ 0..=T` (row 0 holds the initial
//! states) and `j ∈ 0..N`. Row-major storage: one row per time step.

mod density;
mod dynamics;
mod lattice;
mod population;
mod pressure;

pub use density::{
    cell_observation_log_factor, observation_log_density, simulate_observations,
    transition_log_prob, transmission_log_density, ObservationLogFactors,
};
pub use dynamics::{proposal_bounds, realise, simulate, validate_reachable};
pub use lattice::{
    ColonisationMatrix, Lattice, NoncentredMatrix, ObservationMatrix, ProposalBounds, TestResult,
};
pub use population::Population;
pub use pressure::{colonisation_pressure, seasonal_modifier, Pressure, RowCounts};

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Transmission parameters θ = (β_G, β_H, δ_A, δ_S).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Global transmission rate (per week).
    pub beta_g: f64,
    /// Within-household transmission relative to global.
    pub beta_h: f64,
    /// Age effect (per year, centred age).
    pub delta_a: f64,
    /// Sex effect (centred 0/1 indicator).
    pub delta_s: f64,
}

impl ModelParams {
    pub const NAMES: [&'static str; 4] = ["beta_g", "beta_h", "delta_a", "delta_s"];

    pub fn new(beta_g: f64, beta_h: f64, delta_a: f64, delta_s: f64) -> Self {
        Self { beta_g, beta_h, delta_a, delta_s }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.beta_g, self.beta_h, self.delta_a, self.delta_s]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Inside the prior support (both rates non-negative, all finite).
    pub fn in_support(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite()) && self.beta_g >= 0.0 && self.beta_h >= 0.0
    }
}

/// Quantities held fixed during inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedModel {
    /// Clearance (de-colonisation) rate γ per week.
    pub gamma: f64,
    /// Probability of being colonised at t = 0.
    pub p0: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Time-step length Δ in weeks.
    pub step_weeks: f64,
    /// Seasonal offset t★ (weeks).
    pub season_offset: f64,
    /// Seasonal period T★ (weeks).
    pub season_period: f64,
}

impl Default for FixedModel {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            p0: 0.3,
            sensitivity: 0.8,
            specificity: 0.99,
            step_weeks: 1.0,
            season_offset: 17.0,
            season_period: 52.0,
        }
    }
}

impl FixedModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidInput(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return bad("p0 must lie in (0, 1)");
        }
        if !(self.sensitivity > 0.0 && self.sensitivity <= 1.0) {
            return bad("sensitivity must lie in (0, 1]");
        }
        if !(self.specificity > 0.0 && self.specificity <= 1.0) {
            return bad("specificity must lie in (0, 1]");
        }
        if !(self.step_weeks > 0.0 && self.step_weeks.is_finite()) {
            return bad("time-step length must be positive");
        }
        if !(self.season_period > 0.0 && self.season_period.is_finite()) {
            return bad("seasonal period must be positive");
        }
        if !self.season_offset.is_finite() {
            return bad("seasonal offset must be finite");
        }
        Ok(())
    }

    /// Probability of clearing colonisation within one step, 1 − e^{−γΔ}.
    pub fn clearance_prob(&self) -> f64 {
        -libm::expm1(-self.gamma * self.step_weeks)
    }
}

/// Population plus fixed model quantities: everything a sampler needs besides
/// θ, the latent lattice and the data.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub population: &'a Population,
    pub fixed: &'a FixedModel,
}

impl<'a> Context<'a> {
    pub fn new(population: &'a Population, fixed: &'a FixedModel) -> Self {
        Self { population, fixed }
    }

    pub fn n_individuals(&self) -> usize {
        self.population.n_individuals()
    }
}
