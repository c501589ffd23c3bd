//! Chain summaries, mixing metrics and the exact enumeration oracle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::model::{
    observation_log_density, seasonal_modifier, transmission_log_density, ColonisationMatrix,
    Context, ModelParams, ObservationMatrix,
};

/// Largest lattice (in cells) that [`exact_latent_posterior`] will enumerate.
pub const ENUMERATION_LIMIT: usize = 20;

/// Streaming mean squared jump distance between consecutive latent
/// snapshots. Flip counts are kept per row as integers, so the per-time
/// vector and the total are exact functions of the chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MsjdAccumulator {
    previous: Option<ColonisationMatrix>,
    flips_by_row: Vec<u64>,
    jumps: u64,
}

impl MsjdAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: &ColonisationMatrix) {
        match &mut self.previous {
            Some(prev) => {
                assert!(prev.n_steps() == x.n_steps() && prev.n_individuals() == x.n_individuals(), "snapshots differ in shape");
                for t in 0..x.n_rows() {
                    let flips = prev.row(t).iter().zip(x.row(t)).filter(|(a, b)| a != b).count();
                    self.flips_by_row[t] += flips as u64;
                }
                self.jumps += 1;
                prev.clone_from(x);
            }
            None => {
                self.flips_by_row = vec![0; x.n_rows()];
                self.previous = Some(x.clone());
            }
        }
    }

    pub fn jumps(&self) -> u64 {
        self.jumps
    }

    pub fn flips_by_row(&self) -> &[u64] {
        &self.flips_by_row
    }

    /// Per-row mean squared jump; zero before two snapshots have been seen.
    pub fn msjd_by_time(&self) -> Vec<f64> {
        let k = self.jumps.max(1) as f64;
        self.flips_by_row.iter().map(|&f| f as f64 / k).collect()
    }

    /// Σ_t of [`Self::msjd_by_time`].
    pub fn msjd(&self) -> f64 {
        self.msjd_by_time().iter().sum()
    }
}

/// Mean Hamming distance between consecutive snapshots.
pub fn msjd(chain: &[ColonisationMatrix]) -> f64 {
    msjd_by_time(chain).iter().sum()
}

/// Per-time mean squared jump, summed over individuals.
pub fn msjd_by_time(chain: &[ColonisationMatrix]) -> Vec<f64> {
    assert!(chain.len() >= 2, "MSJD needs at least two snapshots");
    let mut acc = MsjdAccumulator::new();
    for x in chain {
        acc.push(x);
    }
    acc.msjd_by_time()
}

/// Linearly interpolated empirical quantile of sorted data (inclusive
/// endpoints: position (n − 1)p).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_copy(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn median(samples: &[f64]) -> f64 {
    quantile_sorted(&sorted_copy(samples), 0.5)
}

/// Central interval between the (1 − level)/2 and (1 + level)/2 quantiles.
pub fn credible_interval(samples: &[f64], level: f64) -> (f64, f64) {
    assert!(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
    let s = sorted_copy(samples);
    let tail = (1.0 - level) / 2.0;
    (quantile_sorted(&s, tail), quantile_sorted(&s, 1.0 - tail))
}

/// Σ_j x_{t,j} for every row.
pub fn colonised_count(x: &ColonisationMatrix) -> Vec<usize> {
    (0..x.n_rows()).map(|t| x.row_count(t)).collect()
}

/// Colonisation state seen by an uncolonised individual when the pressure
/// for step t + 1 is computed from row t.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RiskScenario {
    pub t: usize,
    /// Colonised individuals in the whole population at row t.
    pub global: usize,
    /// Colonised members of the individual's own household at row t.
    pub household: usize,
}

/// (λ^G + λ^H) / λ^G for each posterior sample. Covariate factors cancel.
pub fn household_risk_ratios(
    thetas: &[ModelParams],
    scenario: RiskScenario,
    ctx: &Context<'_>,
) -> Result<Vec<f64>> {
    let season = seasonal_modifier(scenario.t, ctx.fixed);
    let n = ctx.n_individuals() as f64;
    thetas
        .iter()
        .map(|theta| {
            let global = theta.beta_g * season * scenario.global as f64 / n;
            if global <= 0.0 {
                return Err(ModelError::UndefinedRatio);
            }
            let household = theta.beta_g * theta.beta_h * scenario.household as f64;
            Ok((global + household) / global)
        })
        .collect()
}

/// Credible interval of the household risk ratio.
pub fn household_risk_ratio(
    thetas: &[ModelParams],
    scenario: RiskScenario,
    level: f64,
    ctx: &Context<'_>,
) -> Result<(f64, f64)> {
    if thetas.is_empty() {
        return Err(ModelError::InvalidInput("empty posterior sample".into()));
    }
    Ok(credible_interval(&household_risk_ratios(thetas, scenario, ctx)?, level))
}

/// A distribution over lattices of one shape, keyed by
/// [`ColonisationMatrix::to_code`].
pub type LatticeDistribution = BTreeMap<u64, f64>;

/// The exact conditional law π(X | Y, θ) on a tiny lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    pub n_steps: usize,
    pub n_individuals: usize,
    /// Probabilities of the lattices with positive density.
    pub probs: LatticeDistribution,
}

impl ExactPosterior {
    pub fn prob(&self, x: &ColonisationMatrix) -> f64 {
        self.probs.get(&x.to_code()).copied().unwrap_or(0.0)
    }

    /// P(x_{t,j} = 1 | Y, θ).
    pub fn marginal(&self, t: usize, j: usize) -> f64 {
        let bit = t * self.n_individuals + j;
        self.probs.iter().filter(|(&c, _)| (c >> bit) & 1 == 1).map(|(_, &p)| p).sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }
}

/// Enumerates every lattice of the shape of `y` and normalises
/// exp(log π(X|θ) + log π(Y|X)) with log-sum-exp.
pub fn exact_latent_posterior(y: &ObservationMatrix, theta: &ModelParams, ctx: &Context<'_>) -> Result<ExactPosterior> {
    let (n_steps, n) = (y.n_steps(), y.n_individuals());
    let cells = (n_steps + 1) * n;
    if cells > ENUMERATION_LIMIT {
        return Err(ModelError::TooLarge { cells, limit: ENUMERATION_LIMIT });
    }
    let mut log_weights = Vec::new();
    for code in 0..(1u64 << cells) {
        let x = ColonisationMatrix::from_code(code, n_steps, n);
        let lw = transmission_log_density(&x, theta, ctx) + observation_log_density(y, &x, ctx.fixed);
        if lw > f64::NEG_INFINITY {
            log_weights.push((code, lw));
        }
    }
    let max = log_weights.iter().map(|&(_, w)| w).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(ModelError::InvalidInput("every lattice has zero density".into()));
    }
    let log_z = max + log_weights.iter().map(|&(_, w)| (w - max).exp()).sum::<f64>().ln();
    let probs = log_weights.into_iter().map(|(c, w)| (c, (w - log_z).exp())).collect();
    Ok(ExactPosterior { n_steps, n_individuals: n, probs })
}

/// Normalised visit frequencies of a sequence of lattices.
pub fn empirical_distribution<'a>(samples: impl IntoIterator<Item = &'a ColonisationMatrix>) -> LatticeDistribution {
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut n = 0u64;
    for x in samples {
        *counts.entry(x.to_code()).or_default() += 1;
        n += 1;
    }
    counts.into_iter().map(|(c, k)| (c, k as f64 / n as f64)).collect()
}

/// Normalises a map of visit counts.
pub fn normalise_counts(counts: &BTreeMap<u64, u64>) -> LatticeDistribution {
    let n: u64 = counts.values().sum();
    counts.iter().map(|(&c, &k)| (c, k as f64 / n as f64)).collect()
}

/// ½ Σ |p − q| over the union of supports.
pub fn total_variation(p: &LatticeDistribution, q: &LatticeDistribution) -> f64 {
    let mut sum = 0.0;
    for (c, &pv) in p {
        sum += (pv - q.get(c).copied().unwrap_or(0.0)).abs();
    }
    for (c, &qv) in q {
        if !p.contains_key(c) {
            sum += qv;
        }
    }
    0.5 * sum
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut k = i;
        while k + 1 < order.len() && values[order[k + 1]] == values[order[i]] {
            k += 1;
        }
        let rank = (i + k) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=k] {
            ranks[idx] = rank;
        }
        i = k + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation; 0 when either series is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "series differ in length");
    if x.len() < 2 {
        return 0.0;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Median and central interval of one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ParamSummary {
    pub fn of(samples: &[f64], level: f64) -> Self {
        let s = sorted_copy(samples);
        let tail = (1.0 - level) / 2.0;
        Self {
            median: quantile_sorted(&s, 0.5),
            lower: quantile_sorted(&s, tail),
            upper: quantile_sorted(&s, 1.0 - tail),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub level: f64,
    /// In the order of [`ModelParams::NAMES`].
    pub params: [ParamSummary; 4],
    pub param_acceptance: f64,
    pub latent_acceptance: f64,
    /// Latent acceptance by earliest perturbed row; NaN where nothing was
    /// proposed.
    pub latent_acceptance_by_origin: Vec<f64>,
    pub msjd: f64,
    pub msjd_by_time: Vec<f64>,
}

impl ChainSummary {
    pub fn new(
        thetas: &[ModelParams],
        level: f64,
        param_accepted: u64,
        latent: &crate::chain::LatentStats,
        msjd: &MsjdAccumulator,
    ) -> Result<Self> {
        if thetas.is_empty() {
            return Err(ModelError::InvalidInput("no retained samples to summarise".into()));
        }
        let params = std::array::from_fn(|k| {
            let column: Vec<f64> = thetas.iter().map(|t| t.to_array()[k]).collect();
            ParamSummary::of(&column, level)
        });
        let by_origin = latent
            .by_origin_proposed
            .iter()
            .zip(&latent.by_origin_accepted)
            .map(|(&p, &a)| if p == 0 { f64::NAN } else { a as f64 / p as f64 })
            .collect();
        Ok(Self {
            level,
            params,
            param_acceptance: param_accepted as f64 / thetas.len() as f64,
            latent_acceptance: latent.acceptance_rate(),
            latent_acceptance_by_origin: by_origin,
            msjd: msjd.msjd(),
            msjd_by_time: msjd.msjd_by_time(),
        })
    }
}
