//! Individual forward-filtering backward-sampling: an exact Gibbs draw of one
//! individual's whole path given everyone else's.
//!
//! For individual j with path s_0..s_T the full conditional factorises as
//!
//! p(s_0) ∏_t obs_t(s_t) ∏_{t<T} O_t(s_t) ∏_{t≥1} P(s_t | s_{t−1}, λ_j(t)),
//!
//! where O_t(s) is the product of every other individual's transition
//! probability into row t + 1 given row t with j in state s. The forward pass
//! runs in log space and renormalises at each step.

use rand::Rng;

use crate::chain::{LatentStats, LatentUpdater};
use crate::error::{ModelError, Result};
use crate::model::{
    colonisation_pressure, transition_log_prob, ColonisationMatrix, Context, FixedModel,
    ModelParams, ObservationLogFactors, ObservationMatrix, Pressure, RowCounts, TestResult,
};

/// P(x_{t+1} = cur | x_t = prev) for pressure λ.
pub fn iffbs_transition_prob(prev: u8, cur: u8, lambda: f64, fixed: &FixedModel) -> f64 {
    let step = fixed.step_weeks;
    match (prev, cur) {
        (0, 0) => (-lambda * step).exp(),
        (0, _) => -libm::expm1(-lambda * step),
        (_, 0) => fixed.clearance_prob(),
        _ => (-fixed.gamma * step).exp(),
    }
}

#[inline]
fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[inline]
fn normalise(l: [f64; 2]) -> [f64; 2] {
    let z = log_sum_exp(l[0], l[1]);
    [l[0] - z, l[1] - z]
}

/// Forward filter for one individual.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTable {
    /// Normalised log forward probabilities per row.
    log_alpha: Vec<[f64; 2]>,
    /// log P(s_t | s_{t−1}) as `[prev][cur]`, indexed by t (row 0 unused).
    log_trans: Vec<[[f64; 2]; 2]>,
}

impl ForwardTable {
    fn build(
        n_steps: usize,
        log_prior: [f64; 2],
        mut obs: impl FnMut(usize, u8) -> f64,
        mut others: impl FnMut(usize, u8) -> f64,
        mut own: impl FnMut(usize) -> [[f64; 2]; 2],
    ) -> Self {
        let mut log_alpha = Vec::with_capacity(n_steps + 1);
        let mut log_trans = Vec::with_capacity(n_steps + 1);
        log_trans.push([[0.0; 2]; 2]);
        let mut l = [0.0; 2];
        for s in 0..2u8 {
            l[s as usize] = log_prior[s as usize] + obs(0, s) + if n_steps > 0 { others(0, s) } else { 0.0 };
        }
        log_alpha.push(normalise(l));
        for t in 1..=n_steps {
            let tr = own(t);
            let prev = log_alpha[t - 1];
            for s in 0..2u8 {
                let si = s as usize;
                let reach = log_sum_exp(prev[0] + tr[0][si], prev[1] + tr[1][si]);
                let ahead = if t < n_steps { others(t, s) } else { 0.0 };
                l[si] = obs(t, s) + ahead + reach;
            }
            log_alpha.push(normalise(l));
            log_trans.push(tr);
        }
        Self { log_alpha, log_trans }
    }

    pub fn n_steps(&self) -> usize {
        self.log_alpha.len() - 1
    }

    /// Filtered probability that the individual is colonised at row t.
    pub fn prob_colonised(&self, t: usize) -> f64 {
        self.log_alpha[t][1].exp()
    }

    /// log of the backward-sampling kernel over s_t given s_{t+1}.
    fn backward(&self, t: usize, next: u8) -> [f64; 2] {
        let tr = &self.log_trans[t + 1];
        let a = &self.log_alpha[t];
        normalise([a[0] + tr[0][next as usize], a[1] + tr[1][next as usize]])
    }

    /// Conditional log probability of a full path `s_0..=s_T`.
    pub fn path_log_prob(&self, path: &[u8]) -> f64 {
        let n_steps = self.n_steps();
        assert_eq!(path.len(), n_steps + 1);
        let mut total = self.log_alpha[n_steps][path[n_steps] as usize];
        for t in (0..n_steps).rev() {
            total += self.backward(t, path[t + 1])[path[t] as usize];
        }
        total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u8> {
        let n_steps = self.n_steps();
        let mut path = vec![0u8; n_steps + 1];
        let draw = |l: [f64; 2], rng: &mut R| u8::from(rng.random::<f64>() < l[1].exp());
        path[n_steps] = draw(self.log_alpha[n_steps], rng);
        for t in (0..n_steps).rev() {
            path[t] = draw(self.backward(t, path[t + 1]), rng);
        }
        path
    }
}

fn log_prior(fixed: &FixedModel) -> [f64; 2] {
    [(-fixed.p0).ln_1p(), fixed.p0.ln()]
}

fn log_trans_table(lambda: f64, fixed: &FixedModel) -> [[f64; 2]; 2] {
    let mut tr = [[0.0; 2]; 2];
    for prev in 0..2u8 {
        for cur in 0..2u8 {
            tr[prev as usize][cur as usize] = transition_log_prob(prev, cur, lambda, fixed);
        }
    }
    tr
}

/// Forward filter for individual `j`, keeping every other individual's
/// transition factor.
pub fn iffbs_forward(
    j: usize,
    x: &ColonisationMatrix,
    theta: &ModelParams,
    y: &ObservationMatrix,
    ctx: &Context<'_>,
) -> ForwardTable {
    let fixed = ctx.fixed;
    let pop = ctx.population;
    let n = x.n_individuals();
    let obs = ObservationLogFactors::new(fixed);
    let mut row = vec![0u8; n];
    ForwardTable::build(
        x.n_steps(),
        log_prior(fixed),
        |t, s| obs.get(y.get(t, j), s),
        |t, s| {
            row.copy_from_slice(x.row(t));
            row[j] = s;
            let lambda = colonisation_pressure(t + 1, &row, theta, pop, fixed);
            (0..n)
                .filter(|&i| i != j)
                .map(|i| transition_log_prob(x.get(t, i), x.get(t + 1, i), lambda[i], fixed))
                .sum()
        },
        |t| {
            let mut prev = x.row(t - 1).to_vec();
            prev[j] = 0;
            let lambda = colonisation_pressure(t, &prev, theta, pop, fixed);
            log_trans_table(lambda[j], fixed)
        },
    )
}

/// Resamples individual `j`'s path from its full conditional.
pub fn iffbs_update<R: Rng + ?Sized>(
    x: &ColonisationMatrix,
    theta: &ModelParams,
    y: &ObservationMatrix,
    j: usize,
    ctx: &Context<'_>,
    rng: &mut R,
) -> ColonisationMatrix {
    let path = iffbs_forward(j, x, theta, y, ctx).sample(rng);
    let mut out = x.clone();
    out.set_column(j, &path);
    out
}

/// iFFBS kernel with per-row summaries of everyone's transitions, so that
/// the forward pass only touches factors that depend on the updated
/// individual.
pub struct IffbsKernel<'a> {
    ctx: Context<'a>,
    y: &'a ObservationMatrix,
    obs: ObservationLogFactors,
    pressure: Option<Pressure>,
    counts: Vec<RowCounts>,
    /// Σ of covariate factors over individuals uncolonised at t − 1 and t.
    uu_cov: Vec<f64>,
    /// Individuals colonised at t after being uncolonised at t − 1.
    uc: Vec<Vec<usize>>,
    old_column: Vec<u8>,
}

impl<'a> IffbsKernel<'a> {
    pub fn new(ctx: Context<'a>, y: &'a ObservationMatrix) -> Result<Self> {
        if y.n_individuals() != ctx.n_individuals() {
            return Err(ModelError::InvalidInput("observation lattice does not match population".into()));
        }
        Ok(Self {
            ctx,
            y,
            obs: ObservationLogFactors::new(ctx.fixed),
            pressure: None,
            counts: Vec::new(),
            uu_cov: Vec::new(),
            uc: Vec::new(),
            old_column: Vec::new(),
        })
    }

    fn refresh_row(&mut self, x: &ColonisationMatrix, t: usize) {
        let pressure = self.pressure.as_ref().expect("prepare() must run first");
        let (prev, cur) = (x.row(t - 1), x.row(t));
        let mut sum = 0.0;
        let list = &mut self.uc[t];
        list.clear();
        for i in 0..prev.len() {
            if prev[i] == 0 {
                if cur[i] == 0 {
                    sum += pressure.covariate_factor(i);
                } else {
                    list.push(i);
                }
            }
        }
        self.uu_cov[t] = sum;
    }

    /// Forward filter for `j` using the cached summaries.
    pub fn forward(&self, x: &ColonisationMatrix, j: usize) -> ForwardTable {
        let pressure = self.pressure.as_ref().expect("prepare() must run first");
        let pop = self.ctx.population;
        let fixed = self.ctx.fixed;
        let step = pressure.step();
        let hh = pop.household_of(j);
        let members = pop.members(hh);
        let others = |t: usize, s: u8| -> f64 {
            let counts = &self.counts[t];
            let own = x.get(t, j) as usize;
            let g = counts.global - own + s as usize;
            let h_members = counts.households[hh] - own + s as usize;
            let (cur_row, next_row) = (x.row(t), x.row(t + 1));
            // Everyone outside the household staying uncolonised: only the
            // global part of their pressure depends on s.
            let mut uu = self.uu_cov[t + 1];
            for &i in members {
                if cur_row[i] == 0 && next_row[i] == 0 {
                    uu -= pressure.covariate_factor(i);
                }
            }
            let mut total = -pressure.global_coef(t + 1) * g as f64 * uu * step;
            for &i in &self.uc[t + 1] {
                if pop.household_of(i) != hh {
                    let h = counts.households[pop.household_of(i)];
                    total += pressure.colonisation_prob(t + 1, i, g, h).ln();
                }
            }
            for &i in members {
                if i == j || cur_row[i] == 1 {
                    continue;
                }
                let rate = pressure.rate(t + 1, i, g, h_members);
                total += if next_row[i] == 0 { -rate * step } else { (-libm::expm1(-rate * step)).ln() };
            }
            total
        };
        ForwardTable::build(
            x.n_steps(),
            log_prior(fixed),
            |t, s| match self.y.get(t, j) {
                TestResult::NotTested => 0.0,
                r => self.obs.get(r, s),
            },
            others,
            |t| {
                let counts = &self.counts[t - 1];
                let own = x.get(t - 1, j) as usize;
                let lambda = pressure.rate(t, j, counts.global - own, counts.households[hh] - own);
                log_trans_table(lambda, fixed)
            },
        )
    }

    /// Gibbs update of individual `j`; returns the number of changed cells
    /// and the earliest changed row.
    pub fn update<R: Rng + ?Sized>(&mut self, x: &mut ColonisationMatrix, j: usize, rng: &mut R) -> (usize, Option<usize>) {
        let path = self.forward(x, j).sample(rng);
        self.old_column.clear();
        self.old_column.extend((0..x.n_rows()).map(|t| x.get(t, j)));
        let hh = self.ctx.population.household_of(j);
        let mut changed = 0;
        let mut first = None;
        for (t, &v) in path.iter().enumerate() {
            if v != self.old_column[t] {
                x.set(t, j, v);
                changed += 1;
                first.get_or_insert(t);
                let c = &mut self.counts[t];
                if v == 1 {
                    c.global += 1;
                    c.households[hh] += 1;
                } else {
                    c.global -= 1;
                    c.households[hh] -= 1;
                }
            }
        }
        if changed > 0 {
            let n_steps = x.n_steps();
            for t in 1..=n_steps {
                if path[t] != self.old_column[t] || path[t - 1] != self.old_column[t - 1] {
                    self.refresh_row(x, t);
                }
            }
        }
        (changed, first)
    }
}

impl LatentUpdater for IffbsKernel<'_> {
    fn name(&self) -> &'static str {
        "iffbs"
    }

    fn prepare(&mut self, theta: &ModelParams, x: &ColonisationMatrix) -> Result<()> {
        if !x.same_shape(self.y) {
            return Err(ModelError::InvalidInput("lattice shape does not match the data".into()));
        }
        let pop = self.ctx.population;
        self.pressure = Some(Pressure::new(theta, &self.ctx, x.n_steps()));
        self.counts = (0..=x.n_steps()).map(|t| RowCounts::of_row(x.row(t), pop)).collect();
        self.uu_cov = vec![0.0; x.n_rows()];
        self.uc = vec![Vec::new(); x.n_rows()];
        for t in 1..=x.n_steps() {
            self.refresh_row(x, t);
        }
        Ok(())
    }

    fn sweep<R: Rng + ?Sized>(
        &mut self,
        x: &mut ColonisationMatrix,
        n_updates: usize,
        rng: &mut R,
        stats: &mut LatentStats,
    ) -> Result<()> {
        stats.ensure_rows(x.n_rows());
        for _ in 0..n_updates {
            let j = rng.random_range(0..x.n_individuals());
            let (changed, first) = self.update(x, j, rng);
            stats.record(true, changed, first);
        }
        Ok(())
    }
}
