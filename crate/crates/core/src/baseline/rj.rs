//! Reversible-jump updates of one individual's event times.
//!
//! Each update picks an individual and one of three moves with equal
//! probability: shift an event within its neighbours (at most `m` steps), add
//! a pair of events enclosing a new episode of at most `m` steps, or remove a
//! pair of consecutive events at most `m` steps apart. Initial states are
//! updated separately by single flips.
//!
//! Shifting event e from t_e to a later t* flips rows t_e..t*−1, so the new
//! change point sits at t*. An earlier t* flips rows t*..t_e−1.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::events::EventSequence;
use crate::chain::{LatentStats, LatentUpdater};
use crate::error::{ModelError, Result};
use crate::model::{
    observation_log_density, transmission_log_density, ColonisationMatrix, Context, ModelParams,
    ObservationLogFactors, ObservationMatrix, Pressure, RowCounts,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RjConfig {
    /// Maximum block size m in time steps.
    pub block_size: usize,
}

impl Default for RjConfig {
    fn default() -> Self {
        Self { block_size: 4 }
    }
}

impl RjConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(ModelError::InvalidInput("block size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RjMove {
    Move,
    Add,
    Remove,
}

impl RjMove {
    pub const ALL: [RjMove; 3] = [RjMove::Move, RjMove::Add, RjMove::Remove];
}

#[derive(Debug, Clone, PartialEq)]
pub struct RjProposal {
    pub column: Vec<u8>,
    /// log of the Hastings factor Q.
    pub log_q: f64,
    /// Rows lo..=hi were flipped.
    pub lo: usize,
    pub hi: usize,
}

/// Range [lo, hi] of admissible times for event `e` centred at `centre`;
/// the candidate set excludes `centre` itself.
pub fn move_window(ev: &EventSequence, e: usize, centre: usize, m: usize) -> (usize, usize) {
    let prev = if e == 0 { 0 } else { ev.times[e - 1] };
    let next = if e + 1 == ev.len() { ev.n_steps + 1 } else { ev.times[e + 1] };
    ((prev + 1).max(centre.saturating_sub(m)), (next - 1).min(centre + m))
}

/// Times t ∈ 1..T−1 where x_{t−1} = x_t = x_{t+1}.
pub fn add_set(col: &[u8]) -> Vec<usize> {
    let n_steps = col.len() - 1;
    (1..n_steps).filter(|&t| col[t - 1] == col[t] && col[t] == col[t + 1]).collect()
}

/// Largest closing time for an episode opened at `t_a`.
pub fn add_partner_max(ev: &EventSequence, t_a: usize, m: usize) -> usize {
    (ev.next_after(t_a) - 1).min(t_a + m)
}

/// Events e (0-based, with a successor) such that t_e + m ≥ t_{e+1}.
pub fn remove_set(ev: &EventSequence, m: usize) -> Vec<usize> {
    ev.times.windows(2).enumerate().filter(|(_, w)| w[0] + m >= w[1]).map(|(e, _)| e).collect()
}

fn flip(col: &mut [u8], lo: usize, hi: usize) {
    for v in &mut col[lo..=hi] {
        *v = 1 - *v;
    }
}

/// Builds a proposal of the given kind for one individual's column `x_{0..=T}`.
pub fn rj_propose<R: Rng + ?Sized>(col: &[u8], kind: RjMove, m: usize, rng: &mut R) -> Result<RjProposal> {
    let ev = EventSequence::from_column(col);
    let mut column = col.to_vec();
    match kind {
        RjMove::Move => {
            if ev.is_empty() {
                return Err(ModelError::InfeasibleProposal("move"));
            }
            let e = rng.random_range(0..ev.len());
            let te = ev.times[e];
            let (lo, hi) = move_window(&ev, e, te, m);
            let size = hi - lo;
            if size == 0 {
                return Err(ModelError::InfeasibleProposal("move"));
            }
            let k = lo + rng.random_range(0..size);
            let t_new = if k >= te { k + 1 } else { k };
            let (a, b) = if t_new > te { (te, t_new - 1) } else { (t_new, te - 1) };
            flip(&mut column, a, b);
            let (lo2, hi2) = move_window(&ev, e, t_new, m);
            Ok(RjProposal { column, log_q: (size as f64).ln() - ((hi2 - lo2) as f64).ln(), lo: a, hi: b })
        }
        RjMove::Add => {
            let a_set = add_set(col);
            if a_set.is_empty() {
                return Err(ModelError::InfeasibleProposal("add"));
            }
            let t_a = a_set[rng.random_range(0..a_set.len())];
            let b_size = add_partner_max(&ev, t_a, m) - t_a;
            let t_b = t_a + 1 + rng.random_range(0..b_size);
            flip(&mut column, t_a, t_b - 1);
            let r_star = remove_set(&EventSequence::from_column(&column), m).len();
            let log_q = (a_set.len() as f64).ln() + (b_size as f64).ln() - (r_star as f64).ln();
            Ok(RjProposal { column, log_q, lo: t_a, hi: t_b - 1 })
        }
        RjMove::Remove => {
            let r_set = remove_set(&ev, m);
            if r_set.is_empty() {
                return Err(ModelError::InfeasibleProposal("remove"));
            }
            let r = r_set[rng.random_range(0..r_set.len())];
            let (t_r, t_next) = (ev.times[r], ev.times[r + 1]);
            flip(&mut column, t_r, t_next - 1);
            let a_star = add_set(&column).len();
            let b_star = add_partner_max(&EventSequence::from_column(&column), t_r, m) - t_r;
            let log_q = (r_set.len() as f64).ln() - (a_star as f64).ln() - (b_star as f64).ln();
            Ok(RjProposal { column, log_q, lo: t_r, hi: t_next - 1 })
        }
    }
}

/// Flip of one initial state, accepted against the full target. Returns the
/// new lattice and whether the flip was accepted.
pub fn rj_flip_initial<R: Rng + ?Sized>(
    x: &ColonisationMatrix,
    theta: &ModelParams,
    y: &ObservationMatrix,
    ctx: &Context<'_>,
    rng: &mut R,
) -> (ColonisationMatrix, bool) {
    let j = rng.random_range(0..x.n_individuals());
    let mut prop = x.clone();
    prop.set(0, j, 1 - x.get(0, j));
    let log_ratio = full_log_target(&prop, theta, y, ctx) - full_log_target(x, theta, y, ctx);
    let accepted = rng.random::<f64>().ln() < log_ratio;
    (if accepted { prop } else { x.clone() }, accepted)
}

/// Flip of one final-row state, accepted against the full target. Move, add
/// and remove never change x_T, so without this flip the chain is reducible.
pub fn rj_flip_final<R: Rng + ?Sized>(
    x: &ColonisationMatrix,
    theta: &ModelParams,
    y: &ObservationMatrix,
    ctx: &Context<'_>,
    rng: &mut R,
) -> (ColonisationMatrix, bool) {
    let j = rng.random_range(0..x.n_individuals());
    let t = x.n_steps();
    let mut prop = x.clone();
    prop.set(t, j, 1 - x.get(t, j));
    let log_ratio = full_log_target(&prop, theta, y, ctx) - full_log_target(x, theta, y, ctx);
    let accepted = rng.random::<f64>().ln() < log_ratio;
    (if accepted { prop } else { x.clone() }, accepted)
}

fn full_log_target(x: &ColonisationMatrix, theta: &ModelParams, y: &ObservationMatrix, ctx: &Context<'_>) -> f64 {
    transmission_log_density(x, theta, ctx) + observation_log_density(y, x, ctx.fixed)
}

/// One reversible-jump update of rows 1..T, scored with the full target.
pub fn rj_latent_update<R: Rng + ?Sized>(
    x: &ColonisationMatrix,
    theta: &ModelParams,
    y: &ObservationMatrix,
    cfg: &RjConfig,
    ctx: &Context<'_>,
    rng: &mut R,
) -> (ColonisationMatrix, bool) {
    let j = rng.random_range(0..x.n_individuals());
    let kind = RjMove::ALL[rng.random_range(0..3)];
    let prop = match rj_propose(&x.column(j), kind, cfg.block_size, rng) {
        Ok(p) => p,
        Err(_) => return (x.clone(), false),
    };
    let mut x_star = x.clone();
    x_star.set_column(j, &prop.column);
    let log_ratio = full_log_target(&x_star, theta, y, ctx) - full_log_target(x, theta, y, ctx) + prop.log_q;
    let accepted = rng.random::<f64>().ln() < log_ratio;
    (if accepted { x_star } else { x.clone() }, accepted)
}

/// Reversible-jump kernel scoring only the density terms a move can change.
pub struct RjKernel<'a> {
    ctx: Context<'a>,
    y: &'a ObservationMatrix,
    cfg: RjConfig,
    obs: ObservationLogFactors,
    pressure: Option<Pressure>,
    counts: Vec<RowCounts>,
    log_clear: f64,
    log_stay: f64,
}

impl<'a> RjKernel<'a> {
    pub fn new(ctx: Context<'a>, y: &'a ObservationMatrix, cfg: RjConfig) -> Result<Self> {
        cfg.validate()?;
        if y.n_individuals() != ctx.n_individuals() {
            return Err(ModelError::InvalidInput("observation lattice does not match population".into()));
        }
        let fixed = ctx.fixed;
        Ok(Self {
            ctx,
            y,
            cfg,
            obs: ObservationLogFactors::new(fixed),
            pressure: None,
            counts: Vec::new(),
            log_clear: fixed.clearance_prob().ln(),
            log_stay: -fixed.gamma * fixed.step_weeks,
        })
    }

    /// Sum of the target terms that depend on individual `j`'s rows lo..=hi.
    fn local_log_target(&self, x: &ColonisationMatrix, j: usize, lo: usize, hi: usize) -> f64 {
        let pressure = self.pressure.as_ref().expect("prepare() must run first");
        let pop = self.ctx.population;
        let n_steps = x.n_steps();
        let step = pressure.step();
        let mut total = 0.0;
        if lo == 0 {
            let p0 = self.ctx.fixed.p0;
            total += if x.get(0, j) == 1 { p0.ln() } else { (-p0).ln_1p() };
        }
        for t in lo..=hi {
            total += self.obs.get(self.y.get(t, j), x.get(t, j));
        }
        let transition = |t: usize, i: usize, prev: u8, cur: u8| -> f64 {
            match (prev, cur) {
                (0, c) => {
                    let counts = &self.counts[t - 1];
                    let h = counts.household_others(pop, i, 0);
                    if c == 0 {
                        -pressure.rate(t, i, counts.global, h) * step
                    } else {
                        pressure.colonisation_prob(t, i, counts.global, h).ln()
                    }
                }
                (_, 0) => self.log_clear,
                _ => self.log_stay,
            }
        };
        let last = (hi + 1).min(n_steps);
        for t in lo.max(1)..=last {
            if t == lo {
                total += transition(t, j, x.get(t - 1, j), x.get(t, j));
                continue;
            }
            let (prev_row, cur_row) = (x.row(t - 1), x.row(t));
            for i in 0..x.n_individuals() {
                if prev_row[i] == 0 || i == j {
                    total += transition(t, i, prev_row[i], cur_row[i]);
                }
            }
        }
        total
    }

    fn flip_span(&mut self, x: &mut ColonisationMatrix, j: usize, lo: usize, hi: usize) {
        let hh = self.ctx.population.household_of(j);
        for t in lo..=hi {
            let v = 1 - x.get(t, j);
            x.set(t, j, v);
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

    /// Metropolis-Hastings on flipping rows lo..=hi of column j.
    fn try_flip<R: Rng + ?Sized>(
        &mut self,
        x: &mut ColonisationMatrix,
        j: usize,
        lo: usize,
        hi: usize,
        log_q: f64,
        rng: &mut R,
    ) -> bool {
        let before = self.local_log_target(x, j, lo, hi);
        self.flip_span(x, j, lo, hi);
        let after = self.local_log_target(x, j, lo, hi);
        let accepted = rng.random::<f64>().ln() < after - before + log_q;
        if !accepted {
            self.flip_span(x, j, lo, hi);
        }
        accepted
    }

    /// Single initial-state flip.
    pub fn flip_initial<R: Rng + ?Sized>(&mut self, x: &mut ColonisationMatrix, rng: &mut R) -> bool {
        let j = rng.random_range(0..x.n_individuals());
        self.try_flip(x, j, 0, 0, 0.0, rng)
    }

    /// Single final-row flip.
    pub fn flip_final<R: Rng + ?Sized>(&mut self, x: &mut ColonisationMatrix, rng: &mut R) -> bool {
        let j = rng.random_range(0..x.n_individuals());
        let t = x.n_steps();
        self.try_flip(x, j, t, t, 0.0, rng)
    }

    /// One move / add / remove update; `None` when the proposal was infeasible.
    pub fn update<R: Rng + ?Sized>(&mut self, x: &mut ColonisationMatrix, rng: &mut R) -> Option<(bool, RjProposal)> {
        let j = rng.random_range(0..x.n_individuals());
        let kind = RjMove::ALL[rng.random_range(0..3)];
        let prop = rj_propose(&x.column(j), kind, self.cfg.block_size, rng).ok()?;
        let accepted = self.try_flip(x, j, prop.lo, prop.hi, prop.log_q, rng);
        Some((accepted, prop))
    }
}

impl LatentUpdater for RjKernel<'_> {
    fn name(&self) -> &'static str {
        "rj"
    }

    fn prepare(&mut self, theta: &ModelParams, x: &ColonisationMatrix) -> Result<()> {
        if !x.same_shape(self.y) {
            return Err(ModelError::InvalidInput("lattice shape does not match the data".into()));
        }
        self.pressure = Some(Pressure::new(theta, &self.ctx, x.n_steps()));
        let pop = self.ctx.population;
        self.counts = (0..=x.n_steps()).map(|t| RowCounts::of_row(x.row(t), pop)).collect();
        Ok(())
    }

    /// One initial-state flip and one final-state flip, then `n_updates` event
    /// updates.
    fn sweep<R: Rng + ?Sized>(
        &mut self,
        x: &mut ColonisationMatrix,
        n_updates: usize,
        rng: &mut R,
        stats: &mut LatentStats,
    ) -> Result<()> {
        stats.ensure_rows(x.n_rows());
        if n_updates > 0 {
            if self.flip_initial(x, rng) {
                stats.cells_changed += 1;
            }
            if self.flip_final(x, rng) {
                stats.cells_changed += 1;
            }
        }
        for _ in 0..n_updates {
            match self.update(x, rng) {
                Some((accepted, prop)) => {
                    let size = if accepted { prop.hi - prop.lo + 1 } else { 0 };
                    stats.record(accepted, size, Some(prop.lo));
                }
                None => stats.record_infeasible(),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, FixedModel, Population, TestResult};
    use crate::rng;
    use approx::assert_abs_diff_eq;

    fn naive_move_set(col: &[u8], e: usize, m: usize) -> Vec<usize> {
        let ev = EventSequence::from_column(col);
        let n_steps = col.len() - 1;
        let mut times = vec![0];
        times.extend(&ev.times);
        times.push(n_steps + 1);
        let (prev, te, next) = (times[e], times[e + 1], times[e + 2]);
        (1..=n_steps)
            .filter(|&t| t > prev && t < next && t + m >= te && t <= te + m && t != te)
            .collect()
    }

    fn naive_remove_set(col: &[u8], m: usize) -> Vec<usize> {
        let ev = EventSequence::from_column(col);
        (0..ev.len().saturating_sub(1)).filter(|&e| ev.times[e] + m >= ev.times[e + 1]).collect()
    }

    #[test]
    fn set_constructions_match_naive_scans() {
        let mut r = rng::stream(12, 0);
        for _ in 0..500 {
            let n_steps = r.random_range(1..12);
            let col: Vec<u8> = (0..=n_steps).map(|_| u8::from(r.random::<f64>() < 0.4)).collect();
            let m = r.random_range(1..5);
            let ev = EventSequence::from_column(&col);
            for e in 0..ev.len() {
                let (lo, hi) = move_window(&ev, e, ev.times[e], m);
                let fast: Vec<usize> = (lo..=hi).filter(|&t| t != ev.times[e]).collect();
                assert_eq!(fast, naive_move_set(&col, e, m));
            }
            assert_eq!(remove_set(&ev, m), naive_remove_set(&col, m));
            let naive_a: Vec<usize> = (1..n_steps)
                .filter(|&t| col[t - 1] == col[t] && col[t] == col[t + 1])
                .collect();
            assert_eq!(add_set(&col), naive_a);
        }
    }

    #[test]
    fn forward_move_places_event_at_new_time() {
        let mut r = rng::stream(2, 2);
        for _ in 0..200 {
            let col = vec![0, 0, 1, 1, 1, 1, 0, 0];
            let p = rj_propose(&col, RjMove::Move, 3, &mut r).unwrap();
            let before = EventSequence::from_column(&col);
            let after = EventSequence::from_column(&p.column);
            assert_eq!(after.len(), before.len());
            let diff: Vec<_> = before.times.iter().zip(&after.times).filter(|(a, b)| a != b).collect();
            assert_eq!(diff.len(), 1);
        }
    }

    #[test]
    fn symmetric_move_has_unit_factor() {
        // One event at t = 4 with T = 8, m = 2: H = {2,3,5,6}; moving to any
        // t* in H keeps |H*| = 4 only for t* = 3 and 5.
        let col = vec![0, 0, 0, 0, 1, 1, 1, 1, 1];
        let mut r = rng::stream(6, 0);
        for _ in 0..100 {
            let p = rj_propose(&col, RjMove::Move, 2, &mut r).unwrap();
            let t_new = EventSequence::from_column(&p.column).times[0];
            if t_new == 3 || t_new == 5 {
                assert_eq!(p.log_q, 0.0);
            }
        }
    }

    #[test]
    fn add_with_unit_block_gives_log_a() {
        // m = 1 forces B = {t_a + 1}; the new pair is the only removable one.
        let col = vec![0; 7];
        let mut r = rng::stream(3, 0);
        let p = rj_propose(&col, RjMove::Add, 1, &mut r).unwrap();
        assert_abs_diff_eq!(p.log_q, (add_set(&col).len() as f64).ln(), epsilon = 1e-12);
        assert_eq!(p.hi, p.lo);
    }

    #[test]
    fn add_then_remove_factors_cancel() {
        let mut r = rng::stream(31, 0);
        let col = vec![0, 0, 0, 0, 1, 1, 0, 0, 0];
        let m = 3;
        for _ in 0..200 {
            let add = rj_propose(&col, RjMove::Add, m, &mut r).unwrap();
            let ev = EventSequence::from_column(&add.column);
            let r_star = remove_set(&ev, m);
            let idx = ev.times.iter().position(|&t| t == add.lo).unwrap();
            assert!(r_star.contains(&idx));
            // Reverse: remove the same pair deterministically.
            let mut back = add.column.clone();
            flip(&mut back, ev.times[idx], ev.times[idx + 1] - 1);
            assert_eq!(back, col);
            let a_star = add_set(&back).len() as f64;
            let b_star = (add_partner_max(&EventSequence::from_column(&back), add.lo, m) - add.lo) as f64;
            let remove_log_q = (r_star.len() as f64).ln() - a_star.ln() - b_star.ln();
            assert_abs_diff_eq!(add.log_q + remove_log_q, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_sets_are_infeasible() {
        let mut r = rng::stream(1, 0);
        let col = vec![1, 1];
        assert_eq!(rj_propose(&col, RjMove::Move, 4, &mut r), Err(ModelError::InfeasibleProposal("move")));
        assert_eq!(rj_propose(&col, RjMove::Add, 4, &mut r), Err(ModelError::InfeasibleProposal("add")));
        assert_eq!(rj_propose(&col, RjMove::Remove, 4, &mut r), Err(ModelError::InfeasibleProposal("remove")));
    }

    #[test]
    fn initial_flip_ratio_without_transmission() {
        let pop = Population::singletons(4).unwrap();
        let fixed = FixedModel { p0: 0.5, ..FixedModel::default() };
        let ctx = Context::new(&pop, &fixed);
        let theta = ModelParams::new(0.0, 1.0, 0.0, 0.0);
        let y = ObservationMatrix::untested(3, 4).unwrap();
        let mut x = ColonisationMatrix::zeros(3, 4).unwrap();
        let mut kernel = RjKernel::new(ctx, &y, RjConfig::default()).unwrap();
        kernel.prepare(&theta, &x).unwrap();
        // The prior terms cancel at p0 = 1/2; only the new clearance remains.
        let before = kernel.local_log_target(&x, 2, 0, 0);
        kernel.flip_span(&mut x, 2, 0, 0);
        let after = kernel.local_log_target(&x, 2, 0, 0);
        assert_abs_diff_eq!(after - before, fixed.clearance_prob().ln(), epsilon = 1e-12);
    }

    #[test]
    fn flip_creating_unreachable_colonisation_is_rejected() {
        let pop = Population::singletons(2).unwrap();
        let fixed = FixedModel::default();
        let ctx = Context::new(&pop, &fixed);
        let theta = ModelParams::new(0.4, 1.0, 0.0, 0.0);
        let y = ObservationMatrix::untested(2, 2).unwrap();
        // Individual 1 is colonised at t = 1 thanks to individual 0 at t = 0.
        let x = ColonisationMatrix::from_rows(&[vec![1, 0], vec![1, 1], vec![1, 1]]).unwrap();
        let mut kernel = RjKernel::new(ctx, &y, RjConfig::default()).unwrap();
        kernel.prepare(&theta, &x).unwrap();
        let mut xx = x.clone();
        let mut r = rng::stream(2, 0);
        assert!(!kernel.try_flip(&mut xx, 0, 0, 0, 0.0, &mut r));
        assert_eq!(xx, x);
    }

    #[test]
    fn local_and_full_targets_agree() {
        let pop = Population::new(vec![0, 0, 1, 1, 1, 2], vec![[0.3, 0.5], [-0.2, -0.5], [0.0, 0.5], [1.0, -0.5], [0.4, 0.5], [-1.5, -0.5]]).unwrap();
        let fixed = FixedModel::default();
        let ctx = Context::new(&pop, &fixed);
        let theta = ModelParams::new(0.6, 2.0, 0.1, -0.3);
        let mut r = rng::stream(77, 0);
        let mut y = ObservationMatrix::untested(9, 6).unwrap();
        y.set(3, 1, TestResult::Positive);
        y.set(6, 4, TestResult::Negative);
        y.set(0, 2, TestResult::Negative);
        let mut checked = 0;
        for _ in 0..300 {
            let x = simulate(&theta, &ctx, 9, &mut r).unwrap();
            let mut kernel = RjKernel::new(ctx, &y, RjConfig { block_size: 3 }).unwrap();
            kernel.prepare(&theta, &x).unwrap();
            let j = r.random_range(0..6);
            let kind = RjMove::ALL[r.random_range(0..3)];
            let Ok(p) = rj_propose(&x.column(j), kind, 3, &mut r) else { continue };
            let mut xs = x.clone();
            xs.set_column(j, &p.column);
            let full = full_log_target(&xs, &theta, &y, &ctx) - full_log_target(&x, &theta, &y, &ctx);
            let mut xl = x.clone();
            let before = kernel.local_log_target(&xl, j, p.lo, p.hi);
            kernel.flip_span(&mut xl, j, p.lo, p.hi);
            assert_eq!(xl, xs);
            let after = kernel.local_log_target(&xl, j, p.lo, p.hi);
            if full.is_finite() {
                assert_abs_diff_eq!(after - before, full, epsilon = 1e-9);
                checked += 1;
            } else {
                assert_eq!(after - before, full);
            }
        }
        assert!(checked > 50);
    }
}
