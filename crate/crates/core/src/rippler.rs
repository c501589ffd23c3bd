//! The non-centred "ripple" latent update.
//!
//! One step maps the current lattice X to uniform draws U consistent with it,
//! moves K″ draws into the complement of their consistency interval, and
//! re-realises X* = f(U*, θ). Since the transmission density cancels against
//! the draw density, the acceptance ratio is the observation ratio times the
//! ratio of total complement masses.
//!
//! [`rippler_latent_update`] is the literal algorithm, materialising the whole
//! U lattice. [`RipplerKernel`] is the production path: it caches thresholds
//! and complement masses of the current lattice, only draws uniforms for cells
//! whose outcome can change, and stops the ripple once a row of X* agrees with
//! X and no perturbed cell lies further ahead. Both have the same law.

use rand::Rng;

use crate::chain::{LatentStats, LatentUpdater};
use crate::error::{ModelError, Result};
use crate::model::{
    observation_log_density, proposal_bounds, realise, ColonisationMatrix, Context, ModelParams,
    NoncentredMatrix, ObservationLogFactors, ObservationMatrix, Pressure, ProposalBounds,
    RowCounts,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RipplerConfig {
    /// K′, latent updates per outer iteration.
    pub n_latent_updates: usize,
    /// K″, draws moved per proposal.
    pub n_elements: usize,
}

impl Default for RipplerConfig {
    fn default() -> Self {
        Self { n_latent_updates: 400, n_elements: 1 }
    }
}

impl RipplerConfig {
    pub fn validate(&self, n_cells: usize) -> Result<()> {
        if self.n_latent_updates == 0 {
            return Err(ModelError::InvalidInput("at least one latent update per iteration".into()));
        }
        if self.n_elements == 0 || self.n_elements > n_cells {
            return Err(ModelError::InvalidInput(format!(
                "elements per proposal must lie in 1..={n_cells}, got {}",
                self.n_elements
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RipplerStepRecord {
    pub accepted: bool,
    pub origins: Vec<(usize, usize)>,
    /// Cells where X* differs from X.
    pub cells_changed: usize,
    pub log_acceptance: f64,
}

/// Uniform draw on [a, b).
#[inline]
fn uniform_in<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b <= a {
        return a;
    }
    loop {
        let u = a + (b - a) * rng.random::<f64>();
        if u < b {
            return u;
        }
    }
}

/// Uniform draw on [0, a) ∪ [b, 1).
#[inline]
fn complement_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let mass = 1.0 + a - b;
    loop {
        let v = mass * rng.random::<f64>();
        let u = if v < a { v } else { (v + (b - a)).max(b) };
        if u < 1.0 {
            return u;
        }
    }
}

/// Draws U with u_{t,j} ~ Unif[a_{t,j}, b_{t,j}) independently.
pub fn sample_noncentred<R: Rng + ?Sized>(
    x: &ColonisationMatrix,
    bounds: &ProposalBounds,
    rng: &mut R,
) -> NoncentredMatrix {
    assert!(x.same_shape(&bounds.lower), "bounds and lattice differ in shape");
    let mut u = NoncentredMatrix::filled(x.n_steps(), x.n_individuals(), 0.0).expect("valid shape");
    for ((t, j), a) in bounds.lower.iter() {
        u.set(t, j, uniform_in(a, bounds.upper.get(t, j), rng));
    }
    u
}

/// Selects `k_elements` cells with replacement, each with probability
/// proportional to its complement mass, and redraws each from the complement
/// of its interval.
pub fn select_and_perturb<R: Rng + ?Sized>(
    u: &NoncentredMatrix,
    bounds: &ProposalBounds,
    k_elements: usize,
    rng: &mut R,
) -> Result<(NoncentredMatrix, Vec<(usize, usize)>)> {
    let n = u.n_individuals();
    let masses: Vec<f64> = bounds
        .lower
        .iter()
        .map(|((t, j), _)| bounds.complement_mass(t, j))
        .collect();
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) {
        return Err(ModelError::NoPerturbableCell);
    }
    let last_positive = masses.iter().rposition(|&m| m > 0.0).expect("total is positive");
    let mut out = u.clone();
    let mut origins = Vec::with_capacity(k_elements);
    for _ in 0..k_elements {
        let mut r = total * rng.random::<f64>();
        let mut pick = last_positive;
        for (k, &m) in masses.iter().enumerate() {
            if r < m {
                pick = k;
                break;
            }
            r -= m;
        }
        let (t, j) = (pick / n, pick % n);
        let (a, b) = bounds.interval(t, j);
        out.set(t, j, complement_draw(a, b, rng));
        origins.push((t, j));
    }
    Ok((out, origins))
}

/// K″ · [log Σ(1 + a − b) − log Σ(1 + a* − b*)].
pub fn log_proposal_ratio(
    bounds_current: &ProposalBounds,
    bounds_proposed: &ProposalBounds,
    k_elements: usize,
) -> Result<f64> {
    let forward = bounds_current.total_complement_mass();
    let reverse = bounds_proposed.total_complement_mass();
    if !(forward > 0.0 && reverse > 0.0) {
        return Err(ModelError::DegenerateProposal);
    }
    Ok(k_elements as f64 * (forward.ln() - reverse.ln()))
}

/// One literal Rippler step: sample U, perturb, realise, accept or reject.
pub fn rippler_latent_update<R: Rng + ?Sized>(
    x: &ColonisationMatrix,
    theta: &ModelParams,
    y: &ObservationMatrix,
    cfg: &RipplerConfig,
    ctx: &Context<'_>,
    rng: &mut R,
) -> Result<(ColonisationMatrix, RipplerStepRecord)> {
    let bounds = proposal_bounds(x, theta, ctx)?;
    let u = sample_noncentred(x, &bounds, rng);
    let (u_star, origins) = select_and_perturb(&u, &bounds, cfg.n_elements, rng)?;
    let x_star = realise(&u_star, theta, ctx);
    let bounds_star = proposal_bounds(&x_star, theta, ctx)?;
    let log_q = log_proposal_ratio(&bounds, &bounds_star, cfg.n_elements)?;
    let log_obs = observation_log_density(y, &x_star, ctx.fixed) - observation_log_density(y, x, ctx.fixed);
    let log_acceptance = log_obs + log_q;
    let accepted = rng.random::<f64>().ln() < log_acceptance;
    let cells_changed = x.hamming(&x_star);
    let record = RipplerStepRecord { accepted, origins, cells_changed, log_acceptance };
    Ok((if accepted { x_star } else { x.clone() }, record))
}

/// Whether the draw at a cell fell below its threshold, given the states.
#[inline]
fn fired(t: usize, prev: u8, cur: u8) -> bool {
    if t == 0 {
        cur == 1
    } else {
        prev != cur
    }
}

/// State produced by a draw `u` against threshold `thr`.
#[inline]
fn outcome(t: usize, prev: u8, u: f64, thr: f64) -> u8 {
    let below = u < thr;
    if t == 0 || prev == 0 {
        u8::from(below)
    } else {
        u8::from(!below)
    }
}

#[inline]
fn interval(fired: bool, thr: f64) -> (f64, f64) {
    if fired {
        (0.0, thr)
    } else {
        (thr, 1.0)
    }
}

#[inline]
fn cell_mass(fired: bool, thr: f64) -> f64 {
    if fired {
        1.0 - thr
    } else {
        thr
    }
}

/// Incremental Rippler kernel.
pub struct RipplerKernel<'a> {
    ctx: Context<'a>,
    y: &'a ObservationMatrix,
    cfg: RipplerConfig,
    obs: ObservationLogFactors,
    n: usize,
    n_steps: usize,
    pressure: Option<Pressure>,
    p_cu: f64,
    counts: Vec<RowCounts>,
    /// Threshold of each cell's draw under the current lattice.
    thr: Vec<f64>,
    mass: Vec<f64>,
    row_mass: Vec<f64>,
    star: Vec<u8>,
    counts_star: Vec<RowCounts>,
    thr_star: Vec<f64>,
    mass_star: Vec<f64>,
    row_mass_star: Vec<f64>,
    origins: Vec<(usize, usize, f64)>,
    changed: Vec<(usize, usize)>,
}

impl<'a> RipplerKernel<'a> {
    pub fn new(ctx: Context<'a>, y: &'a ObservationMatrix, cfg: RipplerConfig) -> Result<Self> {
        let n = ctx.n_individuals();
        let n_steps = y.n_steps();
        if y.n_individuals() != n {
            return Err(ModelError::InvalidInput("observation lattice does not match population".into()));
        }
        cfg.validate((n_steps + 1) * n)?;
        let cells = (n_steps + 1) * n;
        let empty = RowCounts { global: 0, households: vec![0; ctx.population.n_households()] };
        Ok(Self {
            ctx,
            y,
            cfg,
            obs: ObservationLogFactors::new(ctx.fixed),
            n,
            n_steps,
            pressure: None,
            p_cu: ctx.fixed.clearance_prob(),
            counts: vec![empty.clone(); n_steps + 1],
            thr: vec![0.0; cells],
            mass: vec![0.0; cells],
            row_mass: vec![0.0; n_steps + 1],
            star: vec![0; cells],
            counts_star: vec![empty; n_steps + 1],
            thr_star: vec![0.0; cells],
            mass_star: vec![0.0; cells],
            row_mass_star: vec![0.0; n_steps + 1],
            origins: Vec::new(),
            changed: Vec::new(),
        })
    }

    pub fn config(&self) -> &RipplerConfig {
        &self.cfg
    }

    /// Total complement mass of the current lattice.
    pub fn total_mass(&self) -> f64 {
        self.row_mass.iter().sum()
    }

    fn pressure(&self) -> &Pressure {
        self.pressure.as_ref().expect("prepare() must run before sweep()")
    }

    /// p_UC for individual j at step t given the colonised counts of row t−1.
    #[inline]
    fn p_uc(&self, t: usize, j: usize, counts: &RowCounts) -> f64 {
        let h = counts.households[self.ctx.population.household_of(j)];
        self.pressure().colonisation_prob(t, j, counts.global, h)
    }

    /// One proposal; returns the record of the step.
    pub fn step<R: Rng + ?Sized>(&mut self, x: &mut ColonisationMatrix, rng: &mut R) -> Result<RipplerStepRecord> {
        let n = self.n;
        let total: f64 = self.row_mass.iter().sum();
        if !(total > 0.0) {
            return Err(ModelError::NoPerturbableCell);
        }

        // Select origins and their new draws.
        self.origins.clear();
        for _ in 0..self.cfg.n_elements {
            let (t, j) = self.select_cell(total, rng.random::<f64>());
            let k = t * n + j;
            let prev = if t == 0 { 0 } else { x.get(t - 1, j) };
            let (a, b) = interval(fired(t, prev, x.get(t, j)), self.thr[k]);
            let u = complement_draw(a, b, rng);
            self.origins.retain(|o| (o.0, o.1) != (t, j));
            self.origins.push((t, j, u));
        }
        let t_min = self.origins.iter().map(|o| o.0).min().expect("at least one origin");
        let t_max = self.origins.iter().map(|o| o.0).max().expect("at least one origin");

        // Ripple forward.
        self.changed.clear();
        let mut last_processed = t_min;
        let mut prev_row_changed = false;
        for t in t_min..=self.n_steps {
            if t > t_min && !prev_row_changed && t > t_max {
                break;
            }
            last_processed = t;
            let changed_before = self.changed.len();
            self.ripple_row(t, t == t_min || !prev_row_changed, x, rng);
            prev_row_changed = self.changed.len() > changed_before;
            // Counts of row t under X*, needed by row t + 1.
            let pop = self.ctx.population;
            let row_counts = &mut self.counts_star[t];
            row_counts.global = self.counts[t].global;
            row_counts.households.copy_from_slice(&self.counts[t].households);
            for &(ct, cj) in &self.changed[changed_before..] {
                debug_assert_eq!(ct, t);
                let hh = pop.household_of(cj);
                if self.star[ct * n + cj] == 1 {
                    row_counts.global += 1;
                    row_counts.households[hh] += 1;
                } else {
                    row_counts.global -= 1;
                    row_counts.households[hh] -= 1;
                }
            }
        }

        // Reverse complement mass: rows outside the ripple keep their totals.
        let mut total_star = 0.0;
        for t in 0..=self.n_steps {
            total_star += if (t_min..=last_processed).contains(&t) { self.row_mass_star[t] } else { self.row_mass[t] };
        }

        let mut log_obs = 0.0;
        for &(t, j) in &self.changed {
            let r = self.y.get(t, j);
            log_obs += self.obs.get(r, self.star[t * n + j]) - self.obs.get(r, x.get(t, j));
        }
        let k_el = self.cfg.n_elements as f64;
        let log_acceptance = if total_star > 0.0 {
            log_obs + k_el * (total.ln() - total_star.ln())
        } else {
            f64::NEG_INFINITY
        };
        let accepted = rng.random::<f64>().ln() < log_acceptance;

        let rows = t_min..=last_processed;
        if accepted {
            for &(t, j) in &self.changed {
                x.set(t, j, self.star[t * n + j]);
            }
            for t in rows {
                let span = t * n..(t + 1) * n;
                self.thr[span.clone()].copy_from_slice(&self.thr_star[span.clone()]);
                self.mass[span.clone()].copy_from_slice(&self.mass_star[span]);
                self.row_mass[t] = self.row_mass_star[t];
                self.counts[t].global = self.counts_star[t].global;
                let (src, dst) = (&self.counts_star[t].households, &mut self.counts[t].households);
                dst.copy_from_slice(src);
            }
        } else {
            for &(t, j) in &self.changed {
                self.star[t * n + j] = x.get(t, j);
            }
        }
        Ok(RipplerStepRecord {
            accepted,
            origins: self.origins.iter().map(|o| (o.0, o.1)).collect(),
            cells_changed: self.changed.len(),
            log_acceptance,
        })
    }

    fn select_cell(&self, total: f64, r: f64) -> (usize, usize) {
        let n = self.n;
        let mut target = total * r;
        let mut row = None;
        for (t, &m) in self.row_mass.iter().enumerate() {
            if target < m {
                row = Some(t);
                break;
            }
            target -= m;
        }
        let t = row.unwrap_or_else(|| self.row_mass.iter().rposition(|&m| m > 0.0).expect("positive total"));
        let masses = &self.mass[t * n..(t + 1) * n];
        for (j, &m) in masses.iter().enumerate() {
            if target < m {
                return (t, j);
            }
            target -= m;
        }
        (t, masses.iter().rposition(|&m| m > 0.0).expect("row has positive mass"))
    }

    /// Realises row t of X* and its complement masses. When
    /// `context_unchanged`, row t − 1 of X* equals that of X and only origin
    /// cells can differ.
    fn ripple_row<R: Rng + ?Sized>(&mut self, t: usize, context_unchanged: bool, x: &ColonisationMatrix, rng: &mut R) {
        let n = self.n;
        let base = t * n;
        let span = base..base + n;
        if context_unchanged {
            self.thr_star[span.clone()].copy_from_slice(&self.thr[span.clone()]);
            self.mass_star[span.clone()].copy_from_slice(&self.mass[span.clone()]);
            for idx in 0..self.origins.len() {
                let (ot, j, u) = self.origins[idx];
                if ot != t {
                    continue;
                }
                let prev = if t == 0 { 0 } else { x.get(t - 1, j) };
                let thr = self.thr[base + j];
                let v = outcome(t, prev, u, thr);
                self.set_star(t, j, v, x);
                self.mass_star[base + j] = cell_mass(fired(t, prev, v), thr);
            }
            self.row_mass_star[t] = self.mass_star[span].iter().sum();
            return;
        }

        let pressure = self.pressure.as_ref().expect("prepare() must run before sweep()");
        let household_of = self.ctx.population.households();
        let (g, g_star) = (self.counts[t - 1].global, self.counts_star[t - 1].global);
        let (hh, hh_star) = (&self.counts[t - 1].households, &self.counts_star[t - 1].households);
        let x_prev = x.row(t - 1);
        let x_cur = x.row(t);
        let (before, after) = self.star.split_at_mut(base);
        let star_prev = &before[base - n..];
        let star_cur = &mut after[..n];
        let thr_row = &self.thr[span.clone()];
        let thr_star_row = &mut self.thr_star[span.clone()];
        let mass_star_row = &mut self.mass_star[span.clone()];
        let mut row_total = 0.0;
        for j in 0..n {
            let prev = x_prev[j];
            let prev_star = star_prev[j];
            let cur = x_cur[j];
            let thr = thr_row[j];
            let thr_star = if prev_star == 1 {
                self.p_cu
            } else {
                let h = household_of[j];
                if prev == 0 && g_star == g && hh_star[h] == hh[h] {
                    thr
                } else {
                    pressure.colonisation_prob(t, j, g_star, hh_star[h])
                }
            };
            thr_star_row[j] = thr_star;
            let origin = self.origins.iter().find(|o| o.0 == t && o.1 == j).map(|o| o.2);
            let v = match origin {
                Some(u) => outcome(t, prev_star, u, thr_star),
                None if prev_star == prev && thr_star == thr => cur,
                None => {
                    let (a, b) = interval(fired(t, prev, cur), thr);
                    // Outcomes decided by the interval alone need no draw.
                    if thr_star <= a {
                        outcome(t, prev_star, a.max(thr_star), thr_star)
                    } else if thr_star >= b {
                        outcome(t, prev_star, 0.0, thr_star)
                    } else {
                        outcome(t, prev_star, uniform_in(a, b, rng), thr_star)
                    }
                }
            };
            // Each cell of a fully recomputed row is visited once, starting
            // from X.
            if v != cur {
                star_cur[j] = v;
                self.changed.push((t, j));
            }
            let m = cell_mass(fired(t, prev_star, v), thr_star);
            mass_star_row[j] = m;
            row_total += m;
        }
        self.row_mass_star[t] = row_total;
    }

    #[inline]
    fn set_star(&mut self, t: usize, j: usize, v: u8, x: &ColonisationMatrix) {
        let k = t * self.n + j;
        if self.star[k] != v {
            self.star[k] = v;
            if v != x.get(t, j) {
                self.changed.push((t, j));
            } else {
                self.changed.retain(|&c| c != (t, j));
            }
        }
    }
}

impl LatentUpdater for RipplerKernel<'_> {
    fn name(&self) -> &'static str {
        "rippler"
    }

    fn prepare(&mut self, theta: &ModelParams, x: &ColonisationMatrix) -> Result<()> {
        if x.n_steps() != self.n_steps || x.n_individuals() != self.n {
            return Err(ModelError::InvalidInput("lattice shape does not match the data".into()));
        }
        self.pressure = Some(Pressure::new(theta, &self.ctx, self.n_steps));
        let n = self.n;
        let pop = self.ctx.population;
        for t in 0..=self.n_steps {
            self.counts[t] = RowCounts::of_row(x.row(t), pop);
        }
        let p0 = self.ctx.fixed.p0;
        for t in 0..=self.n_steps {
            let mut row_total = 0.0;
            for j in 0..n {
                let k = t * n + j;
                let prev = if t == 0 { 0 } else { x.get(t - 1, j) };
                let cur = x.get(t, j);
                let thr = if t == 0 {
                    p0
                } else if prev == 1 {
                    self.p_cu
                } else {
                    self.p_uc(t, j, &self.counts[t - 1])
                };
                if t > 0 && prev == 0 && cur == 1 && thr <= 0.0 {
                    return Err(ModelError::InvalidState { t, individual: j });
                }
                self.thr[k] = thr;
                let m = cell_mass(fired(t, prev, cur), thr);
                self.mass[k] = m;
                row_total += m;
            }
            self.row_mass[t] = row_total;
        }
        self.star.copy_from_slice(x.as_slice());
        Ok(())
    }

    fn sweep<R: Rng + ?Sized>(
        &mut self,
        x: &mut ColonisationMatrix,
        n_updates: usize,
        rng: &mut R,
        stats: &mut LatentStats,
    ) -> Result<()> {
        stats.ensure_rows(self.n_steps + 1);
        for _ in 0..n_updates {
            match self.step(x, rng) {
                Ok(rec) => {
                    let origin = rec.origins.iter().map(|o| o.0).min().unwrap_or(0);
                    stats.record(rec.accepted, if rec.accepted { rec.cells_changed } else { 0 }, Some(origin));
                }
                Err(ModelError::NoPerturbableCell) => stats.record_infeasible(),
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}
