use rand::Rng;

use super::{
    ColonisationMatrix, Context, FixedModel, ModelParams, ObservationMatrix, Pressure, RowCounts,
    TestResult,
};

/// log P(x_t = cur | x_{t−1} = prev) given the pressure λ on the individual.
#[inline]
pub fn transition_log_prob(prev: u8, cur: u8, lambda: f64, fixed: &FixedModel) -> f64 {
    let step = fixed.step_weeks;
    match (prev, cur) {
        (0, 0) => -lambda * step,
        (0, _) => (-libm::expm1(-lambda * step)).ln(),
        (_, 0) => fixed.clearance_prob().ln(),
        _ => -fixed.gamma * step,
    }
}

/// log π(X | θ). Returns −∞ for lattices with zero density.
pub fn transmission_log_density(x: &ColonisationMatrix, theta: &ModelParams, ctx: &Context<'_>) -> f64 {
    let n = x.n_individuals();
    let fixed = ctx.fixed;
    let n0 = x.row_count(0) as f64;
    let mut total = n0 * fixed.p0.ln() + (n as f64 - n0) * (-fixed.p0).ln_1p();
    let pressure = Pressure::new(theta, ctx, x.n_steps());
    let log_clear = fixed.clearance_prob().ln();
    let log_stay = -fixed.gamma * fixed.step_weeks;
    for t in 1..=x.n_steps() {
        let counts = RowCounts::of_row(x.row(t - 1), ctx.population);
        let (prev, cur) = (x.row(t - 1), x.row(t));
        let mut row_total = 0.0;
        for j in 0..n {
            row_total += match (prev[j], cur[j]) {
                (0, 0) => {
                    let h = counts.household_others(ctx.population, j, 0);
                    -pressure.rate(t, j, counts.global, h) * pressure.step()
                }
                (0, _) => {
                    let h = counts.household_others(ctx.population, j, 0);
                    pressure.colonisation_prob(t, j, counts.global, h).ln()
                }
                (_, 0) => log_clear,
                _ => log_stay,
            };
        }
        total += row_total;
    }
    total
}

/// Log factors of a single test outcome, indexed by (result, state).
#[derive(Debug, Clone, Copy)]
pub struct ObservationLogFactors {
    pos_given_col: f64,
    neg_given_col: f64,
    pos_given_uncol: f64,
    neg_given_uncol: f64,
}

impl ObservationLogFactors {
    pub fn new(fixed: &FixedModel) -> Self {
        Self {
            pos_given_col: fixed.sensitivity.ln(),
            neg_given_col: (-fixed.sensitivity).ln_1p(),
            pos_given_uncol: (-fixed.specificity).ln_1p(),
            neg_given_uncol: fixed.specificity.ln(),
        }
    }

    #[inline]
    pub fn get(&self, result: TestResult, state: u8) -> f64 {
        match (result, state) {
            (TestResult::NotTested, _) => 0.0,
            (TestResult::Positive, 1) => self.pos_given_col,
            (TestResult::Negative, 1) => self.neg_given_col,
            (TestResult::Positive, _) => self.pos_given_uncol,
            (TestResult::Negative, _) => self.neg_given_uncol,
        }
    }
}

/// log P(y | x) for a single cell; 0 for untested cells.
pub fn cell_observation_log_factor(result: TestResult, state: u8, fixed: &FixedModel) -> f64 {
    ObservationLogFactors::new(fixed).get(result, state)
}

/// log π(Y | X) = TP ln s_e + FN ln(1−s_e) + TN ln s_p + FP ln(1−s_p).
pub fn observation_log_density(y: &ObservationMatrix, x: &ColonisationMatrix, fixed: &FixedModel) -> f64 {
    assert!(x.same_shape(y), "observation and colonisation lattices differ in shape");
    let f = ObservationLogFactors::new(fixed);
    let (mut tp, mut fneg, mut fpos, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (t, j, r) in y.tested_cells() {
        match (r, x.get(t, j)) {
            (TestResult::Positive, 1) => tp += 1,
            (TestResult::Negative, 1) => fneg += 1,
            (TestResult::Positive, _) => fpos += 1,
            _ => tn += 1,
        }
    }
    let term = |count: usize, log_factor: f64| if count == 0 { 0.0 } else { count as f64 * log_factor };
    term(tp, f.pos_given_col) + term(fneg, f.neg_given_col) + term(tn, f.neg_given_uncol) + term(fpos, f.pos_given_uncol)
}

/// Draws test outcomes at the scheduled `(t, j)` cells.
pub fn simulate_observations<R: Rng + ?Sized>(
    x: &ColonisationMatrix,
    schedule: &[(usize, usize)],
    fixed: &FixedModel,
    rng: &mut R,
) -> ObservationMatrix {
    let mut y = ObservationMatrix::untested(x.n_steps(), x.n_individuals()).expect("valid shape");
    for &(t, j) in schedule {
        let p_pos = if x.get(t, j) == 1 { fixed.sensitivity } else { 1.0 - fixed.specificity };
        let u: f64 = rng.random();
        let r = if u < p_pos { TestResult::Positive } else { TestResult::Negative };
        y.set(t, j, r);
    }
    y
}
