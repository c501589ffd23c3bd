use std::f64::consts::PI;

use super::{Context, FixedModel, ModelParams, Population};

/// ς_t = 1 − cos(2π(t + t★)/T★).
pub fn seasonal_modifier(t: usize, fixed: &FixedModel) -> f64 {
    1.0 - (2.0 * PI * (t as f64 + fixed.season_offset) / fixed.season_period).cos()
}

/// Colonised totals of one row: overall and per household.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowCounts {
    pub global: usize,
    pub households: Vec<usize>,
}

impl RowCounts {
    pub fn of_row(row: &[u8], population: &Population) -> Self {
        let mut households = vec![0; population.n_households()];
        let mut global = 0;
        for (j, &x) in row.iter().enumerate() {
            if x == 1 {
                global += 1;
                households[population.household_of(j)] += 1;
            }
        }
        Self { global, households }
    }

    /// Colonised members of `j`'s household other than `j`, given `j`'s own
    /// state in the same row.
    #[inline]
    pub fn household_others(&self, population: &Population, j: usize, own_state: u8) -> usize {
        self.households[population.household_of(j)] - own_state as usize
    }
}

/// θ-dependent pieces of the colonisation pressure, precomputed so that
/// λ_j(t) is a couple of multiplications given the previous row's counts:
///
/// λ_j(t) = e^{δ·c_j} (β_G ς_{t−1} g/N + β_G β_H h_j)
///
/// with g the colonised total and h_j the colonised members of j's
/// household (excluding j) at t − 1.
#[derive(Debug, Clone)]
pub struct Pressure {
    covariate_factor: Vec<f64>,
    /// Indexed by step t ≥ 1: β_G ς_{t−1} / N.
    global_coef: Vec<f64>,
    household_coef: f64,
    step: f64,
}

impl Pressure {
    pub fn new(theta: &ModelParams, ctx: &Context<'_>, n_steps: usize) -> Self {
        let pop = ctx.population;
        let n = pop.n_individuals() as f64;
        let covariate_factor = (0..pop.n_individuals())
            .map(|j| {
                let c = pop.covariates(j);
                (theta.delta_a * c[0] + theta.delta_s * c[1]).exp()
            })
            .collect();
        let global_coef = (0..=n_steps)
            .map(|t| {
                if t == 0 {
                    0.0
                } else {
                    theta.beta_g * seasonal_modifier(t - 1, ctx.fixed) / n
                }
            })
            .collect();
        Self {
            covariate_factor,
            global_coef,
            household_coef: theta.beta_g * theta.beta_h,
            step: ctx.fixed.step_weeks,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.global_coef.len() - 1
    }

    #[inline]
    pub fn covariate_factor(&self, j: usize) -> f64 {
        self.covariate_factor[j]
    }

    #[inline]
    pub fn global_coef(&self, t: usize) -> f64 {
        self.global_coef[t]
    }

    #[inline]
    pub fn household_coef(&self) -> f64 {
        self.household_coef
    }

    #[inline]
    pub fn step(&self) -> f64 {
        self.step
    }

    /// λ_j(t) from the previous row's colonised total and j's colonised
    /// household members.
    #[inline]
    pub fn rate(&self, t: usize, j: usize, global: usize, household: usize) -> f64 {
        self.covariate_factor[j]
            * (self.global_coef[t] * global as f64 + self.household_coef * household as f64)
    }

    /// p_UC = 1 − e^{−λΔ}.
    #[inline]
    pub fn colonisation_prob(&self, t: usize, j: usize, global: usize, household: usize) -> f64 {
        -libm::expm1(-self.rate(t, j, global, household) * self.step)
    }
}

/// λ_j(t, x_{t−1}, θ) for every individual, whatever its own state.
pub fn colonisation_pressure(
    t: usize,
    x_prev: &[u8],
    theta: &ModelParams,
    population: &Population,
    fixed: &FixedModel,
) -> Vec<f64> {
    assert!(t >= 1, "pressure is defined for steps t >= 1");
    assert_eq!(x_prev.len(), population.n_individuals());
    let ctx = Context::new(population, fixed);
    let pressure = Pressure::new(theta, &ctx, t);
    let counts = RowCounts::of_row(x_prev, population);
    (0..x_prev.len())
        .map(|j| {
            let h = counts.household_others(population, j, x_prev[j]);
            pressure.rate(t, j, counts.global, h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fixed_with_offset(offset: f64) -> FixedModel {
        FixedModel { season_offset: offset, ..FixedModel::default() }
    }

    #[test]
    fn seasonal_point_values() {
        let f = fixed_with_offset(17.0);
        assert_abs_diff_eq!(seasonal_modifier(20, &f), 1.24, epsilon = 0.005);
        assert_abs_diff_eq!(seasonal_modifier(35, &f), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(seasonal_modifier(9, &f), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn seasonal_bounds_and_period() {
        let f = fixed_with_offset(17.0);
        for t in 0..200 {
            let s = seasonal_modifier(t, &f);
            assert!((0.0..=2.0).contains(&s));
            assert_abs_diff_eq!(s, seasonal_modifier(t + 52, &f), epsilon = 1e-9);
        }
    }

    #[test]
    fn pressure_two_person_household() {
        // ς_{t-1} = 1 needs (t - 1 + t★) ≡ 13 (mod 52); with t = 1, t★ = 13.
        let f = fixed_with_offset(13.0);
        let pop = Population::single_household(2).unwrap();
        let theta = ModelParams::new(0.1, 1.5, 0.0, 0.0);
        let lam = colonisation_pressure(1, &[1, 0], &theta, &pop, &f);
        assert_abs_diff_eq!(lam[1], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn pressure_matches_dense_household_matrix() {
        let pop = Population::new(
            vec![0, 0, 1, 1, 1, 2],
            vec![[1.5, 0.4], [-2.0, -0.6], [0.3, 0.4], [10.0, -0.6], [-4.0, 0.4], [0.0, 0.0]],
        )
        .unwrap();
        let f = FixedModel::default();
        let theta = ModelParams::new(0.3, 2.0, 0.02, -0.4);
        let x_prev = [1, 0, 1, 1, 0, 1];
        let t = 7;
        let got = colonisation_pressure(t, &x_prev, &theta, &pop, &f);

        let h = pop.household_matrix();
        let n = x_prev.len() as f64;
        let total: f64 = x_prev.iter().map(|&v| v as f64).sum();
        let season = 1.0 - (2.0 * PI * ((t - 1) as f64 + 17.0) / 52.0).cos();
        for j in 0..x_prev.len() {
            let c = pop.covariates(j);
            let hh: f64 = (0..x_prev.len()).map(|i| h[i][j] as f64 * x_prev[i] as f64).sum();
            let expect = (theta.delta_a * c[0] + theta.delta_s * c[1]).exp()
                * (theta.beta_g * season * total / n + theta.beta_g * theta.beta_h * hh);
            assert_abs_diff_eq!(got[j], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn no_colonised_means_no_pressure() {
        let pop = Population::single_household(4).unwrap();
        let lam = colonisation_pressure(3, &[0; 4], &ModelParams::new(1.0, 1.0, 0.3, 0.3), &pop, &FixedModel::default());
        assert!(lam.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn pressure_monotone_in_beta_g() {
        let pop = Population::new(vec![0, 0, 1, 1], vec![[1.0, 0.5], [0.0, -0.5], [2.0, 0.5], [-1.0, 0.5]]).unwrap();
        let f = FixedModel::default();
        let x = [1, 0, 0, 1];
        let mut last = vec![0.0; 4];
        for k in 0..20 {
            let theta = ModelParams::new(0.05 * k as f64, 1.2, 0.1, 0.2);
            let lam = colonisation_pressure(5, &x, &theta, &pop, &f);
            for j in 0..4 {
                assert!(lam[j] >= last[j]);
            }
            last = lam;
        }
    }
}
