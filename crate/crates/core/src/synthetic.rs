//! Synthetic study designs mirroring a longitudinal household carriage study:
//! 478 people in 110 households, followed for 62 weeks with a baseline test
//! and follow-ups roughly one, three and six months later.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::Result;
use crate::model::{
    simulate, simulate_observations, ColonisationMatrix, Context, FixedModel, ModelParams, ObservationMatrix,
    Population, TestResult,
};

pub const STUDY_WEEKS: usize = 62;
pub const STUDY_TESTS: usize = 1659;

/// (household size, number of households).
const HOUSEHOLD_SIZES: [(usize, usize); 10] = [
    (1, 1),
    (2, 16),
    (3, 23),
    (4, 25),
    (5, 19),
    (6, 12),
    (7, 8),
    (8, 4),
    (10, 1),
    (11, 1),
];
const N_FEMALE: usize = 286;
const AGE_SHAPE: f64 = 1.35;
const AGE_MEAN: f64 = 20.2;
/// Weeks after the baseline visit of the three follow-ups.
const FOLLOW_UP_WEEKS: [usize; 3] = [4, 13, 26];

/// Covariates centred on their sample means: (age, female indicator).
pub fn centre_covariates(ages: &[f64], female: &[bool]) -> Vec<[f64; 2]> {
    assert_eq!(ages.len(), female.len());
    let n = ages.len() as f64;
    let mean_age = ages.iter().sum::<f64>() / n;
    let mean_female = female.iter().filter(|&&f| f).count() as f64 / n;
    ages.iter()
        .zip(female)
        .map(|(&a, &f)| [a - mean_age, f64::from(u8::from(f)) - mean_female])
        .collect()
}

/// Household membership, raw covariates and the test schedule of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStudy {
    pub household_of: Vec<usize>,
    /// Age in years at first test.
    pub ages: Vec<f64>,
    pub female: Vec<bool>,
    /// Tested cells as `(week, individual)`, sorted.
    pub schedule: Vec<(usize, usize)>,
    pub n_steps: usize,
}

impl SyntheticStudy {
    /// Draws a study with the fixed household-size histogram, sex split and
    /// test count; ages, household baseline weeks and missed follow-ups are
    /// random.
    pub fn household_design<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut household_of = Vec::new();
        let mut h = 0;
        for &(size, count) in &HOUSEHOLD_SIZES {
            for _ in 0..count {
                household_of.extend(std::iter::repeat_n(h, size));
                h += 1;
            }
        }
        let n = household_of.len();
        let n_households = h;

        let gamma = Gamma::new(AGE_SHAPE, AGE_MEAN / AGE_SHAPE).expect("valid gamma parameters");
        let ages: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let mut female = vec![false; n];
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        for &j in &order[..N_FEMALE] {
            female[j] = true;
        }

        let last_start = STUDY_WEEKS - FOLLOW_UP_WEEKS[2];
        let baseline: Vec<usize> = (0..n_households).map(|_| rng.random_range(1..=last_start)).collect();
        let mut schedule: Vec<(usize, usize)> = (0..n).map(|j| (baseline[household_of[j]], j)).collect();
        let mut follow_ups: Vec<(usize, usize)> = (0..n)
            .flat_map(|j| FOLLOW_UP_WEEKS.iter().map(move |&d| (j, d)))
            .map(|(j, d)| (baseline[household_of[j]] + d, j))
            .collect();
        follow_ups.shuffle(rng);
        let keep = STUDY_TESTS - n;
        schedule.extend_from_slice(&follow_ups[..keep]);
        schedule.sort_unstable();

        Self { household_of, ages, female, schedule, n_steps: STUDY_WEEKS }
    }

    pub fn n_individuals(&self) -> usize {
        self.household_of.len()
    }

    pub fn population(&self) -> Result<Population> {
        Population::new(self.household_of.clone(), centre_covariates(&self.ages, &self.female))
    }
}

/// A study design together with a simulated epidemic and test results.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedStudy {
    pub study: SyntheticStudy,
    pub population: Population,
    pub truth: ColonisationMatrix,
    pub y: ObservationMatrix,
}

/// Draws a study design, simulates the epidemic under `theta` and tests the
/// scheduled cells, all from one generator.
pub fn simulate_study<R: Rng + ?Sized>(theta: &ModelParams, fixed: &FixedModel, rng: &mut R) -> Result<SimulatedStudy> {
    let study = SyntheticStudy::household_design(rng);
    let population = study.population()?;
    let ctx = Context::new(&population, fixed);
    let truth = simulate(theta, &ctx, study.n_steps, rng)?;
    let y = simulate_observations(&truth, &study.schedule, fixed, rng);
    Ok(SimulatedStudy { study, population, truth, y })
}

/// The generating values of the recovery study: θ = (0.1, 1.5, 0, 0) with the
/// default fixed model (γ = 0.5, p₀ = 0.3, s_e = 0.8, s_p = 0.99, t★ = 17).
pub fn recovery_truth() -> (ModelParams, FixedModel) {
    (ModelParams::new(0.1, 1.5, 0.0, 0.0), FixedModel::default())
}

/// A two-person household over three steps with two tests, small enough for
/// exact enumeration (8 cells).
#[derive(Debug, Clone, PartialEq)]
pub struct TinyInstance {
    pub population: Population,
    pub fixed: FixedModel,
    pub theta: ModelParams,
    pub y: ObservationMatrix,
}

pub fn tiny_reference_instance() -> TinyInstance {
    let population = Population::single_household(2).expect("valid population");
    let fixed = FixedModel::default();
    let theta = ModelParams::new(0.4, 2.0, 0.0, 0.0);
    let mut y = ObservationMatrix::untested(3, 2).expect("valid shape");
    y.set(1, 0, TestResult::Positive);
    y.set(3, 1, TestResult::Negative);
    TinyInstance { population, fixed, theta, y }
}
