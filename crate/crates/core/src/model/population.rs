use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Household structure and (pre-centred) covariates of the N individuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    household_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    /// Centred (age in years, sex indicator) per individual.
    covariates: Vec<[f64; 2]>,
}

impl Population {
    /// `household_of[j]` is a dense household index in `0..H`.
    pub fn new(household_of: Vec<usize>, covariates: Vec<[f64; 2]>) -> Result<Self> {
        if household_of.is_empty() {
            return Err(ModelError::InvalidInput("population is empty".into()));
        }
        if covariates.len() != household_of.len() {
            return Err(ModelError::InvalidInput(format!(
                "{} covariate rows for {} individuals",
                covariates.len(),
                household_of.len()
            )));
        }
        if covariates.iter().flatten().any(|c| !c.is_finite()) {
            return Err(ModelError::InvalidInput("non-finite covariate".into()));
        }
        let n_households = household_of.iter().max().map_or(0, |&h| h + 1);
        let mut members = vec![Vec::new(); n_households];
        for (j, &h) in household_of.iter().enumerate() {
            members[h].push(j);
        }
        if let Some(h) = members.iter().position(Vec::is_empty) {
            return Err(ModelError::InvalidInput(format!("household index {h} has no members")));
        }
        Ok(Self { household_of, members, covariates })
    }

    /// Every individual in one household, all covariates zero.
    pub fn single_household(n: usize) -> Result<Self> {
        Self::new(vec![0; n], vec![[0.0, 0.0]; n])
    }

    /// Every individual alone in their own household, all covariates zero.
    pub fn singletons(n: usize) -> Result<Self> {
        Self::new((0..n).collect(), vec![[0.0, 0.0]; n])
    }

    #[inline]
    pub fn n_individuals(&self) -> usize {
        self.household_of.len()
    }

    #[inline]
    pub fn n_households(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn household_of(&self, j: usize) -> usize {
        self.household_of[j]
    }

    pub fn households(&self) -> &[usize] {
        &self.household_of
    }

    #[inline]
    pub fn members(&self, household: usize) -> &[usize] {
        &self.members[household]
    }

    #[inline]
    pub fn covariates(&self, j: usize) -> [f64; 2] {
        self.covariates[j]
    }

    /// Dense symmetric household incidence matrix with zero diagonal.
    pub fn household_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.n_individuals();
        let mut h = vec![vec![0u8; n]; n];
        for (i, row) in h.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                if i != j && self.household_of[i] == self.household_of[j] {
                    *cell = 1;
                }
            }
        }
        h
    }
}
