use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

fn check_shape(n_steps: usize, n_individuals: usize) -> Result<()> {
    if n_steps == 0 || n_individuals == 0 {
        return Err(ModelError::InvalidInput(format!(
            "lattice needs T >= 1 and N >= 1, got T={n_steps}, N={n_individuals}"
        )));
    }
    Ok(())
}

/// Binary lattice of true colonisation states, (T+1) × N.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColonisationMatrix {
    n_steps: usize,
    n_individuals: usize,
    states: Vec<u8>,
}

impl ColonisationMatrix {
    pub fn zeros(n_steps: usize, n_individuals: usize) -> Result<Self> {
        check_shape(n_steps, n_individuals)?;
        Ok(Self { n_steps, n_individuals, states: vec![0; (n_steps + 1) * n_individuals] })
    }

    /// Builds a lattice from `T+1` rows of length `N`.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(ModelError::InvalidInput("need at least two rows".into()));
        }
        let n = rows[0].len();
        let mut x = Self::zeros(rows.len() - 1, n)?;
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::InvalidInput(format!("row {t} has length {}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(ModelError::InvalidInput(format!("entry ({t},{j}) = {v} is not binary")));
                }
                x.set(t, j, v);
            }
        }
        Ok(x)
    }

    /// Decodes a lattice from the low `(T+1)·N` bits of `code`, bit `t·N + j`
    /// holding `x[t][j]`. Used for exhaustive enumeration of tiny lattices.
    pub fn from_code(code: u64, n_steps: usize, n_individuals: usize) -> Self {
        let cells = (n_steps + 1) * n_individuals;
        debug_assert!(cells <= 64);
        let states = (0..cells).map(|k| ((code >> k) & 1) as u8).collect();
        Self { n_steps, n_individuals, states }
    }

    pub fn to_code(&self) -> u64 {
        debug_assert!(self.states.len() <= 64);
        self.states
            .iter()
            .enumerate()
            .fold(0u64, |acc, (k, &v)| acc | (u64::from(v) << k))
    }

    /// T, the number of transitions.
    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_steps + 1
    }

    #[inline]
    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    #[inline]
    pub fn get(&self, t: usize, j: usize) -> u8 {
        self.states[t * self.n_individuals + j]
    }

    #[inline]
    pub fn set(&mut self, t: usize, j: usize, v: u8) {
        debug_assert!(v <= 1);
        self.states[t * self.n_individuals + j] = v;
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[u8] {
        &self.states[t * self.n_individuals..(t + 1) * self.n_individuals]
    }

    #[inline]
    pub fn row_mut(&mut self, t: usize) -> &mut [u8] {
        let n = self.n_individuals;
        &mut self.states[t * n..(t + 1) * n]
    }

    pub fn column(&self, j: usize) -> Vec<u8> {
        (0..self.n_rows()).map(|t| self.get(t, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[u8]) {
        debug_assert_eq!(col.len(), self.n_rows());
        for (t, &v) in col.iter().enumerate() {
            self.set(t, j, v);
        }
    }

    pub fn row_count(&self, t: usize) -> usize {
        self.row(t).iter().map(|&v| v as usize).sum()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.states
    }

    pub fn same_shape<T>(&self, other: &Lattice<T>) -> bool {
        self.n_steps == other.n_steps && self.n_individuals == other.n_individuals
    }

    /// Number of cells where the two lattices differ.
    pub fn hamming(&self, other: &Self) -> usize {
        self.states.iter().zip(&other.states).filter(|(a, b)| a != b).count()
    }
}

/// Generic dense (T+1) × N lattice used for the real-valued and ternary
/// companions of [`ColonisationMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice<T> {
    n_steps: usize,
    n_individuals: usize,
    cells: Vec<T>,
}

impl<T: Copy> Lattice<T> {
    pub fn filled(n_steps: usize, n_individuals: usize, value: T) -> Result<Self> {
        check_shape(n_steps, n_individuals)?;
        Ok(Self { n_steps, n_individuals, cells: vec![value; (n_steps + 1) * n_individuals] })
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_steps + 1
    }

    #[inline]
    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    #[inline]
    pub fn get(&self, t: usize, j: usize) -> T {
        self.cells[t * self.n_individuals + j]
    }

    #[inline]
    pub fn set(&mut self, t: usize, j: usize, v: T) {
        self.cells[t * self.n_individuals + j] = v;
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[T] {
        &self.cells[t * self.n_individuals..(t + 1) * self.n_individuals]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), T)> + '_ {
        let n = self.n_individuals;
        self.cells.iter().enumerate().map(move |(k, &v)| ((k / n, k % n), v))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.cells
    }
}

/// Lattice of uniform draws U such that X = f(U, θ).
pub type NoncentredMatrix = Lattice<f64>;

impl NoncentredMatrix {
    pub fn from_values(n_steps: usize, n_individuals: usize, cells: Vec<f64>) -> Result<Self> {
        check_shape(n_steps, n_individuals)?;
        if cells.len() != (n_steps + 1) * n_individuals {
            return Err(ModelError::InvalidInput("draw count does not match lattice shape".into()));
        }
        if let Some(v) = cells.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return Err(ModelError::InvalidInput(format!("draw {v} outside [0, 1)")));
        }
        Ok(Self { n_steps, n_individuals, cells })
    }
}

/// Outcome of a diagnostic test at one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum TestResult {
    NotTested = 0,
    Negative = 1,
    Positive = 2,
}

pub type ObservationMatrix = Lattice<TestResult>;

impl ObservationMatrix {
    pub fn untested(n_steps: usize, n_individuals: usize) -> Result<Self> {
        Self::filled(n_steps, n_individuals, TestResult::NotTested)
    }

    pub fn n_tested(&self) -> usize {
        self.cells.iter().filter(|&&r| r != TestResult::NotTested).count()
    }

    pub fn tested_cells(&self) -> impl Iterator<Item = (usize, usize, TestResult)> + '_ {
        self.iter()
            .filter(|(_, r)| *r != TestResult::NotTested)
            .map(|((t, j), r)| (t, j, r))
    }
}

/// Per-cell consistency interval [a, b) of the uniform draw behind each
/// latent state, given θ and X.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalBounds {
    pub lower: Lattice<f64>,
    pub upper: Lattice<f64>,
}

impl ProposalBounds {
    #[inline]
    pub fn interval(&self, t: usize, j: usize) -> (f64, f64) {
        (self.lower.get(t, j), self.upper.get(t, j))
    }

    /// Length of (0,1) \ [a, b), i.e. 1 + a − b.
    #[inline]
    pub fn complement_mass(&self, t: usize, j: usize) -> f64 {
        let (a, b) = self.interval(t, j);
        1.0 + a - b
    }

    /// Σ_{t,j} (1 + a − b), accumulated row by row.
    pub fn total_complement_mass(&self) -> f64 {
        let n = self.lower.n_individuals();
        (0..self.lower.n_rows())
            .map(|t| (0..n).map(|j| self.complement_mass(t, j)).sum::<f64>())
            .sum()
    }

    pub fn n_steps(&self) -> usize {
        self.lower.n_steps()
    }

    pub fn n_individuals(&self) -> usize {
        self.lower.n_individuals()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(ColonisationMatrix::zeros(0, 3).is_err());
        assert!(ColonisationMatrix::zeros(2, 0).is_err());
        assert!(ColonisationMatrix::from_rows(&[vec![0, 1], vec![2, 0]]).is_err());
    }

    #[test]
    fn code_round_trip() {
        let x = ColonisationMatrix::from_rows(&[vec![1, 0], vec![1, 1], vec![0, 1]]).unwrap();
        let code = x.to_code();
        assert_eq!(ColonisationMatrix::from_code(code, 2, 2), x);
        assert_eq!(code, 0b10_11_01);
    }

    #[test]
    fn noncentred_rejects_values_outside_unit_interval() {
        assert!(NoncentredMatrix::from_values(1, 1, vec![0.2, 1.0]).is_err());
        assert!(NoncentredMatrix::from_values(1, 1, vec![0.0, 0.999]).is_ok());
    }
}
