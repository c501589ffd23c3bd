use crate::error::{ModelError, Result};

/// One individual's path as its initial state plus the ordered times at which
/// the state changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSequence {
    pub initial: u8,
    pub times: Vec<usize>,
    pub n_steps: usize,
}

impl EventSequence {
    /// Events of a column `x_{0..=T}`.
    pub fn from_column(col: &[u8]) -> Self {
        let times = (1..col.len()).filter(|&t| col[t] != col[t - 1]).collect();
        Self { initial: col[0], times, n_steps: col.len() - 1 }
    }

    pub fn new(initial: u8, times: Vec<usize>, n_steps: usize) -> Result<Self> {
        if initial > 1 {
            return Err(ModelError::InvalidInput("initial state must be 0 or 1".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidInput("event times must be strictly increasing".into()));
        }
        if times.iter().any(|&t| t == 0 || t > n_steps) {
            return Err(ModelError::InvalidInput(format!("event times must lie in 1..={n_steps}")));
        }
        Ok(Self { initial, times, n_steps })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_column(&self) -> Vec<u8> {
        let mut col = Vec::with_capacity(self.n_steps + 1);
        let mut state = self.initial;
        let mut next = self.times.iter().peekable();
        for t in 0..=self.n_steps {
            if next.peek() == Some(&&t) {
                state = 1 - state;
                next.next();
            }
            col.push(state);
        }
        col
    }

    /// Whether event `e` (0-based) is a colonisation.
    pub fn is_colonisation(&self, e: usize) -> bool {
        (self.initial == 0) == e.is_multiple_of(2)
    }

    /// Time of the first event strictly after `t`, or T + 1.
    pub fn next_after(&self, t: usize) -> usize {
        let k = self.times.partition_point(|&s| s <= t);
        self.times.get(k).copied().unwrap_or(self.n_steps + 1)
    }
}
