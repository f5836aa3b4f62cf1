//! Sampled trajectories and the snapshot matrices built from them.

use crate::numerics::RealMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("trajectory needs at least 2 samples, got {0}")]
    TrajectoryTooShort(usize),
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state entries must be finite")]
    NonFiniteState,
    #[error("sampling interval must be positive and finite, got {0}")]
    InvalidSamplingInterval(f64),
    #[error("start index must be finite")]
    NonFiniteStartIndex,
    #[error("a nonzero start index requires exactly one trajectory ({0} given)")]
    StartIndexRequiresSingleTrajectory(usize),
    #[error("trajectory set must contain at least one trajectory")]
    Empty,
}

/// One run of a dynamical system: an ordered list of n-dimensional states
/// sampled at a fixed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Build from states, validating shared dimension and finiteness.
    pub fn new(states: Vec<Vec<f64>>) -> Result<Self, TrajectoryError> {
        if states.is_empty() {
            return Err(TrajectoryError::TrajectoryTooShort(0));
        }
        let n = states[0].len();
        if n == 0 {
            return Err(TrajectoryError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        for s in &states {
            if s.len() != n {
                return Err(TrajectoryError::DimensionMismatch {
                    expected: n,
                    got: s.len(),
                });
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(TrajectoryError::NonFiniteState);
            }
        }
        Ok(Self { states })
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }
}

/// A collection of runs sharing one sampling interval, plus the index (in
/// original units) of the first sample of the first trajectory.
///
/// A nonzero start index is only meaningful for a single run: with several
/// runs there is no common time origin, so the set is anchored at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    trajectories: Vec<Trajectory>,
    delta_k: f64,
    start_index: f64,
}

impl TrajectorySet {
    pub fn new(
        trajectories: Vec<Trajectory>,
        delta_k: f64,
        start_index: f64,
    ) -> Result<Self, TrajectoryError> {
        if trajectories.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        if !(delta_k.is_finite() && delta_k > 0.0) {
            return Err(TrajectoryError::InvalidSamplingInterval(delta_k));
        }
        if !start_index.is_finite() {
            return Err(TrajectoryError::NonFiniteStartIndex);
        }
        if start_index != 0.0 && trajectories.len() != 1 {
            return Err(TrajectoryError::StartIndexRequiresSingleTrajectory(
                trajectories.len(),
            ));
        }
        let n = trajectories[0].dim();
        for t in &trajectories {
            if t.dim() != n {
                return Err(TrajectoryError::DimensionMismatch {
                    expected: n,
                    got: t.dim(),
                });
            }
            if t.len() < 2 {
                return Err(TrajectoryError::TrajectoryTooShort(t.len()));
            }
        }
        Ok(Self {
            trajectories,
            delta_k,
            start_index,
        })
    }

    /// Single-trajectory convenience constructor.
    pub fn single(
        states: Vec<Vec<f64>>,
        delta_k: f64,
        start_index: f64,
    ) -> Result<Self, TrajectoryError> {
        Self::new(vec![Trajectory::new(states)?], delta_k, start_index)
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn dim(&self) -> usize {
        self.trajectories[0].dim()
    }

    pub fn delta_k(&self) -> f64 {
        self.delta_k
    }

    pub fn start_index(&self) -> f64 {
        self.start_index
    }

    /// First sample of the first trajectory; predictions are anchored to it.
    pub fn first_state(&self) -> &[f64] {
        &self.trajectories[0].states()[0]
    }

    /// Total number of snapshot pairs across all runs.
    pub fn pair_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.len() - 1).sum()
    }

    /// Shift so the first sample sits at index zero, leaving the data
    /// untouched. Used for comparing offset-anchored fits.
    pub fn with_start_index(&self, start_index: f64) -> Result<Self, TrajectoryError> {
        Self::new(self.trajectories.clone(), self.delta_k, start_index)
    }
}

/// The paired snapshot matrices: `x` drops each run's last sample and
/// `x_prime` drops each run's first sample, so column j of `x_prime` is the
/// successor of column j of `x`.
#[derive(Debug, Clone)]
pub struct SnapshotPair {
    pub x: RealMatrix,
    pub x_prime: RealMatrix,
}

impl SnapshotPair {
    pub fn columns(&self) -> usize {
        self.x.cols()
    }
}

/// Concatenate all runs into the snapshot pair. With T runs holding
/// `m_t + 1` samples each, both matrices are n x M with `M = sum(m_t)`.
pub fn build_snapshot_pair(data: &TrajectorySet) -> Result<SnapshotPair, TrajectoryError> {
    let n = data.dim();
    let total: usize = data.pair_count();
    let mut x = RealMatrix::zeros(n, total);
    let mut x_prime = RealMatrix::zeros(n, total);
    let mut col = 0;
    for t in data.trajectories() {
        if t.len() < 2 {
            return Err(TrajectoryError::TrajectoryTooShort(t.len()));
        }
        let states = t.states();
        for w in states.windows(2) {
            for i in 0..n {
                x[(i, col)] = w[0][i];
                x_prime[(i, col)] = w[1][i];
            }
            col += 1;
        }
    }
    Ok(SnapshotPair { x, x_prime })
}
