//! Synthetic dynamical-system generators with closed-form reference
//! solutions. These serve as ground truth for tests, the acceptance suite,
//! and the demo commands.

use crate::numerics::{self, diag_power, ComplexMatrix, RealMatrix};
use crate::trajectory::{TrajectoryError, TrajectorySet};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SystemsError {
    #[error("generator matrix is not diagonalizable to working precision")]
    NonDiagonalizableGenerator,
    #[error("no closed form exists for this generator at index {0}")]
    NoClosedForm(f64),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// The transition rule of a synthetic system.
#[derive(Debug, Clone)]
pub enum GeneratorFamily {
    /// `x_{k+1} = A x_k` with a known real matrix.
    LinearDiscrete { matrix: RealMatrix },
    /// `dx/dt = A x`, sampled exactly through the eigendecomposition of `A`
    /// (so the per-step map is `e^{A delta_k}`).
    LinearContinuous { matrix: RealMatrix },
    /// `x_{k+1} = x_k + psi` with i.i.d. Gaussian noise per component.
    /// The stream is ChaCha8 keyed by `seed`, mapped through the
    /// cosine-branch Box-Muller transform (one draw per pair), so runs are
    /// reproducible across platforms.
    NoisyRandomWalk { sigma: f64, seed: u64 },
    /// The two-state benchmark `x1' = lambda x1`,
    /// `x2' = mu x2 + (lambda^2 - mu) x1^2`, whose lift by `[x1, x2, x1^2]`
    /// is exactly linear.
    SlowManifold { lambda: f64, mu: f64 },
}

/// A fully specified run: family, initial state at (virtual) index zero,
/// number of transitions, sampling interval, and the index of the first
/// emitted sample.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub family: GeneratorFamily,
    /// State at index zero in original units.
    pub x0: Vec<f64>,
    /// Number of transitions; the trajectory holds `steps + 1` samples.
    pub steps: usize,
    pub delta_k: f64,
    /// Original-units index of the first emitted sample.
    pub start_index: f64,
}

impl GeneratorSpec {
    fn validate(&self) -> Result<(), SystemsError> {
        if self.steps < 1 {
            return Err(SystemsError::InvalidSpec("steps must be >= 1".into()));
        }
        if !(self.delta_k.is_finite() && self.delta_k > 0.0) {
            return Err(SystemsError::InvalidSpec("delta_k must be positive".into()));
        }
        if self.x0.is_empty() || self.x0.iter().any(|v| !v.is_finite()) {
            return Err(SystemsError::InvalidSpec(
                "x0 must be nonempty and finite".into(),
            ));
        }
        match &self.family {
            GeneratorFamily::LinearDiscrete { matrix }
            | GeneratorFamily::LinearContinuous { matrix } => {
                if matrix.rows() != matrix.cols() || matrix.rows() != self.x0.len() {
                    return Err(SystemsError::InvalidSpec(format!(
                        "matrix must be square of dimension {}",
                        self.x0.len()
                    )));
                }
            }
            GeneratorFamily::NoisyRandomWalk { sigma, .. } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(SystemsError::InvalidSpec("sigma must be >= 0".into()));
                }
            }
            GeneratorFamily::SlowManifold { .. } => {
                if self.x0.len() != 2 {
                    return Err(SystemsError::InvalidSpec(
                        "slow-manifold system is two-dimensional".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Produce the sampled trajectory. Deterministic given the spec, including
/// the noise seed.
pub fn generate(spec: &GeneratorSpec) -> Result<TrajectorySet, SystemsError> {
    spec.validate()?;
    let samples = spec.steps + 1;
    let states: Vec<Vec<f64>> = match &spec.family {
        GeneratorFamily::LinearDiscrete { matrix } => {
            let mut first =
                state_linear_discrete(matrix, &spec.x0, spec.start_index / spec.delta_k)?;
            let mut out = Vec::with_capacity(samples);
            for _ in 0..samples {
                let next = matrix.matvec(&first);
                out.push(std::mem::replace(&mut first, next));
            }
            out
        }
        GeneratorFamily::LinearContinuous { matrix } => {
            let propagator = EigenPropagator::new(matrix)?;
            (0..samples)
                .map(|m| propagator.state_at(&spec.x0, spec.start_index + m as f64 * spec.delta_k))
                .collect()
        }
        GeneratorFamily::NoisyRandomWalk { sigma, seed } => {
            walk_states(&spec.x0, *sigma, *seed, spec.steps)
        }
        GeneratorFamily::SlowManifold { lambda, mu } => {
            let s0 = spec.start_index / spec.delta_k;
            let mut state = slow_manifold_state(*lambda, *mu, &spec.x0, s0)
                .ok_or(SystemsError::NoClosedForm(spec.start_index))?;
            let mut out = Vec::with_capacity(samples);
            for _ in 0..samples {
                let next = vec![
                    lambda * state[0],
                    mu * state[1] + (lambda * lambda - mu) * state[0] * state[0],
                ];
                out.push(std::mem::replace(&mut state, next));
            }
            out
        }
    };
    Ok(TrajectorySet::single(
        states,
        spec.delta_k,
        spec.start_index,
    )?)
}

/// Exact state at `index` (original units) where a closed form exists.
///
/// For the noisy walk the "closed form" is a deterministic replay of the
/// seeded stream, which only exists at sampled integer steps at or after
/// the origin.
pub fn true_state(spec: &GeneratorSpec, index: f64) -> Result<Vec<f64>, SystemsError> {
    spec.validate()?;
    let steps = index / spec.delta_k;
    match &spec.family {
        GeneratorFamily::LinearDiscrete { matrix } => {
            state_linear_discrete(matrix, &spec.x0, steps)
        }
        GeneratorFamily::LinearContinuous { matrix } => {
            let propagator = EigenPropagator::new(matrix)?;
            Ok(propagator.state_at(&spec.x0, index))
        }
        GeneratorFamily::NoisyRandomWalk { sigma, seed } => {
            if *sigma == 0.0 {
                return Ok(spec.x0.clone());
            }
            let m = steps.round();
            if (steps - m).abs() > 1e-9 || m < 0.0 {
                return Err(SystemsError::NoClosedForm(index));
            }
            Ok(walk_states(&spec.x0, *sigma, *seed, m as usize)
                .pop()
                .unwrap())
        }
        GeneratorFamily::SlowManifold { lambda, mu } => {
            slow_manifold_state(*lambda, *mu, &spec.x0, steps)
                .ok_or(SystemsError::NoClosedForm(index))
        }
    }
}

/// A^steps x0, by repeated multiplication for integer exponents and through
/// the eigendecomposition otherwise.
fn state_linear_discrete(
    matrix: &RealMatrix,
    x0: &[f64],
    steps: f64,
) -> Result<Vec<f64>, SystemsError> {
    if steps == 0.0 {
        return Ok(x0.to_vec());
    }
    if steps.fract() == 0.0 && steps >= 0.0 && steps.abs() < 1e6 {
        let mut state = x0.to_vec();
        for _ in 0..steps as usize {
            state = matrix.matvec(&state);
        }
        return Ok(state);
    }
    // Fractional or negative exponent: requires a diagonalizable matrix.
    let propagator = EigenPropagator::new(matrix)?;
    propagator.fractional_discrete(x0, steps)
}

fn slow_manifold_state(lambda: f64, mu: f64, x0: &[f64], steps: f64) -> Option<Vec<f64>> {
    // x1(s) = lambda^s x1(0); x2(s) = mu^s (x2(0) - x1(0)^2) + lambda^{2s} x1(0)^2.
    let pow = |base: f64, e: f64| -> Option<f64> {
        if e.fract() == 0.0 && e.abs() < 1e6 {
            Some(base.powi(e as i32))
        } else if base > 0.0 {
            Some(base.powf(e))
        } else {
            None
        }
    };
    let lp = pow(lambda, steps)?;
    let mp = pow(mu, steps)?;
    let l2p = pow(lambda * lambda, steps)?;
    let d = x0[0] * x0[0];
    Some(vec![lp * x0[0], mp * (x0[1] - d) + l2p * d])
}

fn walk_states(x0: &[f64], sigma: f64, seed: u64, steps: usize) -> Vec<Vec<f64>> {
    let mut rng = GaussianStream::new(seed);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.to_vec());
    for _ in 0..steps {
        let prev = out.last().unwrap();
        let next: Vec<f64> = prev.iter().map(|v| v + sigma * rng.next_normal()).collect();
        out.push(next);
    }
    out
}

/// Standard normal draws: ChaCha8 uniforms through the cosine branch of the
/// Box-Muller transform, one normal per pair of uniforms. Pinning the exact
/// construction keeps demo files reproducible across implementations.
struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn next_normal(&mut self) -> f64 {
        // u1 in (0, 1], u2 in [0, 1).
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
        let u2 = (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Propagates linear systems through the eigendecomposition of the
/// generator matrix.
struct EigenPropagator {
    vectors: ComplexMatrix,
    inverse: ComplexMatrix,
    values: Vec<Complex64>,
}

impl EigenPropagator {
    fn new(matrix: &RealMatrix) -> Result<Self, SystemsError> {
        let decomposition = numerics::eig(&matrix.to_complex())
            .map_err(|_| SystemsError::NonDiagonalizableGenerator)?;
        if decomposition.defective_warning {
            return Err(SystemsError::NonDiagonalizableGenerator);
        }
        let inverse = numerics::complex_inverse(&decomposition.vectors)
            .map_err(|_| SystemsError::NonDiagonalizableGenerator)?;
        Ok(Self {
            vectors: decomposition.vectors,
            inverse,
            values: decomposition.values,
        })
    }

    /// x(t) = W e^{Omega t} W^{-1} x0 for the continuous family.
    fn state_at(&self, x0: &[f64], t: f64) -> Vec<f64> {
        let coeffs = self.project(x0);
        let factors: Vec<Complex64> = self.values.iter().map(|w| (w * t).exp()).collect();
        self.recombine(&coeffs, &factors)
    }

    /// A^steps x0 through eigenvalue powers, for non-integer exponents.
    fn fractional_discrete(&self, x0: &[f64], steps: f64) -> Result<Vec<f64>, SystemsError> {
        let coeffs = self.project(x0);
        let factors =
            diag_power(&self.values, steps).map_err(|_| SystemsError::NoClosedForm(steps))?;
        Ok(self.recombine(&coeffs, &factors))
    }

    fn project(&self, x0: &[f64]) -> Vec<Complex64> {
        let x: Vec<Complex64> = x0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.inverse.matvec(&x)
    }

    fn recombine(&self, coeffs: &[Complex64], factors: &[Complex64]) -> Vec<f64> {
        let weighted: Vec<Complex64> = coeffs.iter().zip(factors).map(|(c, f)| c * f).collect();
        self.vectors
            .matvec(&weighted)
            .iter()
            .map(|z| z.re)
            .collect()
    }
}
