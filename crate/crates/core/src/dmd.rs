//! Reduced-operator fitting, modes, amplitudes, spectra, and prediction at
//! arbitrary discrete or continuous indexes.
//!
//! The fit never materializes the full n x n operator: the snapshot matrices
//! are compressed through a truncated SVD and the eigendecomposition is done
//! on the reduced operator, whose leading spectrum equals the full one.

use crate::numerics::{
    self, diag_power, eig, svd_truncated, ComplexMatrix, NumericsError, RankPolicy, RealMatrix,
};
use crate::trajectory::{build_snapshot_pair, TrajectoryError, TrajectorySet};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stability classification band around the unit circle.
pub const TOL_UNIT: f64 = 1e-6;

/// Eigenvalue magnitude below which an eigenpair counts as zero for the
/// exact-mode fallback rule.
pub const TOL_ZERO: f64 = 1e-12;

/// Largest state dimension for which the full operator may be materialized.
pub const FULL_OPERATOR_CAP: usize = 1000;

#[derive(Debug, Error)]
pub enum DmdError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("a zero eigenvalue cannot be re-anchored to a nonzero start index")]
    ZeroEigenvalueWithOffset,
    #[error("a zero eigenvalue has no continuous-index growth rate")]
    ZeroEigenvalueLog,
    #[error("state dimension {n} exceeds the full-operator cap {cap}")]
    DimensionCapExceeded { n: usize, cap: usize },
    #[error("SVD factors are unavailable (model was restored from disk)")]
    FactorsUnavailable,
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Which eigenvector formulation to store in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    /// Modes assembled from the successor snapshots; true eigenvectors of
    /// the full operator whenever the eigenvalue is nonzero.
    Exact,
    /// Modes projected through the left singular vectors; more stable, and
    /// identical to the exact ones when the two snapshot matrices share a
    /// column space.
    Projected,
    /// Exact modes, except that an eigenpair whose eigenvalue and exact
    /// column are both numerically zero falls back to the projected column.
    ExactWithFallback,
}

/// SVD factors and reduced operator kept from the fit. Only present on
/// freshly fitted models; restored models carry just the predictive state.
#[derive(Debug, Clone)]
pub struct FitFactors {
    /// Left singular vectors of the snapshot matrix, n x r.
    pub u: RealMatrix,
    /// Retained singular values.
    pub sigma: Vec<f64>,
    /// Right singular vectors, M x r.
    pub v: RealMatrix,
    /// Reduced operator, r x r.
    pub a_tilde: RealMatrix,
    /// The snapshot the amplitudes are anchored to.
    pub anchor_state: Vec<f64>,
}

/// Numerical health indicators recorded at fit time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Relative one-step reconstruction residual over all snapshot pairs.
    pub fit_residual: f64,
    /// Reconstruction error of the anchor snapshot from modes and amplitudes.
    pub anchor_residual: f64,
    /// Frobenius-based condition estimate of the reduced eigenvector basis.
    pub eigenvector_condition: f64,
    /// The eigenvector basis is numerically defective.
    pub defective_warning: bool,
    /// An eigenvalue sits on the negative real axis, where the principal
    /// logarithm branch makes discrete and continuous predictions disagree.
    pub branch_warning: bool,
}

/// A fitted surrogate model: spectrum, modes, and anchored amplitudes.
#[derive(Debug, Clone)]
pub struct DmdModel {
    /// State dimension.
    pub n: usize,
    /// Retained rank.
    pub rank: usize,
    /// Discrete-time eigenvalues in canonical order.
    pub eigenvalues: Vec<Complex64>,
    /// Mode columns, n x rank, unit norm with deterministic phase.
    pub modes: ComplexMatrix,
    /// Amplitudes anchored per the stored start index.
    pub amplitudes: Vec<Complex64>,
    /// Sampling interval in original index units.
    pub delta_k: f64,
    /// Original-units index of the first sample.
    pub start_index: f64,
    pub mode_kind: ModeKind,
    pub diagnostics: FitDiagnostics,
    pub factors: Option<FitFactors>,
}

/// A predicted state plus how much imaginary residue the mode expansion
/// left behind (conjugate pairs cancel only up to roundoff).
#[derive(Debug, Clone)]
pub struct Prediction {
    pub state: Vec<f64>,
    pub imag_residual: f64,
}

/// Continuous-index growth rates `omega_i = ln(lambda_i) / delta_k`
/// (principal branch).
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSpectrum {
    pub omegas: Vec<Complex64>,
}

/// Fit the reduced operator to the snapshot pair and extract spectrum,
/// modes, and amplitudes.
pub fn fit(
    data: &TrajectorySet,
    policy: RankPolicy,
    mode_kind: ModeKind,
) -> Result<DmdModel, DmdError> {
    let pair = build_snapshot_pair(data)?;
    let n = data.dim();
    let svd = svd_truncated(&pair.x, policy)?;
    let r = svd.rank();

    // a_tilde = U^H X' V Sigma^{-1}, all real here.
    let ut_xp = svd.u.transpose().matmul(&pair.x_prime); // r x M
    let ut_xp_v = ut_xp.matmul(&svd.v); // r x r
    let a_tilde = RealMatrix::from_fn(r, r, |i, j| ut_xp_v[(i, j)] / svd.sigma[j]);

    let decomposition = eig(&a_tilde.to_complex())?;
    let eigenvalues = decomposition.values.clone();

    // Exact modes X' V Sigma^{-1} W~ and projected modes U W~.
    let xp_v = pair.x_prime.matmul(&svd.v); // n x r
    let xp_v_sinv = RealMatrix::from_fn(n, r, |i, j| xp_v[(i, j)] / svd.sigma[j]);
    let exact = xp_v_sinv.to_complex().matmul(&decomposition.vectors);
    let projected = svd.u.to_complex().matmul(&decomposition.vectors);

    let xp_norm = pair.x_prime.frobenius_norm();
    let mut modes = ComplexMatrix::zeros(n, r);
    for (j, lambda) in eigenvalues.iter().enumerate() {
        let exact_col = exact.column(j);
        let use_projected = match mode_kind {
            ModeKind::Exact => false,
            ModeKind::Projected => true,
            ModeKind::ExactWithFallback => {
                lambda.norm() < TOL_ZERO && numerics::vec_norm(&exact_col) < TOL_ZERO * xp_norm
            }
        };
        let mut col = if use_projected {
            projected.column(j)
        } else {
            exact_col
        };
        numerics::normalize_mode_column(&mut col);
        modes.set_column(j, &col);
    }

    let anchor_state = data.first_state().to_vec();
    let start_steps = data.start_index() / data.delta_k();
    let amplitudes = amplitudes_from_modes(&modes, &eigenvalues, &anchor_state, start_steps)?;

    // One-step reconstruction residual: ||X' - (X'V Sigma^{-1})(U^T X)||_F.
    let ut_x = svd.u.transpose().matmul(&pair.x);
    let reconstruction = xp_v_sinv.matmul(&ut_x);
    let fit_residual =
        reconstruction.sub(&pair.x_prime).frobenius_norm() / xp_norm.max(f64::MIN_POSITIVE);

    // How well the modes and amplitudes reproduce the anchor snapshot.
    let anchor_powers = diag_power(&eigenvalues, start_steps)?;
    let weighted: Vec<Complex64> = anchor_powers
        .iter()
        .zip(&amplitudes)
        .map(|(p, b)| p * b)
        .collect();
    let recon = modes.matvec(&weighted);
    let anchor_norm = anchor_state.iter().map(|v| v * v).sum::<f64>().sqrt();
    let anchor_residual = recon
        .iter()
        .zip(&anchor_state)
        .map(|(z, x)| (z - Complex64::new(*x, 0.0)).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / anchor_norm.max(f64::MIN_POSITIVE);

    let branch_warning = eigenvalues
        .iter()
        .any(|l| l.norm() > 0.0 && l.arg().abs() >= std::f64::consts::PI * (1.0 - 1e-12));

    Ok(DmdModel {
        n,
        rank: r,
        eigenvalues,
        modes,
        amplitudes,
        delta_k: data.delta_k(),
        start_index: data.start_index(),
        mode_kind,
        diagnostics: FitDiagnostics {
            fit_residual,
            anchor_residual,
            eigenvector_condition: decomposition.vector_condition,
            defective_warning: decomposition.defective_warning,
            branch_warning,
        },
        factors: Some(FitFactors {
            u: svd.u,
            sigma: svd.sigma,
            v: svd.v,
            a_tilde,
            anchor_state,
        }),
    })
}

/// Amplitudes of `x_init` in the mode basis, re-anchored to the given start
/// index (in steps): `b = diag(lambda)^(-i) W^+ x_init`.
pub fn amplitudes(
    modes: &ComplexMatrix,
    eigenvalues: &[Complex64],
    x_init: &[f64],
    start_index_steps: f64,
) -> Result<Vec<Complex64>, DmdError> {
    amplitudes_from_modes(modes, eigenvalues, x_init, start_index_steps)
}

fn amplitudes_from_modes(
    modes: &ComplexMatrix,
    eigenvalues: &[Complex64],
    x_init: &[f64],
    start_index_steps: f64,
) -> Result<Vec<Complex64>, DmdError> {
    if x_init.len() != modes.rows() {
        return Err(DmdError::DimensionMismatch {
            expected: modes.rows(),
            got: x_init.len(),
        });
    }
    let rhs: Vec<Complex64> = x_init.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let base = numerics::complex_lstsq(modes, &rhs)?;
    if start_index_steps == 0.0 {
        return Ok(base);
    }
    if eigenvalues.contains(&Complex64::ZERO) {
        return Err(DmdError::ZeroEigenvalueWithOffset);
    }
    let unwind = diag_power(eigenvalues, -start_index_steps)?;
    Ok(base.iter().zip(&unwind).map(|(b, p)| b * p).collect())
}

/// Predict the state at absolute step index `k` (in steps of `delta_k`,
/// counted from the virtual index-zero anchor): `x_k = W diag(lambda^k) b`.
/// Non-integer `k` uses principal-branch powers and requires a zero-free
/// spectrum.
pub fn predict_discrete(model: &DmdModel, k: f64) -> Result<Prediction, DmdError> {
    let powers = diag_power(&model.eigenvalues, k)?;
    Ok(combine(model, &powers))
}

/// Predict the state at index `t` in original units by exponentiating the
/// continuous spectrum: `x(t) = W diag(e^(omega t)) b`.
pub fn predict_continuous(model: &DmdModel, t: f64) -> Result<Prediction, DmdError> {
    let spectrum = to_continuous(&model.eigenvalues, model.delta_k)?;
    let factors: Vec<Complex64> = spectrum.omegas.iter().map(|w| (w * t).exp()).collect();
    Ok(combine(model, &factors))
}

fn combine(model: &DmdModel, factors: &[Complex64]) -> Prediction {
    let weighted: Vec<Complex64> = factors
        .iter()
        .zip(&model.amplitudes)
        .map(|(f, b)| f * b)
        .collect();
    let full = model.modes.matvec(&weighted);
    let state: Vec<f64> = full.iter().map(|z| z.re).collect();
    let imag_residual = full.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    Prediction {
        state,
        imag_residual,
    }
}

/// Convert discrete eigenvalues to continuous growth rates via the principal
/// logarithm. Fails on zero eigenvalues, which have no logarithm.
pub fn to_continuous(
    eigenvalues: &[Complex64],
    delta_k: f64,
) -> Result<ContinuousSpectrum, DmdError> {
    let omegas = eigenvalues
        .iter()
        .map(|l| {
            if *l == Complex64::ZERO {
                Err(DmdError::ZeroEigenvalueLog)
            } else {
                Ok(l.ln() / delta_k)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ContinuousSpectrum { omegas })
}

/// Inverse of [`to_continuous`]: `lambda_i = e^(omega_i delta_k)`.
pub fn from_continuous(spectrum: &ContinuousSpectrum, delta_k: f64) -> Vec<Complex64> {
    spectrum
        .omegas
        .iter()
        .map(|w| (w * delta_k).exp())
        .collect()
}

/// Materialize the full operator `A = X' V Sigma^{-1} U^H`. Intended for
/// test oracles and small systems only; guarded by [`FULL_OPERATOR_CAP`].
pub fn full_operator(model: &DmdModel, x_prime: &RealMatrix) -> Result<RealMatrix, DmdError> {
    if model.n > FULL_OPERATOR_CAP {
        return Err(DmdError::DimensionCapExceeded {
            n: model.n,
            cap: FULL_OPERATOR_CAP,
        });
    }
    let factors = model.factors.as_ref().ok_or(DmdError::FactorsUnavailable)?;
    if x_prime.rows() != model.n || x_prime.cols() != factors.v.rows() {
        return Err(DmdError::DimensionMismatch {
            expected: factors.v.rows(),
            got: x_prime.cols(),
        });
    }
    let xp_v = x_prime.matmul(&factors.v);
    let scaled = RealMatrix::from_fn(model.n, model.rank, |i, j| xp_v[(i, j)] / factors.sigma[j]);
    Ok(scaled.matmul(&factors.u.transpose()))
}

/// Stability classification keyed on the dominant eigenvalue magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityFlag {
    /// Every magnitude is at most 1 + [`TOL_UNIT`].
    Stable,
    /// The dominant magnitude sits on the unit circle within [`TOL_UNIT`].
    Marginal,
    /// The dominant magnitude exceeds the unit circle: the system grows
    /// without bound forward in time and vanishes backward.
    Exploding,
}

/// Per-eigenvalue diagnostics for the spectrum table.
#[derive(Debug, Clone)]
pub struct SpectrumEntry {
    pub eigenvalue: Complex64,
    pub magnitude: f64,
    pub phase: f64,
    /// Distance from the unit circle, `|lambda| - 1`.
    pub growth: f64,
    /// Continuous growth rate; absent for a zero eigenvalue.
    pub omega: Option<Complex64>,
}

/// Spectrum summary: per-eigenvalue magnitudes and growth rates, the
/// dominant index, and stability flags.
///
/// The flag is keyed on eigenvalue magnitude. Real parts are also reported
/// (see `SpectrumEntry::eigenvalue`) since the two notions differ for
/// complex eigenvalues; magnitude is what governs long-run growth.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub entries: Vec<SpectrumEntry>,
    pub dominant_index: usize,
    pub flag: StabilityFlag,
    /// `max |lambda| / min |lambda|`; large values mean predictions into the
    /// past are ill-conditioned. Infinite when a zero eigenvalue is present.
    pub magnitude_spread: f64,
    /// Some eigenvalue sits strictly inside the unit circle, so backward
    /// prediction amplifies it without bound.
    pub past_growth_warning: bool,
    pub branch_warning: bool,
}

pub fn spectrum_report(model: &DmdModel) -> SpectrumReport {
    let entries: Vec<SpectrumEntry> = model
        .eigenvalues
        .iter()
        .map(|&l| SpectrumEntry {
            eigenvalue: l,
            magnitude: l.norm(),
            phase: if l == Complex64::ZERO { 0.0 } else { l.arg() },
            growth: l.norm() - 1.0,
            omega: if l == Complex64::ZERO {
                None
            } else {
                Some(l.ln() / model.delta_k)
            },
        })
        .collect();
    let dominant_index = entries
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.magnitude.partial_cmp(&b.magnitude).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let dominant = entries[dominant_index].magnitude;
    let min_mag = entries
        .iter()
        .map(|e| e.magnitude)
        .fold(f64::INFINITY, f64::min);
    let flag = if dominant > 1.0 + TOL_UNIT {
        StabilityFlag::Exploding
    } else if (dominant - 1.0).abs() <= TOL_UNIT {
        StabilityFlag::Marginal
    } else {
        StabilityFlag::Stable
    };
    SpectrumReport {
        entries,
        dominant_index,
        flag,
        magnitude_spread: if min_mag == 0.0 {
            f64::INFINITY
        } else {
            dominant / min_mag
        },
        past_growth_warning: min_mag < 1.0 - TOL_UNIT,
        branch_warning: model.diagnostics.branch_warning,
    }
}
