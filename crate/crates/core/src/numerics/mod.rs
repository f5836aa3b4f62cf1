//! Dense linear-algebra kernels the rest of the crate is built on: truncated
//! SVD, pseudoinverses, eigendecomposition of general square matrices, and
//! elementwise complex powers.
//!
//! Everything here works on plain row-major buffers and is deliberately
//! dependency-free. All operations are pure functions of their inputs and all
//! types are immutable values, so they can be shared freely across threads.

mod eig;
mod solve;
mod svd;

pub use eig::{eig, EigDecomposition};
pub use solve::{complex_inverse, complex_lstsq, complex_pinv};

use num_complex::Complex64;
use thiserror::Error;

/// Absolute floor under which a singular value may not be inverted.
pub const SIGMA_FLOOR: f64 = 1e-150;

/// Condition-number threshold above which an eigenvector basis is flagged
/// as numerically defective.
pub const DEFECTIVE_COND_THRESHOLD: f64 = 1e8;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix entries must be finite (found NaN or infinity)")]
    NonFiniteEntry,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("input matrix is identically zero")]
    ZeroMatrix,
    #[error("rank policy cannot be satisfied: requested {requested}, maximum {max}")]
    RankPolicyUnsatisfiable { requested: usize, max: usize },
    #[error("invalid rank policy: {0}")]
    InvalidRankPolicy(String),
    #[error("singular value {0:e} is below the inversion floor {SIGMA_FLOOR:e}")]
    SingularValueUnderflow(f64),
    #[error("eigenvalue iteration failed to converge")]
    NonConvergence,
    #[error("zero eigenvalue raised to a negative or non-integer power")]
    ZeroToNegativePower,
    #[error("matrix is singular to working precision")]
    SingularMatrix,
}

// ---------------------------------------------------------------------------
// Real matrices
// ---------------------------------------------------------------------------

/// Dense real matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Build from nested rows, validating shape and finiteness.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericsError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(NumericsError::DimensionMismatch {
                    expected: format!("{c} columns"),
                    got: format!("{} columns", row.len()),
                });
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(NumericsError::NonFiniteEntry);
                }
                data.push(v);
            }
        }
        Ok(Self {
            rows: r,
            cols: c,
            data,
        })
    }

    /// Build from state vectors laid out as columns.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self, NumericsError> {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            if col.len() != r {
                return Err(NumericsError::DimensionMismatch {
                    expected: format!("{r} rows"),
                    got: format!("{} rows", col.len()),
                });
            }
            for (i, &v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(NumericsError::NonFiniteEntry);
                }
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn has_finite_entries(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_complex(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| {
            Complex64::new(self[(i, j)], 0.0)
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for RealMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RealMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

// ---------------------------------------------------------------------------
// Complex matrices
// ---------------------------------------------------------------------------

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[Complex64]) {
        assert_eq!(col.len(), self.rows);
        for (i, &v) in col.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn has_finite_entries(&self) -> bool {
        self.data
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Scale a mode column to unit 2-norm and rotate its largest-magnitude entry
/// to be real and positive, the same convention [`eig`] applies to
/// eigenvectors. A zero column is left untouched.
pub fn normalize_mode_column(v: &mut [Complex64]) {
    eig::normalize_phase(v);
}

// ---------------------------------------------------------------------------
// Rank policies and the truncated SVD
// ---------------------------------------------------------------------------

/// How many singular triplets to retain when truncating an SVD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankPolicy {
    /// Keep exactly `r` triplets (capped at the numerical rank so that the
    /// retained singular values stay strictly positive).
    Fixed(usize),
    /// Drop every sigma_i < tau * sigma_1; `tau` must lie in (0, 1).
    RelativeTolerance(f64),
    /// Keep the smallest r with `sum(sigma_kept^2) / sum(sigma^2) >= eta`;
    /// `eta` must lie in (0, 1].
    EnergyFraction(f64),
}

impl RankPolicy {
    fn validate(&self, max_rank: usize) -> Result<(), NumericsError> {
        match *self {
            RankPolicy::Fixed(r) => {
                if r == 0 {
                    return Err(NumericsError::InvalidRankPolicy(
                        "fixed rank must be >= 1".into(),
                    ));
                }
                if r > max_rank {
                    return Err(NumericsError::RankPolicyUnsatisfiable {
                        requested: r,
                        max: max_rank,
                    });
                }
                Ok(())
            }
            RankPolicy::RelativeTolerance(t) => {
                if t > 0.0 && t < 1.0 {
                    Ok(())
                } else {
                    Err(NumericsError::InvalidRankPolicy(format!(
                        "relative tolerance {t} outside (0, 1)"
                    )))
                }
            }
            RankPolicy::EnergyFraction(e) => {
                if e > 0.0 && e <= 1.0 {
                    Ok(())
                } else {
                    Err(NumericsError::InvalidRankPolicy(format!(
                        "energy fraction {e} outside (0, 1]"
                    )))
                }
            }
        }
    }
}

/// Truncated singular value decomposition.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// Left singular vectors, rows x r.
    pub u: RealMatrix,
    /// Retained singular values, strictly positive, descending.
    pub sigma: Vec<f64>,
    /// Right singular vectors, cols x r.
    pub v: RealMatrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

/// Compute the SVD of `x` and truncate it per `policy`.
///
/// The returned factors satisfy `x ~= u * diag(sigma) * v^T` with orthonormal
/// columns in `u` and `v`. Singular values indistinguishable from zero at
/// working precision are never retained, so `sigma` is strictly positive.
pub fn svd_truncated(x: &RealMatrix, policy: RankPolicy) -> Result<TruncatedSvd, NumericsError> {
    if !x.has_finite_entries() {
        return Err(NumericsError::NonFiniteEntry);
    }
    if x.rows() == 0 || x.cols() == 0 || x.is_zero() {
        return Err(NumericsError::ZeroMatrix);
    }
    let max_rank = x.rows().min(x.cols());
    policy.validate(max_rank)?;

    let (u_full, sigma_full, v_full) = svd::thin_svd(x)?;

    // Numerical rank: singular values distinguishable from zero at working
    // precision relative to sigma_1.
    let zero_cut = sigma_full[0] * f64::EPSILON * x.rows().max(x.cols()) as f64;
    let numerical_rank = sigma_full.iter().filter(|&&s| s > zero_cut).count().max(1);

    let r = match policy {
        RankPolicy::Fixed(r) => r.min(numerical_rank),
        RankPolicy::RelativeTolerance(tau) => {
            let cut = tau * sigma_full[0];
            sigma_full
                .iter()
                .filter(|&&s| s >= cut)
                .count()
                .max(1)
                .min(numerical_rank)
        }
        RankPolicy::EnergyFraction(eta) => {
            let total: f64 = sigma_full.iter().map(|s| s * s).sum();
            let mut acc = 0.0;
            let mut r = numerical_rank;
            for (i, s) in sigma_full.iter().enumerate() {
                acc += s * s;
                if acc / total >= eta {
                    r = i + 1;
                    break;
                }
            }
            r.min(numerical_rank)
        }
    };

    let u = RealMatrix::from_fn(x.rows(), r, |i, j| u_full[(i, j)]);
    let v = RealMatrix::from_fn(x.cols(), r, |i, j| v_full[(i, j)]);
    Ok(TruncatedSvd {
        u,
        sigma: sigma_full[..r].to_vec(),
        v,
    })
}

/// Moore-Penrose pseudoinverse assembled from truncated SVD factors:
/// `V * diag(1/sigma) * U^T`.
pub fn pinv_from_svd(svd: &TruncatedSvd) -> Result<RealMatrix, NumericsError> {
    for &s in &svd.sigma {
        if s < SIGMA_FLOOR {
            return Err(NumericsError::SingularValueUnderflow(s));
        }
    }
    let r = svd.rank();
    let m = svd.v.rows();
    let n = svd.u.rows();
    let mut out = RealMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..r {
                acc += svd.v[(i, k)] * svd.u[(j, k)] / svd.sigma[k];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Elementwise complex powers
// ---------------------------------------------------------------------------

/// Raise each eigenvalue to the (possibly fractional, possibly negative)
/// power `k`.
///
/// Integer exponents use exact repeated multiplication, so `0^k = 0` for
/// k > 0 and `1^k = 1` for any k. Non-integer exponents use the principal
/// branch of the complex logarithm and require every base to be nonzero.
pub fn diag_power(lambdas: &[Complex64], k: f64) -> Result<Vec<Complex64>, NumericsError> {
    let is_integer = k.fract() == 0.0 && k.abs() < 2f64.powi(53);
    lambdas
        .iter()
        .map(|&lam| {
            if lam == Complex64::ZERO {
                return if is_integer && k > 0.0 {
                    Ok(Complex64::ZERO)
                } else if is_integer && k == 0.0 {
                    Ok(Complex64::ONE)
                } else {
                    Err(NumericsError::ZeroToNegativePower)
                };
            }
            if is_integer && k.abs() <= u32::MAX as f64 {
                let p = int_power(lam, k.abs() as u64);
                Ok(if k < 0.0 { p.finv() } else { p })
            } else {
                Ok((lam.ln() * k).exp())
            }
        })
        .collect()
}

/// Binary exponentiation for complex bases.
fn int_power(base: Complex64, mut exp: u64) -> Complex64 {
    let mut acc = Complex64::ONE;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        b *= b;
        exp >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn near(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn svd_identity_fixed_rank() {
        let x = RealMatrix::identity(2);
        let svd = svd_truncated(&x, RankPolicy::Fixed(2)).unwrap();
        assert_eq!(svd.rank(), 2);
        assert!(near(svd.sigma[0], 1.0, 1e-12));
        assert!(near(svd.sigma[1], 1.0, 1e-12));
        // U V^T must reproduce the identity.
        let uvt = svd.u.matmul(&svd.v.transpose());
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(near(uvt[(i, j)], want, 1e-12));
            }
        }
    }

    #[test]
    fn svd_rank_deficient_relative_tolerance() {
        // X^T X = [[5,10],[10,20]] has eigenvalues 25 and 0, so sigma_1 = 5.
        let x = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let svd = svd_truncated(&x, RankPolicy::RelativeTolerance(1e-10)).unwrap();
        assert_eq!(svd.rank(), 1);
        assert!(near(svd.sigma[0], 5.0, 1e-10));
    }

    #[test]
    fn svd_zero_matrix_rejected() {
        let x = RealMatrix::zeros(3, 2);
        assert!(matches!(
            svd_truncated(&x, RankPolicy::Fixed(1)),
            Err(NumericsError::ZeroMatrix)
        ));
    }

    #[test]
    fn svd_fixed_rank_too_large_rejected() {
        let x = RealMatrix::identity(2);
        assert!(matches!(
            svd_truncated(&x, RankPolicy::Fixed(3)),
            Err(NumericsError::RankPolicyUnsatisfiable {
                requested: 3,
                max: 2
            })
        ));
    }

    #[test]
    fn svd_energy_fraction_keeps_dominant() {
        // sigma = [3, 4] sorted to [4, 3]; energy of the first is 16/25 = 0.64.
        let x = RealMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let svd = svd_truncated(&x, RankPolicy::EnergyFraction(0.6)).unwrap();
        assert_eq!(svd.rank(), 1);
        assert!(near(svd.sigma[0], 4.0, 1e-12));
        let svd = svd_truncated(&x, RankPolicy::EnergyFraction(0.9)).unwrap();
        assert_eq!(svd.rank(), 2);
        // At the eta = 1 boundary every nonzero singular value is kept, but
        // exact zeros never are.
        let rank_deficient = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let svd = svd_truncated(&rank_deficient, RankPolicy::EnergyFraction(1.0)).unwrap();
        assert_eq!(svd.rank(), 1);
    }

    #[test]
    fn pinv_identity_factors() {
        let x = RealMatrix::identity(3);
        let svd = svd_truncated(&x, RankPolicy::Fixed(3)).unwrap();
        let pinv = pinv_from_svd(&svd).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(near(pinv[(i, j)], want, 1e-12));
            }
        }
    }

    #[test]
    fn pinv_satisfies_penrose_on_rank_deficient_input() {
        let x = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let svd = svd_truncated(&x, RankPolicy::RelativeTolerance(1e-10)).unwrap();
        let pinv = pinv_from_svd(&svd).unwrap();
        let x_pinv_x = x.matmul(&pinv).matmul(&x);
        assert!(x_pinv_x.sub(&x).frobenius_norm() <= 1e-12);
        let pinv_x_pinv = pinv.matmul(&x).matmul(&pinv);
        assert!(pinv_x_pinv.sub(&pinv).frobenius_norm() <= 1e-12);
    }

    #[test]
    fn pinv_underflow_guard() {
        let svd = TruncatedSvd {
            u: RealMatrix::identity(1),
            sigma: vec![1e-300],
            v: RealMatrix::identity(1),
        };
        assert!(matches!(
            pinv_from_svd(&svd),
            Err(NumericsError::SingularValueUnderflow(_))
        ));
    }

    #[test]
    fn diag_power_identity_stays_exact() {
        let out = diag_power(&[Complex64::ONE, Complex64::ONE], 1000.0).unwrap();
        assert_eq!(out[0], Complex64::ONE);
        assert_eq!(out[1], Complex64::ONE);
    }

    #[test]
    fn diag_power_negative_integer() {
        let out = diag_power(&[Complex64::new(2.0, 0.0)], -1.0).unwrap();
        assert!(near(out[0].re, 0.5, 1e-15));
        assert!(near(out[0].im, 0.0, 1e-15));
    }

    #[test]
    fn diag_power_zero_to_negative_rejected() {
        assert!(matches!(
            diag_power(&[Complex64::ZERO], -2.0),
            Err(NumericsError::ZeroToNegativePower)
        ));
        assert!(matches!(
            diag_power(&[Complex64::ZERO], 0.5),
            Err(NumericsError::ZeroToNegativePower)
        ));
    }

    #[test]
    fn diag_power_zero_to_positive_is_zero() {
        let out = diag_power(&[Complex64::ZERO], 3.0).unwrap();
        assert_eq!(out[0], Complex64::ZERO);
    }

    #[test]
    fn diag_power_fractional_uses_principal_branch() {
        // i^0.5 = e^{i pi/4}
        let out = diag_power(&[Complex64::new(0.0, 1.0)], 0.5).unwrap();
        let want = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        assert!((out[0] - want).norm() < 1e-14);
    }

    #[test]
    fn non_finite_entries_rejected() {
        assert!(RealMatrix::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(RealMatrix::from_rows(&[vec![f64::INFINITY]]).is_err());
    }
}
