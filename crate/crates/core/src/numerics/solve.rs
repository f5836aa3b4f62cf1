//! Complex least squares and inverses built on Householder QR and
//! Gauss-Jordan elimination. Used for mode-amplitude solves and for
//! conditioning estimates of eigenvector bases.

use super::{ComplexMatrix, NumericsError};
use num_complex::Complex64;

/// Complex Householder reflector: returns `(u, tau, beta)` such that
/// `(I - tau u u^H) x = beta e1` with real `tau`. The choice of `beta`
/// avoids cancellation, so `u[0]` never underflows.
pub(super) fn householder_complex(x: &[Complex64]) -> (Vec<Complex64>, f64, Complex64) {
    let alpha = x[0];
    let tail_norm_sq: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
    if tail_norm_sq == 0.0 && alpha.im == 0.0 && alpha.re >= 0.0 {
        return (vec![Complex64::ZERO; x.len()], 0.0, alpha);
    }
    let mu = (alpha.norm_sqr() + tail_norm_sq).sqrt();
    let beta = if alpha == Complex64::ZERO {
        Complex64::new(-mu, 0.0)
    } else {
        -(alpha / alpha.norm()) * mu
    };
    let mut u = x.to_vec();
    u[0] = alpha - beta;
    let unorm_sq: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    (u, 2.0 / unorm_sq, beta)
}

/// QR factorization of an n x r complex matrix with n >= r. The reflectors
/// are kept explicitly; `r_mat` holds the upper-triangular factor.
struct ComplexQr {
    reflectors: Vec<(Vec<Complex64>, f64)>,
    r_mat: ComplexMatrix,
    rows: usize,
    cols: usize,
}

fn complex_qr(a: &ComplexMatrix) -> ComplexQr {
    let n = a.rows();
    let r = a.cols();
    assert!(n >= r, "QR requires rows >= cols");
    let mut work = a.clone();
    let mut reflectors = Vec::with_capacity(r);
    for k in 0..r {
        let col: Vec<Complex64> = (k..n).map(|i| work[(i, k)]).collect();
        let (u, tau, beta) = householder_complex(&col);
        work[(k, k)] = beta;
        for i in (k + 1)..n {
            work[(i, k)] = Complex64::ZERO;
        }
        if tau != 0.0 {
            for j in (k + 1)..r {
                let mut w = Complex64::ZERO;
                for (t, ut) in u.iter().enumerate() {
                    w += ut.conj() * work[(k + t, j)];
                }
                w *= tau;
                for (t, ut) in u.iter().enumerate() {
                    work[(k + t, j)] -= w * ut;
                }
            }
        }
        reflectors.push((u, tau));
    }
    ComplexQr {
        reflectors,
        r_mat: work,
        rows: n,
        cols: r,
    }
}

impl ComplexQr {
    /// Apply Q^H to a vector in place.
    fn apply_qh(&self, y: &mut [Complex64]) {
        for (k, (u, tau)) in self.reflectors.iter().enumerate() {
            if *tau == 0.0 {
                continue;
            }
            let mut w = Complex64::ZERO;
            for (t, ut) in u.iter().enumerate() {
                w += ut.conj() * y[k + t];
            }
            w *= *tau;
            for (t, ut) in u.iter().enumerate() {
                y[k + t] -= w * ut;
            }
        }
    }

    /// Back-substitute R x = z for the leading `cols` entries of z.
    fn back_substitute(&self, z: &[Complex64]) -> Result<Vec<Complex64>, NumericsError> {
        let r = self.cols;
        let diag_max = (0..r)
            .map(|i| self.r_mat[(i, i)].norm())
            .fold(0.0f64, f64::max);
        let floor = diag_max * f64::EPSILON * self.rows as f64;
        let mut x = vec![Complex64::ZERO; r];
        for i in (0..r).rev() {
            let rii = self.r_mat[(i, i)];
            if rii.norm() <= floor {
                return Err(NumericsError::SingularMatrix);
            }
            let mut acc = z[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                acc -= self.r_mat[(i, j)] * xj;
            }
            x[i] = acc / rii;
        }
        Ok(x)
    }
}

/// Solve `a x = b` in the least-squares sense for complex `a` (rows >= cols).
pub fn complex_lstsq(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>, NumericsError> {
    if b.len() != a.rows() {
        return Err(NumericsError::DimensionMismatch {
            expected: format!("{} entries", a.rows()),
            got: format!("{} entries", b.len()),
        });
    }
    let qr = complex_qr(a);
    let mut y = b.to_vec();
    qr.apply_qh(&mut y);
    qr.back_substitute(&y)
}

/// Moore-Penrose pseudoinverse of a full-column-rank complex matrix
/// (rows >= cols), assembled column by column from the QR factors.
pub fn complex_pinv(a: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    let n = a.rows();
    let r = a.cols();
    let qr = complex_qr(a);
    let mut out = ComplexMatrix::zeros(r, n);
    for j in 0..n {
        let mut y = vec![Complex64::ZERO; n];
        y[j] = Complex64::ONE;
        qr.apply_qh(&mut y);
        let x = qr.back_substitute(&y)?;
        for i in 0..r {
            out[(i, j)] = x[i];
        }
    }
    Ok(out)
}

/// Inverse of a square complex matrix by Gauss-Jordan elimination with
/// partial pivoting.
pub fn complex_inverse(a: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "inverse requires a square matrix");
    let mut work = a.clone();
    let mut inv = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let mut pivot = col;
        for i in (col + 1)..n {
            if work[(i, col)].norm() > work[(pivot, col)].norm() {
                pivot = i;
            }
        }
        if work[(pivot, col)].norm() <= scale * f64::EPSILON * n as f64 {
            return Err(NumericsError::SingularMatrix);
        }
        if pivot != col {
            for j in 0..n {
                let t = work[(col, j)];
                work[(col, j)] = work[(pivot, j)];
                work[(pivot, j)] = t;
                let t = inv[(col, j)];
                inv[(col, j)] = inv[(pivot, j)];
                inv[(pivot, j)] = t;
            }
        }
        let p = work[(col, col)];
        for j in 0..n {
            work[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = work[(i, col)];
            if f == Complex64::ZERO {
                continue;
            }
            for j in 0..n {
                let w = work[(col, j)];
                let v = inv[(col, j)];
                work[(i, j)] -= f * w;
                inv[(i, j)] -= f * v;
            }
        }
    }
    Ok(inv)
}
