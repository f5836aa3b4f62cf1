//! Eigendecomposition of a general square complex matrix: unitary reduction
//! to Hessenberg form, single-shift QR iteration to (complex) Schur form, and
//! back-substitution for the eigenvectors of the triangular factor.

use super::solve::{complex_inverse, householder_complex};
use super::{vec_norm, ComplexMatrix, NumericsError, DEFECTIVE_COND_THRESHOLD};
use num_complex::Complex64;

/// Result of [`eig`]. Eigenpairs are sorted by descending eigenvalue
/// magnitude (ties: descending real part, then descending imaginary part)
/// and each eigenvector has unit 2-norm with its largest-magnitude entry
/// rotated to be real and positive.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub values: Vec<Complex64>,
    /// Eigenvector columns, same order as `values`.
    pub vectors: ComplexMatrix,
    /// Frobenius-based estimate of cond(vectors).
    pub vector_condition: f64,
    /// Set when the eigenvector basis is so ill-conditioned that the matrix
    /// is numerically defective; the decomposition is still returned.
    pub defective_warning: bool,
}

/// Eigendecomposition of a general square complex matrix.
pub fn eig(a: &ComplexMatrix) -> Result<EigDecomposition, NumericsError> {
    let n = a.rows();
    if n == 0 || a.cols() != n {
        return Err(NumericsError::DimensionMismatch {
            expected: "square nonempty matrix".into(),
            got: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    if !a.has_finite_entries() {
        return Err(NumericsError::NonFiniteEntry);
    }

    let mut h = a.clone();
    let mut z = ComplexMatrix::identity(n);
    hessenberg(&mut h, &mut z);
    schur(&mut h, &mut z)?;

    let values: Vec<Complex64> = (0..n).map(|i| h[(i, i)]).collect();
    let mut vectors = triangular_eigenvectors(&h);
    vectors = z.matmul(&vectors);

    // Canonical ordering.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (values[i], values[j]);
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
    let sorted_values: Vec<Complex64> = order.iter().map(|&i| values[i]).collect();
    let mut sorted_vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vectors.set_column(dst, &vectors.column(src));
    }
    for j in 0..n {
        let mut col = sorted_vectors.column(j);
        normalize_phase(&mut col);
        sorted_vectors.set_column(j, &col);
    }

    let vector_condition = match complex_inverse(&sorted_vectors) {
        Ok(inv) => sorted_vectors.frobenius_norm() * inv.frobenius_norm(),
        Err(_) => f64::INFINITY,
    };
    Ok(EigDecomposition {
        values: sorted_values,
        vectors: sorted_vectors,
        defective_warning: vector_condition > DEFECTIVE_COND_THRESHOLD,
        vector_condition,
    })
}

/// Scale to unit 2-norm and rotate the largest-magnitude entry to be real
/// and positive. Removes the phase ambiguity so decompositions are
/// reproducible across runs.
pub(crate) fn normalize_phase(v: &mut [Complex64]) {
    let norm = vec_norm(v);
    if norm == 0.0 {
        return;
    }
    for z in v.iter_mut() {
        *z /= norm;
    }
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm_sqr() > v[best].norm_sqr() {
            best = i;
        }
    }
    let pivot = v[best];
    if pivot == Complex64::ZERO {
        return;
    }
    let phase = pivot / pivot.norm();
    let rot = phase.conj();
    for z in v.iter_mut() {
        *z *= rot;
    }
}

/// Unitary similarity reduction to upper Hessenberg form, accumulating the
/// transform into `z`.
fn hessenberg(h: &mut ComplexMatrix, z: &mut ComplexMatrix) {
    let n = h.rows();
    for k in 0..n.saturating_sub(2) {
        let col: Vec<Complex64> = ((k + 1)..n).map(|i| h[(i, k)]).collect();
        let tail: f64 = col[1..].iter().map(|c| c.norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let (u, tau, beta) = householder_complex(&col);
        if tau == 0.0 {
            continue;
        }
        h[(k + 1, k)] = beta;
        for i in (k + 2)..n {
            h[(i, k)] = Complex64::ZERO;
        }
        // Left: rows k+1..n of the trailing columns.
        for j in (k + 1)..n {
            let mut w = Complex64::ZERO;
            for (t, ut) in u.iter().enumerate() {
                w += ut.conj() * h[(k + 1 + t, j)];
            }
            w *= tau;
            for (t, ut) in u.iter().enumerate() {
                h[(k + 1 + t, j)] -= w * ut;
            }
        }
        // Right: columns k+1..n of every row.
        for i in 0..n {
            let mut w = Complex64::ZERO;
            for (t, ut) in u.iter().enumerate() {
                w += h[(i, k + 1 + t)] * ut;
            }
            w *= tau;
            for (t, ut) in u.iter().enumerate() {
                h[(i, k + 1 + t)] -= w * ut.conj();
            }
        }
        // Accumulate into z (right application).
        for i in 0..n {
            let mut w = Complex64::ZERO;
            for (t, ut) in u.iter().enumerate() {
                w += z[(i, k + 1 + t)] * ut;
            }
            w *= tau;
            for (t, ut) in u.iter().enumerate() {
                z[(i, k + 1 + t)] -= w * ut.conj();
            }
        }
    }
}

/// Complex Givens rotation: returns real `c` and complex `s` such that
/// `[[c, s], [-conj(s), c]] * [a; b] = [r; 0]`.
fn zgivens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    if b == Complex64::ZERO {
        return (1.0, Complex64::ZERO);
    }
    if a == Complex64::ZERO {
        return (0.0, b.conj() / b.norm());
    }
    let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let alpha = a / a.norm();
    (a.norm() / norm, alpha * b.conj() / norm)
}

/// Single-shift QR iteration driving the Hessenberg matrix to upper
/// triangular (complex Schur) form.
fn schur(h: &mut ComplexMatrix, z: &mut ComplexMatrix) -> Result<(), NumericsError> {
    let n = h.rows();
    if n == 1 {
        return Ok(());
    }
    let hnorm = h.frobenius_norm().max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut stalled = 0usize;
    let mut total = 0usize;
    let budget = 60 * n;

    while hi > 0 {
        // Deflation scan: find the start of the active block.
        let mut lo = hi;
        while lo > 0 {
            let s = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let thresh = eps * if s > 0.0 { s } else { hnorm };
            if h[(lo, lo - 1)].norm() <= thresh {
                h[(lo, lo - 1)] = Complex64::ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            stalled = 0;
            continue;
        }

        total += 1;
        stalled += 1;
        if total > budget {
            return Err(NumericsError::NonConvergence);
        }

        // Wilkinson shift: the eigenvalue of the trailing 2x2 block closest
        // to the bottom-right entry. Occasionally replaced by an ad hoc
        // exceptional shift to break limit cycles.
        let shift = if stalled.is_multiple_of(10) {
            let off = h[(hi, hi - 1)].norm()
                + if hi >= 2 {
                    h[(hi - 1, hi - 2)].norm()
                } else {
                    0.0
                };
            h[(hi, hi)] + Complex64::new(1.5 * off, 0.0)
        } else {
            let a = h[(hi - 1, hi - 1)];
            let b = h[(hi - 1, hi)];
            let c = h[(hi, hi - 1)];
            let d = h[(hi, hi)];
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let mu1 = (a + d) * 0.5 + disc;
            let mu2 = (a + d) * 0.5 - disc;
            if (mu1 - d).norm() <= (mu2 - d).norm() {
                mu1
            } else {
                mu2
            }
        };

        // A tiny interior subdiagonal blurs the shift before it reaches the
        // bottom of the block, stalling convergence. Walk up from the bottom
        // and start the sweep at the highest row where the entry above is
        // negligible against the local rotation (first-order deflation).
        let mut start = lo;
        let mut cand = hi - 1;
        while cand > lo {
            let h11s = (h[(cand, cand)] - shift).norm();
            let h21 = h[(cand + 1, cand)].norm();
            let scale = h11s + h21;
            if scale > 0.0 {
                let h10 = h[(cand, cand - 1)].norm();
                let local = h[(cand, cand)].norm() + h[(cand + 1, cand + 1)].norm();
                if h10 * (h21 / scale) <= eps * (h11s / scale) * local {
                    start = cand;
                    break;
                }
            }
            cand -= 1;
        }

        // Implicit shifted QR step: create the bulge at the top of the
        // sweep range and chase it off the bottom with Givens rotations.
        let mut x = h[(start, start)] - shift;
        let mut y = h[(start + 1, start)];
        for k in start..hi {
            let (c, s) = zgivens(x, y);
            let sc = s.conj();
            // Left rotation on rows k, k+1. At k > start it must cover
            // column k-1, where the bulge being annihilated lives; at the
            // sweep start that column holds either an exact zero (block
            // boundary) or the tiny entry the lookahead bounded, which is
            // kept first-order consistent without below-Hessenberg fill.
            let col_from = if k == start {
                if start > lo {
                    h[(k, k - 1)] *= c;
                }
                k
            } else {
                k - 1
            };
            for j in col_from..n {
                let top = h[(k, j)];
                let bot = h[(k + 1, j)];
                h[(k, j)] = c * top + s * bot;
                h[(k + 1, j)] = -sc * top + c * bot;
            }
            // Right rotation on columns k, k+1; same update accumulates z.
            for i in 0..n {
                let left = h[(i, k)];
                let right = h[(i, k + 1)];
                h[(i, k)] = c * left + sc * right;
                h[(i, k + 1)] = -s * left + c * right;
            }
            for i in 0..n {
                let left = z[(i, k)];
                let right = z[(i, k + 1)];
                z[(i, k)] = c * left + sc * right;
                z[(i, k + 1)] = -s * left + c * right;
            }
            if k + 1 < hi {
                x = h[(k + 1, k)];
                y = h[(k + 2, k)];
            }
        }
    }
    // Clean residual subdiagonal noise so the matrix is exactly triangular.
    for i in 1..n {
        for j in 0..i {
            h[(i, j)] = Complex64::ZERO;
        }
    }
    Ok(())
}

/// Eigenvectors of an upper-triangular matrix by back substitution. Tiny
/// denominators (repeated eigenvalues) are perturbed rather than failed, so
/// defective matrices still produce a (near-parallel) basis.
fn triangular_eigenvectors(t: &ComplexMatrix) -> ComplexMatrix {
    let n = t.rows();
    let tnorm = t.frobenius_norm();
    // Keep the perturbation large enough that its square cannot underflow
    // in complex division.
    let floor = (f64::EPSILON * tnorm).max(1e-150);
    let mut vectors = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let lambda = t[(i, i)];
        let mut y = vec![Complex64::ZERO; n];
        y[i] = Complex64::ONE;
        for j in (0..i).rev() {
            let mut acc = Complex64::ZERO;
            for k in (j + 1)..=i {
                acc += t[(j, k)] * y[k];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < floor {
                denom = Complex64::new(floor, 0.0);
            }
            y[j] = -acc / denom;
            // Overflow control for strongly non-normal blocks.
            let mag = y[j].norm();
            if mag > 1e100 {
                for v in y.iter_mut().take(i + 1) {
                    *v /= mag;
                }
            }
        }
        vectors.set_column(i, &y);
    }
    vectors
}
