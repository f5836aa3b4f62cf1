//! Thin SVD of a dense real matrix via Householder bidiagonalization followed
//! by Golub-Kahan implicit-shift QR on the bidiagonal form.

use super::{NumericsError, RealMatrix};

/// Thin SVD: returns `(U rows x k, sigma k descending >= 0, V cols x k)` with
/// `k = min(rows, cols)` and a deterministic sign convention (the
/// largest-magnitude entry of each left singular vector is non-negative).
pub(super) fn thin_svd(
    x: &RealMatrix,
) -> Result<(RealMatrix, Vec<f64>, RealMatrix), NumericsError> {
    if x.rows() < x.cols() {
        let (u, s, v) = thin_svd(&x.transpose())?;
        return Ok((v, s, u));
    }
    let m = x.rows();
    let n = x.cols();

    let mut a = x.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    // Reflectors stored explicitly: (pivot index, v with v[0] = 1, tau).
    let mut left: Vec<(usize, Vec<f64>, f64)> = Vec::with_capacity(n);
    let mut right: Vec<(usize, Vec<f64>, f64)> = Vec::new();

    for k in 0..n {
        // Left reflector zeroing a[k+1..m, k].
        let col: Vec<f64> = (k..m).map(|i| a[(i, k)]).collect();
        let (v, tau, beta) = householder(&col);
        d[k] = beta;
        for j in (k + 1)..n {
            let mut w = 0.0;
            for (t, vi) in v.iter().enumerate() {
                w += vi * a[(k + t, j)];
            }
            w *= tau;
            for (t, vi) in v.iter().enumerate() {
                a[(k + t, j)] -= w * vi;
            }
        }
        left.push((k, v, tau));

        // Right reflector zeroing a[k, k+2..n].
        if k + 2 < n {
            let row: Vec<f64> = ((k + 1)..n).map(|j| a[(k, j)]).collect();
            let (v, tau, beta) = householder(&row);
            e[k] = beta;
            for i in (k + 1)..m {
                let mut w = 0.0;
                for (t, vj) in v.iter().enumerate() {
                    w += vj * a[(i, k + 1 + t)];
                }
                w *= tau;
                for (t, vj) in v.iter().enumerate() {
                    a[(i, k + 1 + t)] -= w * vj;
                }
            }
            right.push((k, v, tau));
        } else if k + 1 < n {
            e[k] = a[(k, k + 1)];
        }
    }

    // Accumulate the thin U (m x n) by applying left reflectors in reverse.
    let mut u = RealMatrix::from_fn(m, n, |i, j| if i == j { 1.0 } else { 0.0 });
    for (k, v, tau) in left.iter().rev() {
        if *tau == 0.0 {
            continue;
        }
        for j in 0..n {
            let mut w = 0.0;
            for (t, vi) in v.iter().enumerate() {
                w += vi * u[(k + t, j)];
            }
            w *= tau;
            for (t, vi) in v.iter().enumerate() {
                u[(k + t, j)] -= w * vi;
            }
        }
    }

    // Accumulate V (n x n) from the right reflectors, also in reverse.
    let mut v_mat = RealMatrix::identity(n);
    for (k, v, tau) in right.iter().rev() {
        if *tau == 0.0 {
            continue;
        }
        for j in 0..n {
            let mut w = 0.0;
            for (t, vi) in v.iter().enumerate() {
                w += vi * v_mat[(k + 1 + t, j)];
            }
            w *= tau;
            for (t, vi) in v.iter().enumerate() {
                v_mat[(k + 1 + t, j)] -= w * vi;
            }
        }
    }

    golub_kahan(&mut d, &mut e, &mut u, &mut v_mat)?;

    // Negate negative singular values, sort descending, fix signs.
    for i in 0..n {
        if d[i] < 0.0 {
            d[i] = -d[i];
            for row in 0..m {
                u[(row, i)] = -u[(row, i)];
            }
        }
    }
    for i in 0..n {
        let mut max_idx = i;
        for j in (i + 1)..n {
            if d[j] > d[max_idx] {
                max_idx = j;
            }
        }
        if max_idx != i {
            d.swap(i, max_idx);
            swap_columns(&mut u, i, max_idx);
            swap_columns(&mut v_mat, i, max_idx);
        }
    }
    for j in 0..n {
        let mut best = 0;
        for i in 1..m {
            if u[(i, j)].abs() > u[(best, j)].abs() {
                best = i;
            }
        }
        if u[(best, j)] < 0.0 {
            for i in 0..m {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..n {
                v_mat[(i, j)] = -v_mat[(i, j)];
            }
        }
    }

    Ok((u, d, v_mat))
}

/// Householder reflector for a real vector: returns `(v, tau, beta)` with
/// `v[0] = 1` and `(I - tau v v^T) x = beta e1`, `beta = ||x|| >= 0`.
fn householder(x: &[f64]) -> (Vec<f64>, f64, f64) {
    let x0 = x[0];
    let sigma: f64 = x[1..].iter().map(|v| v * v).sum();
    let mut v = x.to_vec();
    v[0] = 1.0;
    if sigma == 0.0 {
        if x0 >= 0.0 {
            return (v, 0.0, x0);
        }
        // Pure sign flip.
        return (v, 2.0, -x0);
    }
    let mu = (x0 * x0 + sigma).sqrt();
    let v0 = if x0 <= 0.0 {
        x0 - mu
    } else {
        -sigma / (x0 + mu)
    };
    let tau = 2.0 * v0 * v0 / (sigma + v0 * v0);
    for t in v.iter_mut().skip(1) {
        *t /= v0;
    }
    (v, tau, mu)
}

fn swap_columns(m: &mut RealMatrix, a: usize, b: usize) {
    for i in 0..m.rows() {
        let tmp = m[(i, a)];
        m[(i, a)] = m[(i, b)];
        m[(i, b)] = tmp;
    }
}

fn rot(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        return (1.0, 0.0);
    }
    let r = a.hypot(b);
    (a / r, b / r)
}

/// Implicit-shift QR on the bidiagonal `(d, e)`, accumulating rotations into
/// the columns of `u` and `v`. On return `d` holds the singular values (not
/// yet sorted or sign-fixed) and `e` is numerically zero.
fn golub_kahan(
    d: &mut [f64],
    e: &mut [f64],
    u: &mut RealMatrix,
    v: &mut RealMatrix,
) -> Result<(), NumericsError> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let max_iter = 60 * n * n;
    let mut iter = 0usize;
    let mut hi = n - 1;

    let bnorm = d
        .iter()
        .chain(e.iter())
        .fold(0.0f64, |acc, &x| acc.max(x.abs()))
        .max(f64::MIN_POSITIVE);

    while hi > 0 {
        // Deflate a negligible trailing off-diagonal.
        let thresh = eps * (d[hi - 1].abs() + d[hi].abs()).max(bnorm * eps);
        if e[hi - 1].abs() <= thresh {
            e[hi - 1] = 0.0;
            hi -= 1;
            continue;
        }

        // Locate the start of the unreduced block ending at hi.
        let mut lo = hi - 1;
        while lo > 0 {
            let t = eps * (d[lo - 1].abs() + d[lo].abs()).max(bnorm * eps);
            if e[lo - 1].abs() <= t {
                e[lo - 1] = 0.0;
                break;
            }
            lo -= 1;
        }

        iter += 1;
        if iter > max_iter {
            return Err(NumericsError::NonConvergence);
        }

        // A zero diagonal inside the block breaks the shift; chase the
        // off-diagonal entry off the bottom with left rotations first.
        let mut restarted = false;
        for idx in lo..hi {
            if d[idx].abs() <= eps * bnorm {
                d[idx] = 0.0;
                let mut z = e[idx];
                e[idx] = 0.0;
                for j in (idx + 1)..=hi {
                    let (c, s) = rot(d[j], z);
                    d[j] = c * d[j] + s * z;
                    if j < hi {
                        z = -s * e[j];
                        e[j] *= c;
                    }
                    // Columns j and idx of U combine.
                    for row in 0..u.rows() {
                        let uj = u[(row, j)];
                        let ui = u[(row, idx)];
                        u[(row, j)] = c * uj + s * ui;
                        u[(row, idx)] = c * ui - s * uj;
                    }
                }
                restarted = true;
                break;
            }
        }
        if restarted {
            continue;
        }

        // Wilkinson shift from the trailing 2x2 of B^T B.
        let d_hi = d[hi];
        let d_h1 = d[hi - 1];
        let e_h1 = e[hi - 1];
        let e_h2 = if hi >= 2 && hi - 1 > lo {
            e[hi - 2]
        } else {
            0.0
        };
        let t11 = d_h1 * d_h1 + e_h2 * e_h2;
        let t12 = d_h1 * e_h1;
        let t22 = d_hi * d_hi + e_h1 * e_h1;
        let mu = if t12 == 0.0 {
            t22
        } else {
            let delta = (t11 - t22) / 2.0;
            let sgn = if delta >= 0.0 { 1.0 } else { -1.0 };
            t22 - t12 * t12 / (delta + sgn * (delta * delta + t12 * t12).sqrt())
        };

        // Bulge chase.
        let mut x = d[lo] * d[lo] - mu;
        let mut z = d[lo] * e[lo];
        for k in lo..hi {
            let (c, s) = rot(x, z);
            if k > lo {
                e[k - 1] = c * x + s * z;
            }
            let dk = d[k];
            let ek = e[k];
            let dk1 = d[k + 1];
            d[k] = c * dk + s * ek;
            e[k] = c * ek - s * dk;
            let bulge = s * dk1;
            d[k + 1] = c * dk1;
            for row in 0..v.rows() {
                let vk = v[(row, k)];
                let vk1 = v[(row, k + 1)];
                v[(row, k)] = c * vk + s * vk1;
                v[(row, k + 1)] = c * vk1 - s * vk;
            }

            let (c2, s2) = rot(d[k], bulge);
            d[k] = c2 * d[k] + s2 * bulge;
            let old_ek = e[k];
            let old_dk1 = d[k + 1];
            e[k] = c2 * old_ek + s2 * old_dk1;
            d[k + 1] = c2 * old_dk1 - s2 * old_ek;
            if k + 1 < hi {
                let old_ek1 = e[k + 1];
                x = e[k];
                z = s2 * old_ek1;
                e[k + 1] = c2 * old_ek1;
            }
            for row in 0..u.rows() {
                let uk = u[(row, k)];
                let uk1 = u[(row, k + 1)];
                u[(row, k)] = c2 * uk + s2 * uk1;
                u[(row, k + 1)] = c2 * uk1 - s2 * uk;
            }
        }
    }
    Ok(())
}
