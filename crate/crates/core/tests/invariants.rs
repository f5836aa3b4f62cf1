//! Property tests for the library-wide invariants: factorization quality,
//! spectral recovery on synthetic systems, equivalence of the two
//! offset-anchoring methods, and the identity-lift reduction.

use dmd_core::dmd::{
    self, fit, full_operator, predict_continuous, predict_discrete, to_continuous, ModeKind,
};
use dmd_core::koopman::{fit_koopman, lift, predict_koopman, Dictionary};
use dmd_core::numerics::{
    self, complex_pinv, diag_power, eig, svd_truncated, ComplexMatrix, RankPolicy, RealMatrix,
};
use dmd_core::trajectory::{build_snapshot_pair, Trajectory, TrajectorySet};
use num_complex::Complex64;
use proptest::prelude::*;

fn frob_diff_identity(m: &RealMatrix) -> f64 {
    let k = m.cols();
    let gram = m.transpose().matmul(m);
    gram.sub(&RealMatrix::identity(k)).frobenius_norm()
}

/// A random well-conditioned diagonalizable system: A = P D P^{-1} with
/// distinct decaying eigenvalues and a near-identity change of basis.
#[derive(Debug, Clone)]
struct TestSystem {
    matrix: RealMatrix,
    eigenvalues: Vec<f64>,
}

fn test_system(dim: usize) -> impl Strategy<Value = TestSystem> {
    let eigs = proptest::collection::vec(0.35f64..1.1, dim);
    let basis = proptest::collection::vec(-0.35f64..0.35, dim * dim);
    (eigs, basis).prop_filter_map("eigenvalues too close", move |(mut eigs, basis)| {
        eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if eigs.windows(2).any(|w| (w[0] - w[1]).abs() < 0.05) {
            return None;
        }
        // P = I + R is strictly diagonally dominant-ish, hence invertible.
        let p = RealMatrix::from_fn(dim, dim, |i, j| {
            basis[i * dim + j] + if i == j { 1.0 } else { 0.0 }
        });
        let p_inv = match numerics::complex_inverse(&p.to_complex()) {
            Ok(inv) => RealMatrix::from_fn(dim, dim, |i, j| inv[(i, j)].re),
            Err(_) => return None,
        };
        let d = RealMatrix::from_fn(dim, dim, |i, j| if i == j { eigs[i] } else { 0.0 });
        let matrix = p.matmul(&d).matmul(&p_inv);
        Some(TestSystem {
            matrix,
            eigenvalues: eigs,
        })
    })
}

/// Structured stress for the eigensolver beyond what random-entry matrices
/// exercise: companion matrices, clustered spectra, and near-triangular
/// matrices with tiny subdiagonals (the shift-blurring regime).
#[test]
fn eig_residual_on_structured_stress_matrices() {
    let mut seed = 0xABCDEF0123456789u64;
    let mut next = move || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let mut worst: f64 = 0.0;
    for trial in 0..600 {
        let n = 2 + (trial % 12);
        let a = match trial % 4 {
            0 => ComplexMatrix::from_fn(n, n, |i, j| {
                if j == n - 1 {
                    Complex64::new(next(), 0.0)
                } else if i == j + 1 {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                }
            }),
            1 => ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(next(), next())),
            2 => ComplexMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(0.7 + 1e-6 * next(), 1e-6 * next())
                } else {
                    Complex64::new(0.3 * next(), 0.3 * next())
                }
            }),
            _ => ComplexMatrix::from_fn(n, n, |i, j| {
                if i > j + 1 {
                    Complex64::ZERO
                } else if i == j + 1 {
                    Complex64::new(1e-9 * next(), 0.0)
                } else {
                    Complex64::new(next(), next())
                }
            }),
        };
        let d = eig(&a).unwrap_or_else(|e| panic!("trial {trial} (n={n}): {e}"));
        if d.vector_condition > 1e8 {
            continue;
        }
        let scale = a.frobenius_norm().max(1e-300);
        for j in 0..n {
            let w = d.vectors.column(j);
            let aw = a.matvec(&w);
            let r: f64 = aw
                .iter()
                .zip(&w)
                .map(|(x, y)| (x - d.values[j] * y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r / scale);
        }
    }
    assert!(worst < 1e-8, "worst residual {worst:.3e}");
}

/// Structured SVD stress: graded singular values, exact low rank, sparse
/// zero patterns, and entries spanning many orders of magnitude.
#[test]
fn svd_factors_on_structured_stress_matrices() {
    let mut seed = 0x1234567890ABCDEFu64;
    let mut next = move || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for trial in 0..600 {
        let rows = 1 + (trial % 11);
        let cols = 1 + ((trial / 11) % 11);
        let x = match trial % 5 {
            0 => RealMatrix::from_fn(rows, cols, |i, _| next() * 10f64.powi(-(i as i32))),
            1 => {
                let u: Vec<f64> = (0..rows).map(|_| next()).collect();
                let v: Vec<f64> = (0..cols).map(|_| next()).collect();
                RealMatrix::from_fn(rows, cols, |i, j| u[i] * v[j])
            }
            2 => RealMatrix::from_fn(rows, cols, |i, j| {
                if i % 3 == 0 || j % 3 == 1 {
                    0.0
                } else {
                    next()
                }
            }),
            3 => RealMatrix::from_fn(rows, cols, |_, _| {
                next() * 10f64.powi((8.0 * next()) as i32)
            }),
            _ => RealMatrix::from_fn(rows, cols, |_, _| next()),
        };
        if x.is_zero() {
            continue;
        }
        let svd = svd_truncated(&x, RankPolicy::RelativeTolerance(1e-13))
            .unwrap_or_else(|e| panic!("trial {trial} {rows}x{cols}: {e}"));
        let k = svd.rank();
        let rebuilt = RealMatrix::from_fn(rows, cols, |i, j| {
            (0..k)
                .map(|t| svd.u[(i, t)] * svd.sigma[t] * svd.v[(j, t)])
                .sum()
        });
        let rel = rebuilt.sub(&x).frobenius_norm() / x.frobenius_norm();
        assert!(rel < 1e-10, "trial {trial}: reconstruction {rel:.3e}");
        assert!(frob_diff_identity(&svd.u) < 1e-10);
        assert!(frob_diff_identity(&svd.v) < 1e-10);
        assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert!(svd.sigma.iter().all(|&s| s > 0.0));
    }
}

fn iterate(system: &RealMatrix, x0: &[f64], samples: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(samples);
    let mut state = x0.to_vec();
    for _ in 0..samples {
        let next = system.matvec(&state);
        out.push(std::mem::replace(&mut state, next));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // ----- numerics ------------------------------------------------------

    #[test]
    fn svd_columns_orthonormal_and_reconstruction_tight(
        rows in 1usize..9,
        cols in 1usize..9,
        entries in proptest::collection::vec(-10.0f64..10.0, 64),
    ) {
        let x = RealMatrix::from_fn(rows, cols, |i, j| entries[i * cols + j]);
        prop_assume!(!x.is_zero());
        let svd = svd_truncated(&x, RankPolicy::RelativeTolerance(1e-13)).unwrap();
        prop_assert!(frob_diff_identity(&svd.u) <= 1e-10);
        prop_assert!(frob_diff_identity(&svd.v) <= 1e-10);
        // Full numerical rank retained: relative reconstruction <= 1e-10.
        let rebuilt = RealMatrix::from_fn(rows, cols, |i, j| {
            (0..svd.rank()).map(|k| svd.u[(i, k)] * svd.sigma[k] * svd.v[(j, k)]).sum()
        });
        let rel = rebuilt.sub(&x).frobenius_norm() / x.frobenius_norm();
        prop_assert!(rel <= 1e-10, "relative reconstruction {rel}");
    }

    #[test]
    fn eig_residual_small_on_random_10x10(
        entries in proptest::collection::vec(-1.0f64..1.0, 100),
    ) {
        let a = ComplexMatrix::from_fn(10, 10, |i, j| Complex64::new(entries[i * 10 + j], 0.0));
        let d = eig(&a).unwrap();
        // The contract targets well-conditioned spectra.
        prop_assume!(d.vector_condition < 1e6);
        let scale = a.frobenius_norm();
        for j in 0..10 {
            let w = d.vectors.column(j);
            let aw = a.matvec(&w);
            let resid: f64 = aw.iter().zip(&w)
                .map(|(x, y)| (x - d.values[j] * y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            prop_assert!(resid / scale <= 1e-8, "residual {}", resid / scale);
        }
        // Real input: spectrum closed under conjugation.
        for &lam in &d.values {
            let best = d.values.iter()
                .map(|&m| (m - lam.conj()).norm())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(best <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn diag_power_integer_matches_repeated_multiplication(
        re in -1.5f64..1.5,
        im in -1.5f64..1.5,
        k in 1u32..12,
    ) {
        let lam = Complex64::new(re, im);
        let out = diag_power(&[lam], k as f64).unwrap()[0];
        let mut manual = Complex64::ONE;
        for _ in 0..k {
            manual *= lam;
        }
        prop_assert!((out - manual).norm() <= 1e-12 * manual.norm().max(1.0));
    }

    // ----- dmd ------------------------------------------------------------

    #[test]
    fn spectral_recovery_and_in_sample_reconstruction(
        system in test_system(3),
        x0 in proptest::collection::vec(0.5f64..1.5, 3),
        samples in 8usize..16,
    ) {
        let states = iterate(&system.matrix, &x0, samples);
        let data = TrajectorySet::single(states.clone(), 1.0, 0.0).unwrap();
        let model = fit(&data, RankPolicy::Fixed(3), ModeKind::Exact).unwrap();
        prop_assume!(model.rank == 3);
        // Every true eigenvalue appears within 1e-8.
        for &target in &system.eigenvalues {
            let best = model.eigenvalues.iter()
                .map(|l| (l - Complex64::new(target, 0.0)).norm())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(best <= 1e-8, "missing eigenvalue {target} ({best})");
        }
        // In-sample forecasts match the data.
        for (k, truth) in states.iter().enumerate() {
            let p = predict_discrete(&model, k as f64).unwrap();
            let num: f64 = p.state.iter().zip(truth)
                .map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let den: f64 = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(num / den <= 1e-6, "k={k}: {}", num / den);
            prop_assert!(p.imag_residual <= 1e-8 * den.max(1.0));
        }
    }

    #[test]
    fn exact_and_projected_modes_agree_on_shared_column_space(
        system in test_system(3),
        x0 in proptest::collection::vec(0.5f64..1.5, 3),
    ) {
        let states = iterate(&system.matrix, &x0, 12);
        let data = TrajectorySet::single(states, 1.0, 0.0).unwrap();
        let exact = fit(&data, RankPolicy::Fixed(3), ModeKind::Exact).unwrap();
        let projected = fit(&data, RankPolicy::Fixed(3), ModeKind::Projected).unwrap();
        prop_assume!(exact.rank == 3);
        for j in 0..exact.rank {
            let a = exact.modes.column(j);
            let b = projected.modes.column(j);
            let diff: f64 = a.iter().zip(&b)
                .map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(diff <= 1e-8, "mode {j} differs by {diff}");
        }
    }

    #[test]
    fn modes_and_spectrum_reconstruct_full_operator(
        system in test_system(3),
        x0 in proptest::collection::vec(0.5f64..1.5, 3),
    ) {
        let states = iterate(&system.matrix, &x0, 12);
        let data = TrajectorySet::single(states, 1.0, 0.0).unwrap();
        let model = fit(&data, RankPolicy::Fixed(3), ModeKind::Exact).unwrap();
        prop_assume!(model.rank == 3);
        let pair = build_snapshot_pair(&data).unwrap();
        let a = full_operator(&model, &pair.x_prime).unwrap();
        // W diag(lambda) W^+ recovers A.
        let pinv = complex_pinv(&model.modes).unwrap();
        let lam_pinv = ComplexMatrix::from_fn(model.rank, 3, |i, j| {
            model.eigenvalues[i] * pinv[(i, j)]
        });
        let rebuilt = model.modes.matmul(&lam_pinv);
        let diff = rebuilt.sub(&a.to_complex()).frobenius_norm() / a.frobenius_norm();
        prop_assert!(diff <= 1e-8, "operator reconstruction off by {diff}");
    }

    #[test]
    fn offset_methods_identical_and_jump_consistent(
        system in test_system(2),
        x0 in proptest::collection::vec(0.5f64..1.5, 2),
        start in 1u8..6,
        target_offset in 0u8..8,
    ) {
        let start = start as f64;
        // States observed from index `start` onward.
        let x_start = {
            let mut s = x0.clone();
            for _ in 0..start as usize {
                s = system.matrix.matvec(&s);
            }
            s
        };
        let states = iterate(&system.matrix, &x_start, 10);
        let offset_data = TrajectorySet::single(states.clone(), 1.0, start).unwrap();
        let shifted_data = TrajectorySet::single(states, 1.0, 0.0).unwrap();
        let m1 = fit(&offset_data, RankPolicy::Fixed(2), ModeKind::Exact).unwrap();
        let m2 = fit(&shifted_data, RankPolicy::Fixed(2), ModeKind::Exact).unwrap();
        prop_assume!(m1.rank == 2);
        let j = start + target_offset as f64;
        let p1 = predict_discrete(&m1, j).unwrap();
        let p2 = predict_discrete(&m2, j - start).unwrap();
        let scale: f64 = p1.state.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in p1.state.iter().zip(&p2.state) {
            prop_assert!((a - b).abs() <= 1e-10 * scale.max(1.0), "{a} vs {b}");
        }
        // Jump consistency: the prediction equals A^(j-i) x_i.
        let pair = build_snapshot_pair(&offset_data).unwrap();
        let a = full_operator(&m1, &pair.x_prime).unwrap();
        let mut oracle = offset_data.first_state().to_vec();
        for _ in 0..target_offset {
            oracle = a.matvec(&oracle);
        }
        for (got, want) in p1.state.iter().zip(&oracle) {
            prop_assert!((got - want).abs() <= 1e-8 * scale.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn discrete_and_continuous_predictions_agree(
        system in test_system(2),
        x0 in proptest::collection::vec(0.5f64..1.5, 2),
        delta_k in prop::sample::select(vec![0.25f64, 0.5, 1.0]),
    ) {
        let states = iterate(&system.matrix, &x0, 12);
        let data = TrajectorySet::single(states, delta_k, 0.0).unwrap();
        let model = fit(&data, RankPolicy::Fixed(2), ModeKind::Exact).unwrap();
        prop_assume!(model.rank == 2);
        // Positive real spectrum here, so the principal branch is safe.
        let spectrum = to_continuous(&model.eigenvalues, delta_k).unwrap();
        prop_assume!(spectrum.omegas.iter().all(|w| (w.im * delta_k).abs() < std::f64::consts::PI));
        for k in -5i32..=20 {
            let d = predict_discrete(&model, k as f64).unwrap();
            let c = predict_continuous(&model, k as f64 * delta_k).unwrap();
            let scale: f64 = d.state.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (a, b) in d.state.iter().zip(&c.state) {
                prop_assert!((a - b).abs() <= 1e-9 * scale.max(1e-12), "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn multi_trajectory_recovers_single_trajectory_spectrum(
        system in test_system(2),
        starts in proptest::collection::vec(0.4f64..1.6, 6),
    ) {
        let runs = vec![
            iterate(&system.matrix, &starts[0..2], 4),
            iterate(&system.matrix, &starts[2..4], 5),
            iterate(&system.matrix, &starts[4..6], 6),
        ];
        let multi = TrajectorySet::new(
            runs.into_iter().map(|r| Trajectory::new(r).unwrap()).collect(),
            1.0,
            0.0,
        ).unwrap();
        let single = TrajectorySet::single(
            iterate(&system.matrix, &starts[0..2], 12), 1.0, 0.0,
        ).unwrap();
        let m_multi = fit(&multi, RankPolicy::Fixed(2), ModeKind::Exact).unwrap();
        let m_single = fit(&single, RankPolicy::Fixed(2), ModeKind::Exact).unwrap();
        prop_assume!(m_multi.rank == 2 && m_single.rank == 2);
        for (a, b) in m_multi.eigenvalues.iter().zip(&m_single.eigenvalues) {
            prop_assert!((a - b).norm() <= 1e-8, "{a} vs {b}");
        }
    }

    // ----- koopman ---------------------------------------------------------

    #[test]
    fn identity_dictionary_reduces_to_plain_dmd(
        system in test_system(2),
        x0 in proptest::collection::vec(0.5f64..1.5, 2),
    ) {
        let states = iterate(&system.matrix, &x0, 10);
        let data = TrajectorySet::single(states, 1.0, 0.0).unwrap();
        let dict = Dictionary::identity(2).unwrap();
        let lifted = lift(&dict, &data).unwrap();
        prop_assert_eq!(&lifted, &data);
        let koopman = fit_koopman(&data, &dict, RankPolicy::Fixed(2), ModeKind::Exact).unwrap();
        let plain = fit(&data, RankPolicy::Fixed(2), ModeKind::Exact).unwrap();
        for (a, b) in koopman.lifted_model.eigenvalues.iter().zip(&plain.eigenvalues) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
        for k in [0.0, 3.0, 7.5] {
            let kp = predict_koopman(&koopman, k, k.fract() != 0.0).unwrap();
            let pp = if k.fract() != 0.0 {
                predict_continuous(&plain, k).unwrap()
            } else {
                predict_discrete(&plain, k).unwrap()
            };
            for (a, b) in kp.state.iter().zip(&pp.state) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn lift_decode_round_trip_exact(
        x in proptest::collection::vec(-3.0f64..3.0, 2),
        degree in 1u32..4,
        include_constant in any::<bool>(),
    ) {
        let dict = Dictionary::monomial(2, degree, include_constant).unwrap();
        let y = dict.lift_state(&x).unwrap();
        let back = dict.decode(&y).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn closing_dictionary_makes_lifted_dynamics_linear(
        lambda in 0.5f64..0.95,
        mu in 0.2f64..0.45,
        x0 in proptest::collection::vec(0.4f64..1.2, 2),
    ) {
        // Slow-manifold family: the lift [x1, x2, x1^2] closes exactly.
        let mut states = vec![x0.clone()];
        for _ in 0..14 {
            let s = states.last().unwrap();
            states.push(vec![
                lambda * s[0],
                mu * s[1] + (lambda * lambda - mu) * s[0] * s[0],
            ]);
        }
        let data = TrajectorySet::single(states.clone(), 1.0, 0.0).unwrap();
        let dict = Dictionary::from_monomials(2, vec![vec![1, 0], vec![0, 1], vec![2, 0]]).unwrap();
        let model = fit_koopman(&data, &dict, RankPolicy::Fixed(3), ModeKind::Exact).unwrap();
        prop_assume!(model.lifted_model.rank == 3);
        // One-step lifted prediction error is at working precision.
        for (k, truth) in states.iter().enumerate() {
            let lifted_truth = dict.lift_state(truth).unwrap();
            let p = dmd::predict_discrete(&model.lifted_model, k as f64).unwrap();
            let num: f64 = p.state.iter().zip(&lifted_truth)
                .map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let den: f64 = lifted_truth.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(num / den <= 1e-8, "k={k}: {}", num / den);
            // Manifold consistency at fit points.
            let kp = predict_koopman(&model, k as f64, false).unwrap();
            prop_assert!(kp.manifold_defect <= 1e-6, "defect {}", kp.manifold_defect);
        }
    }
}
