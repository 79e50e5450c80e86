use hvi_core::fespace::{assemble, build_spaces, DiscreteSystem};
use hvi_core::mesh::{build_rect_mesh, build_rect_mesh_unchecked, BoundarySpec, BoundaryTag};
use hvi_core::spectral::{boundary_mass_form, compute_inf_sup, compute_lambda_tau, step_condition, SpectralError};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(n: usize, spec: BoundarySpec) -> DiscreteSystem {
    let m = build_rect_mesh(n, n, 1.0, 1.0, spec).unwrap();
    assemble(&m, &build_spaces(&m), 1.0)
}

fn dense(a: &hvi_core::linalg::SparseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), &a.to_dense())
}

/// Largest eigenvalue of W^{1/2} T K⁻¹ Tᵀ W^{1/2}, i.e. 1/λ_τ,h.
fn dense_inverse_lambda(sys: &DiscreteSystem) -> f64 {
    let k = dense(&sys.k_v);
    let t = dense(&sys.t);
    let w =
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(sys.n_slip(), sys.m_gamma.iter().map(|x| x.sqrt())));
    let kinv_tt = k.cholesky().unwrap().solve(&t.transpose());
    let c = &w * &t * kinv_tt * &w;
    nalgebra::SymmetricEigen::new(c).eigenvalues.max()
}

#[test]
fn empty_slip_boundary_fails() {
    let m = build_rect_mesh_unchecked(2, 2, 1.0, 1.0, BoundarySpec::uniform(BoundaryTag::Dirichlet)).unwrap();
    let sys = assemble(&m, &build_spaces(&m), 1.0);
    assert!(matches!(compute_lambda_tau(&sys, 1e-10), Err(SpectralError::NoSlipBoundary)));
}

#[test]
fn lambda_tau_matches_dense_oracle() {
    let sys = unit(4, BoundarySpec::slip_bottom());
    let (lam, _) = compute_lambda_tau(&sys, 1e-12).unwrap();
    let oracle = 1.0 / dense_inverse_lambda(&sys);
    assert!(((lam - oracle) / oracle).abs() <= 1e-8, "{lam} vs {oracle}");
}

#[test]
fn lambda_tau_converges_under_refinement() {
    let values: Vec<f64> = [1, 2, 4, 8, 16]
        .iter()
        .map(|&n| compute_lambda_tau(&unit(n, BoundarySpec::slip_bottom()), 1e-10).unwrap().0)
        .collect();
    let last = (values[4] - values[3]).abs() / values[3];
    assert!(last < 0.05, "{values:?}");
    for w in values.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "discrete trace eigenvalue should not grow: {values:?}");
    }
}

#[test]
fn trace_certificate_and_sharpness() {
    let sys = unit(4, BoundarySpec { left: BoundaryTag::Dirichlet, ..BoundarySpec::uniform(BoundaryTag::Slip) });
    let (lam, x) = compute_lambda_tau(&sys, 1e-12).unwrap();
    let bform = boundary_mass_form(&sys);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let v: Vec<f64> = (0..sys.n_free()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs = sys.boundary_norm_sq(&sys.tangential_trace(&v));
        assert!((lhs - bform.quad_form(&v)).abs() <= 1e-12 * lhs.max(1.0));
        let rhs = sys.v_norm_sq(&v) / lam;
        assert!(rhs - lhs >= -1e-10, "slack {}", rhs - lhs);
    }
    let lhs = sys.boundary_norm_sq(&sys.tangential_trace(&x));
    let rhs = sys.v_norm_sq(&x) / lam;
    assert!(((lhs - rhs) / rhs).abs() <= 1e-8);
}

/// Inf-sup oracle with a QR-based zero-mean basis, independent of the
/// Householder construction in the library.
fn dense_inf_sup(sys: &DiscreteSystem) -> f64 {
    let idx = &sys.dofs.interior_free;
    let k = dense(&sys.k_v).select_rows(idx).select_columns(idx);
    let b = dense(&sys.b).select_columns(idx);
    let s = &b * k.cholesky().unwrap().solve(&b.transpose());
    let n = sys.n_pressure();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, 0)] = sys.mean_p[i];
        for j in 1..n {
            a[(i, j)] = if i == j { 1.0 } else { 0.0 };
        }
    }
    let q = a.qr().q();
    let z = q.columns(1, n - 1).into_owned();
    let sz = z.transpose() * s * &z;
    let mz = z.transpose() * dense(&sys.m_q) * &z;
    let l = mz.cholesky().unwrap().l();
    let linv = l.try_inverse().unwrap();
    let c = &linv * sz * linv.transpose();
    nalgebra::SymmetricEigen::new(c).eigenvalues.min().max(0.0).sqrt()
}

#[test]
fn inf_sup_matches_dense_oracle() {
    let sys = unit(2, BoundarySpec::slip_bottom());
    let got = compute_inf_sup(&sys).unwrap();
    let oracle = dense_inf_sup(&sys);
    assert!(((got.v0 - oracle) / oracle).abs() <= 1e-8, "{} vs {oracle}", got.v0);
    assert!(got.full >= got.v0 * (1.0 - 1e-12));
}

#[test]
fn single_cell_velocity_space_is_too_small() {
    // two interior velocity DOFs cannot control three zero-mean pressures
    let sys = unit(1, BoundarySpec::slip_bottom());
    assert_eq!(compute_inf_sup(&sys).unwrap().v0, 0.0);
}

#[test]
fn inf_sup_is_stable_under_refinement() {
    let vals: Vec<f64> =
        [2, 4, 8].iter().map(|&n| compute_inf_sup(&unit(n, BoundarySpec::slip_bottom())).unwrap().v0).collect();
    for w in vals.windows(2) {
        assert!(w[1] > 0.8 * w[0], "{vals:?}");
    }
}

proptest! {
    #[test]
    fn step_condition_is_monotone_in_k(mu in 0.01f64..2.0, alpha in 0.0f64..50.0, lambda in 0.1f64..5.0) {
        let ks: Vec<f64> = (1..200).map(|i| 0.01 * i as f64).collect();
        let ok: Vec<bool> = ks.iter().map(|&k| step_condition(mu, alpha, lambda, k)).collect();
        for i in 1..ok.len() {
            prop_assert!(!ok[i] || ok[i - 1]);
        }
        let s = hvi_core::spectral::smallness(mu, alpha, lambda, 1.0);
        for (&k, &o) in ks.iter().zip(&ok) {
            if (k - s.step_bound).abs() > 1e-9 {
                prop_assert_eq!(o, k < s.step_bound);
            }
        }
    }
}
