use super::{InputsDigest, VerificationReport, VerifyError};
use crate::fespace::DiscreteSystem;
use crate::linalg::{dot, norm2, sub, DualNorm, SaddleSolver};
use crate::rothe::RotheTrajectory;
use crate::spectral::inf_sup_from_parts;

/// Re-derives every step pressure along a second solver path and checks it
/// against the stored one.
///
/// Given `uₙ` and `ξₙ`, the momentum equation fixes `Bᵀpₙ = rₙ` with
/// `rₙ = ((M + kK_a)uₙ + kTᵀM_Γξₙ − Muₙ₋₁ − kfₙ)/k`. Restricted to the
/// interior test space V₀, a second pressure `p′` solves the `K_V`-saddle
/// problem `K₀x + B₀ᵀp′ = r₀, B₀x = 0` with zero mean. The inf-sup property
/// on V₀ gives `α‖p − p′‖_Q ≤ ‖r₀ − B₀ᵀp‖_{V₀*} + ‖r₀ − B₀ᵀp′‖_{V₀*}`.
///
/// Checks (worst over steps): that bound, the V₀ momentum residual of `p`
/// against `10·tol`, the pressure mean against `1e−10` and `‖Buₙ‖` against
/// `tol`.
pub fn pressure_uniqueness_check(
    sys: &DiscreteSystem,
    traj: &RotheTrajectory,
    tol: f64,
) -> Result<VerificationReport, VerifyError> {
    let interior = &sys.dofs.interior_free;
    if interior.is_empty() {
        return Err(VerifyError::Precondition("no interior velocity DOFs".into()));
    }
    let rows: Vec<usize> = (0..sys.n_pressure()).collect();
    let k0 = sys.k_v.submatrix(interior, interior);
    let b0 = sys.b.submatrix(&rows, interior);
    let alpha = inf_sup_from_parts(&k0, &b0, &sys.m_q, &sys.mean_p)?;
    if alpha <= 0.0 {
        return Err(VerifyError::Precondition("the discrete inf-sup constant over V0 vanishes on this mesh".into()));
    }
    let dn = DualNorm::new(&k0, 1e-13)?;
    let saddle = SaddleSolver::new(&k0, &b0.transpose(), Some(&sys.mean_p), 1e-13)?;

    let mut d = InputsDigest::new("pressure_uniqueness");
    d.system(sys).trajectory(traj).num(tol);
    for (p, xi) in traj.p.iter().zip(&traj.xi) {
        d.nums(p).nums(xi);
    }
    let mut report = VerificationReport::new("pressure_uniqueness", d.finish());
    report.value("alpha_v0", alpha);

    let k = traj.grid.k;
    let a0 = sys.m.add_scaled(1.0, &sys.k_a, k);
    let zeros_p = vec![0.0; sys.n_pressure()];
    // (lhs, rhs) of the worst step for each check, by relative margin
    let mut diff = (0.0, 0.0, f64::INFINITY);
    let mut resid = (0.0, 0.0, f64::INFINITY);
    let (mut mean, mut div) = (0.0f64, 0.0f64);
    let keep = |slot: &mut (f64, f64, f64), lhs: f64, rhs: f64| {
        let score = (rhs - lhs) / lhs.max(rhs).max(f64::MIN_POSITIVE);
        if score < slot.2 {
            *slot = (lhs, rhs, score);
        }
    };
    for n in 1..=traj.steps_done() {
        let (u, u_prev, p) = (&traj.u[n], &traj.u[n - 1], &traj.p[n - 1]);
        let mut r = a0.mul_vec(u);
        let tl = sys.trace_load(&traj.xi[n - 1]);
        let mu_prev = sys.m.mul_vec(u_prev);
        for i in 0..r.len() {
            r[i] = (r[i] + k * tl[i] - mu_prev[i] - k * traj.f[n - 1][i]) / k;
        }
        let r0: Vec<f64> = interior.iter().map(|&i| r[i]).collect();
        let res_p = dn.eval(&sub(&r0, &b0.mul_t_vec(p)))?;
        let alt = saddle.solve(&r0, &zeros_p)?;
        let res_alt = dn.eval(&sub(&r0, &b0.mul_t_vec(&alt.p)))?;
        let dp = sub(p, &alt.p);
        keep(&mut diff, sys.q_norm_sq(&dp).sqrt(), (res_p + res_alt) / alpha);
        let scale = dn.eval(&r0)?.max(1.0);
        keep(&mut resid, res_p, 10.0 * tol * scale);
        mean = mean.max(dot(&sys.mean_p, p).abs());
        div = div.max(norm2(&sys.b.mul_vec(u)));
    }
    // the bound is itself evaluated in floating point
    let floor = 64.0 * f64::EPSILON * (1.0 + traj.p.iter().map(|p| sys.q_norm_sq(p).sqrt()).fold(0.0, f64::max));
    report.check("pressure_difference", diff.0, diff.1, 0.0, floor / alpha);
    report.check("momentum_residual_v0", resid.0, resid.1, 0.0, 0.0);
    report.check("pressure_mean", mean, 1e-10, 0.0, 0.0);
    report.check("divergence", div, tol, 0.0, 0.0);
    Ok(report)
}
