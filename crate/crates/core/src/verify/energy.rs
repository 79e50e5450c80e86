use super::{relative_spread, worst_index, InputsDigest, VerificationReport, VerifyError};
use crate::fespace::DiscreteSystem;
use crate::friction::FrictionLaw;
use crate::linalg::{dot, sub, DualNorm, SpdSolver};
use crate::rothe::{Interpolants, RotheTrajectory};

const REL_TOL: f64 = 1e-8;
const ABS_TOL: f64 = 1e-12;

/// Stability quantities of one trajectory and the check of the summed energy
/// inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyBounds {
    pub k: f64,
    /// `maxₙ ‖uₙ‖_H`, n ≥ 1
    pub c1: f64,
    /// `Σ ‖uₙ − uₙ₋₁‖²_H`
    pub c2: f64,
    /// `k Σ ‖uₙ‖²_V`
    pub c3: f64,
    pub report: VerificationReport,
}

fn margin_m(sys: &DiscreteSystem, law: &FrictionLaw, lambda_tau: f64) -> f64 {
    2.0 * sys.mu - law.alpha_psi / lambda_tau
}

fn require_complete(traj: &RotheTrajectory) -> Result<(), VerifyError> {
    if traj.is_complete() {
        Ok(())
    } else {
        Err(VerifyError::Precondition(format!("trajectory has {} of {} steps", traj.steps_done(), traj.grid.n)))
    }
}

/// Evaluates the stability quantities and checks, at every node n,
///
/// ```text
/// ‖uₙ‖²_H + Σ_{j≤n} ‖Δuⱼ‖²_H + m k Σ_{j≤n} ‖uⱼ‖²_V
///     ≤ ‖u₀‖²_H + (2/m)(c² n k + k Σ_{j≤n} ‖fⱼ‖²_{V*})
/// ```
///
/// with `m = 2μ − α/λ`, `c = g₀ √(|Γ_S|_h / λ)` and `g₀ = max |∂ψ(0)|`,
/// which is what testing the step with `uₙ` and absorbing with ε = m/4 gives.
/// `lambda_tau` is the discrete trace eigenvalue (∞ without Slip nodes).
pub fn energy_bounds(
    traj: &RotheTrajectory,
    sys: &DiscreteSystem,
    law: &FrictionLaw,
    lambda_tau: f64,
) -> Result<EnergyBounds, VerifyError> {
    require_complete(traj)?;
    let m = margin_m(sys, law, lambda_tau);
    if !(m > 0.0) {
        return Err(VerifyError::Precondition(format!("m_margin = {m:e} must be positive")));
    }
    let mut d = InputsDigest::new("energy_bounds");
    d.system(sys).trajectory(traj).num(law.alpha_psi).num(lambda_tau);
    let mut report = VerificationReport::new("energy_bounds", d.finish());

    let k = traj.grid.k;
    let (lo, hi) = law.subdifferential(0.0);
    let g0 = lo.abs().max(hi.abs());
    let gamma_len: f64 = sys.m_gamma.iter().sum();
    let c_sq = if lambda_tau.is_finite() { g0 * g0 * gamma_len / lambda_tau } else { 0.0 };
    let dn = DualNorm::new(&sys.k_v, 1e-13)?;

    let e0 = sys.h_norm_sq(&traj.u[0]);
    let n_steps = traj.grid.n;
    let (mut lhs, mut rhs) = (Vec::with_capacity(n_steps), Vec::with_capacity(n_steps));
    let (mut c1, mut c2, mut c3, mut f_sum) = (0.0f64, 0.0, 0.0, 0.0);
    for n in 1..=n_steps {
        let u = &traj.u[n];
        let e = sys.h_norm_sq(u);
        c1 = c1.max(e.sqrt());
        c2 += sys.h_norm_sq(&sub(u, &traj.u[n - 1]));
        c3 += k * sys.v_norm_sq(u);
        f_sum += k * dn.eval_sq(&traj.f[n - 1])?;
        lhs.push(e + c2 + m * c3);
        rhs.push(e0 + 2.0 / m * (c_sq * n as f64 * k + f_sum));
    }
    let w = worst_index(&lhs, &rhs, REL_TOL, ABS_TOL);
    report.check("energy_inequality", lhs[w], rhs[w], REL_TOL, ABS_TOL);
    report.value("worst_node", (w + 1) as f64);
    report.value("m_margin", m);
    report.value("data_constant_sq", c_sq);
    report.value("C1", c1);
    report.value("C2", c2);
    report.value("C3", c3);
    Ok(EnergyBounds { k, c1, c2, c3, report })
}

/// Uniform boundedness across a k-family: each of (C1)–(C3) may vary by at
/// most `max_spread` (relative to its largest value), and every member's
/// energy inequality must hold.
pub fn energy_family(family: &[EnergyBounds], max_spread: f64) -> VerificationReport {
    let mut d = InputsDigest::new("energy_family");
    for b in family {
        d.text(&b.report.digest);
    }
    let mut report = VerificationReport::new("energy_family", d.finish());
    for (name, vals) in [
        ("C1", family.iter().map(|b| b.c1).collect::<Vec<_>>()),
        ("C2", family.iter().map(|b| b.c2).collect()),
        ("C3", family.iter().map(|b| b.c3).collect()),
    ] {
        report.check(format!("{name}_spread"), relative_spread(&vals), max_spread, 0.0, 0.0);
    }
    for b in family {
        report.value(format!("k={:e}:C1", b.k), b.c1);
        report.value(format!("k={:e}:C2", b.k), b.c2);
        report.value(format!("k={:e}:C3", b.k), b.c3);
        report.absorb(&format!("k={:e}:", b.k), b.report.clone());
    }
    report
}

/// Checks `‖ξₙ‖_Γ ≤ c₀′(1 + ‖uₙ‖_V)` at every step, with
/// `c₀′ = c₀ max(√|Γ_S|_h, λ^{−1/2})` from the pointwise growth bound
/// `|ξ| ≤ c₀(1 + |s|)` and the discrete trace inequality.
pub fn xi_bound(
    traj: &RotheTrajectory,
    sys: &DiscreteSystem,
    law: &FrictionLaw,
    lambda_tau: f64,
    tol: f64,
) -> Result<VerificationReport, VerifyError> {
    let mut d = InputsDigest::new("xi_bound");
    d.system(sys).trajectory(traj).num(law.c0).num(lambda_tau);
    for xi in &traj.xi {
        d.nums(xi);
    }
    let mut report = VerificationReport::new("xi_bound", d.finish());
    let gamma_len: f64 = sys.m_gamma.iter().sum();
    let c0p = law.c0 * gamma_len.sqrt().max(if lambda_tau.is_finite() { lambda_tau.powf(-0.5) } else { 0.0 });
    let mut lhs = Vec::with_capacity(traj.xi.len());
    let mut rhs = Vec::with_capacity(traj.xi.len());
    for (n, xi) in traj.xi.iter().enumerate() {
        lhs.push(sys.boundary_norm_sq(xi).sqrt());
        rhs.push(c0p * (1.0 + sys.v_norm_sq(&traj.u[n + 1]).sqrt()));
    }
    report.value("c0_prime", c0p);
    if lhs.is_empty() {
        report.check("xi_growth", 0.0, 0.0, REL_TOL, tol);
        return Ok(report);
    }
    // ξ satisfies the inclusion up to the step tolerance
    let abs = tol * gamma_len.sqrt();
    let w = worst_index(&lhs, &rhs, REL_TOL, abs);
    report.check("xi_growth", lhs[w], rhs[w], REL_TOL, abs);
    report.value("worst_step", (w + 1) as f64);
    Ok(report)
}

/// BV² quantities of the piecewise-constant interpolant, whose value at
/// `t = 0` is taken to be `u₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bv2 {
    /// `Σₙ ‖M(uₙ − uₙ₋₁)‖²_{V*}` over the time-node partition
    pub node_sum: f64,
    /// supremum over all partitions of `[0, T]`
    pub supremum: f64,
    /// `T·k Σ ‖Δuₙ/k‖²_{V*} = T‖u_k′‖²_{L²(V*)}`, which bounds the supremum
    pub bound: f64,
}

/// `Rᵢ = M uᵢ` and `yᵢ = K_V⁻¹ Rᵢ` for all nodes, so that the squared dual
/// distance of nodes `i, j` is `(yⱼ − yᵢ)·(Rⱼ − Rᵢ)`.
type Embedding = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn dual_embedding(traj: &RotheTrajectory, sys: &DiscreteSystem) -> Result<Embedding, VerifyError> {
    let solver = SpdSolver::new(&sys.k_v, 1e-13, 10 * sys.n_free().max(10))?;
    let r: Vec<Vec<f64>> = traj.u.iter().map(|u| sys.m.mul_vec(u)).collect();
    let y = r.iter().map(|ri| solver.solve(ri)).collect::<Result<Vec<_>, _>>()?;
    Ok((r, y))
}

fn dist_sq(r: &[Vec<f64>], y: &[Vec<f64>], i: usize, j: usize) -> f64 {
    if i == j {
        return 0.0;
    }
    dot(&sub(&y[j], &y[i]), &sub(&r[j], &r[i])).max(0.0)
}

/// Node-partition sum, exact supremum over partitions, and the derivative
/// bound. With exponent 2, merging two increments can increase the sum
/// (`‖a + b‖² ≤ 2‖a‖² + 2‖b‖²` only), so the supremum is found by dynamic
/// programming over increasing node subsequences from `0` to `N`: any
/// partition of `[0, T]` samples such a subsequence, and repeated samples of
/// one constant piece contribute nothing.
pub fn bv2_seminorm(interp: &Interpolants<'_>, sys: &DiscreteSystem) -> Result<Bv2, VerifyError> {
    let traj = interp.trajectory();
    let (r, y) = dual_embedding(traj, sys)?;
    let n = traj.u.len() - 1;
    let node_sum: f64 = (1..=n).map(|j| dist_sq(&r, &y, j - 1, j)).sum();
    let mut best = vec![0.0f64; n + 1];
    for j in 1..=n {
        best[j] = (0..j).map(|i| best[i] + dist_sq(&r, &y, i, j)).fold(0.0, f64::max);
    }
    let g = interp.grid();
    Ok(Bv2 { node_sum, supremum: best[n], bound: g.t_final / g.k * node_sum })
}

/// `Σ ‖M(u_{iⱼ} − u_{iⱼ₋₁})‖²_{V*}` over the given node indices.
pub fn bv2_partition_sum(interp: &Interpolants<'_>, sys: &DiscreteSystem, nodes: &[usize]) -> Result<f64, VerifyError> {
    let traj = interp.trajectory();
    if nodes.windows(2).any(|w| w[1] < w[0]) || nodes.last().is_some_and(|&l| l >= traj.u.len()) {
        return Err(VerifyError::Precondition("partition nodes must be sorted and in range".into()));
    }
    let dn = DualNorm::new(&sys.k_v, 1e-13)?;
    let mut s = 0.0;
    for w in nodes.windows(2) {
        s += dn.eval_sq(&sys.m.mul_vec(&sub(&traj.u[w[1]], &traj.u[w[0]])))?;
    }
    Ok(s)
}
