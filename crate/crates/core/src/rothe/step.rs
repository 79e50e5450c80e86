//! One backward-Euler step: the discrete mixed system
//!
//! ```text
//! (M + kK_a) u + k Tᵀ W ξ − k Bᵀ p = M u_prev + k f,   B u = 0,
//! ξ_b ∈ ∂ψ((Tu)_b)  at every Slip node b,
//! ```
//!
//! solved as the minimization of
//! `½|u|²_M + (k/2) uᵀK_a u + k Σ_b W_b ψ((Tu)_b) − (M u_prev + k f)·u`
//! over discretely divergence-free `u`.
//!
//! The potential is split as `ψ = (ψ + α/2 s²) − α/2 s²`; the concave part
//! moves into the quadratic, which stays convex on div-free fields when the
//! step condition holds. The convex remainder acts on an auxiliary slip
//! variable `w = Tu` and is handled node by node with the law's prox inside
//! a relaxed alternating-direction iteration. Because the quadratic part is
//! linear in the boundary load, its saddle-point responses to unit loads at
//! the Slip nodes are precomputed once per `k` and each iteration only
//! touches boundary-sized dense data.

use super::RotheError;
use crate::fespace::DiscreteSystem;
use crate::friction::FrictionLaw;
use crate::linalg::dense::symmetric_eigen;
use crate::linalg::{dot, norm2, DenseMatrix, SaddleSolver};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    /// bound on the inclusion residual and on the slip increment
    pub tol: f64,
    pub max_iter: usize,
    /// initial relaxation, halved when the iteration stalls (floor 1/16)
    pub omega: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 20_000, omega: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub iterations: usize,
    /// sup-norm distance of `(Tu, ξ)` from the graph of ∂ψ, per node
    pub inclusion_residual: f64,
    /// last slip increment `‖w⁽ʲ⁺¹⁾ − w⁽ʲ⁾‖_∞`
    pub increment: f64,
    /// `‖Bu‖₂`
    pub divergence: f64,
    /// `∫ p`
    pub pressure_mean: f64,
    /// residual of the step identity tested with `v = u`
    pub energy_residual: f64,
    /// relaxation in effect at exit
    pub omega: f64,
}

#[derive(Clone, Debug)]
pub struct StepSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// nodal ξ on the Slip nodes
    pub xi: Vec<f64>,
    pub stats: StepStats,
}

/// Step solver for fixed `(sys, law, k)`.
#[derive(Clone, Debug)]
pub struct StepSolver {
    law: FrictionLaw,
    k: f64,
    rho: f64,
    /// `ρ − kα`
    shift: f64,
    saddle: SaddleSolver,
    /// velocity and pressure responses to a unit trace load at each Slip node
    z_u: Vec<Vec<f64>>,
    z_p: Vec<Vec<f64>>,
    /// `(I + shift·G W)⁻¹` and `(I + shift·G W)⁻¹ G W`, with `G = T Z_u`
    reduce: DenseMatrix,
    reduce_gw: DenseMatrix,
    weights: Vec<f64>,
    k_max: f64,
}

impl StepSolver {
    pub fn new(sys: &DiscreteSystem, law: &FrictionLaw, k: f64) -> Result<Self, RotheError> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(RotheError::InvalidGrid(format!("step size k = {k} must be positive")));
        }
        let a0 = sys.m.add_scaled(1.0, &sys.k_a, k);
        let saddle = SaddleSolver::new(&a0, &sys.bt, Some(&sys.mean_p), 1e-13)?;
        let n_s = sys.n_slip();
        let alpha = law.alpha_psi;
        let zeros_p = vec![0.0; sys.n_pressure()];
        let weights = sys.m_gamma.clone();
        // ψ ≡ 0 leaves a linear Stokes step with free slip, solved directly
        if n_s == 0 || law.is_zero() {
            let empty = DenseMatrix::zeros(0, 0);
            return Ok(Self {
                law: *law,
                k,
                rho: 1.0,
                shift: 1.0,
                saddle,
                z_u: Vec::new(),
                z_p: Vec::new(),
                reduce: empty.clone(),
                reduce_gw: empty,
                weights,
                k_max: f64::INFINITY,
            });
        }
        let mut z_u = Vec::with_capacity(n_s);
        let mut z_p = Vec::with_capacity(n_s);
        for s in &sys.dofs.slip {
            let mut rhs = vec![0.0; sys.n_free()];
            rhs[s.free] = s.sign;
            let sol = saddle.solve(&rhs, &zeros_p)?;
            z_u.push(sol.u);
            z_p.push(sol.p);
        }
        // G = T Z_u and its symmetric form D G D with D = W^{1/2}
        let mut g = DenseMatrix::zeros(n_s, n_s);
        for (a, sa) in sys.dofs.slip.iter().enumerate() {
            for b in 0..n_s {
                g[(a, b)] = sa.sign * z_u[b][sa.free];
            }
        }
        g.symmetrize();
        let d: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let mut dgd = g.clone();
        for a in 0..n_s {
            for b in 0..n_s {
                dgd[(a, b)] *= d[a] * d[b];
            }
        }
        let (gvals, gvecs) = symmetric_eigen(&dgd);
        let g_max = gvals[n_s - 1].max(0.0);
        // reduced curvature of the quadratic part in the boundary mass metric
        // is 1/g − kα; it must stay positive. k·g_max(k) grows with k, so
        // 1/(α g_max) bounds the admissible k from above
        let k_max = if alpha > 0.0 && g_max > 0.0 { 1.0 / (alpha * g_max) } else { f64::INFINITY };
        if k * alpha * g_max >= 1.0 {
            return Err(RotheError::StepCondition { k, k_max });
        }
        let floor = g_max * 1e-12;
        let curv: Vec<f64> = gvals.iter().filter(|&&v| v > floor).map(|&v| 1.0 / v - k * alpha).collect();
        let (lo, hi) = curv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &c| (lo.min(c), hi.max(c)));
        let rho = if curv.is_empty() { 1.0 } else { (lo * hi).sqrt() };
        let shift = rho - k * alpha;
        // E = V diag(1/(1 + shift·g)) Vᵀ, reduce = D⁻¹ E D
        let mut reduce = DenseMatrix::zeros(n_s, n_s);
        for a in 0..n_s {
            for b in 0..n_s {
                let mut acc = 0.0;
                for (i, &gi) in gvals.iter().enumerate() {
                    acc += gvecs[(a, i)] * gvecs[(b, i)] / (1.0 + shift * gi.max(0.0));
                }
                reduce[(a, b)] = acc * d[b] / d[a];
            }
        }
        let mut gw = g.clone();
        for a in 0..n_s {
            for b in 0..n_s {
                gw[(a, b)] *= weights[b];
            }
        }
        let reduce_gw = reduce.matmul(&gw);
        Ok(Self { law: *law, k, rho, shift, saddle, z_u, z_p, reduce, reduce_gw, weights, k_max })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Penalty parameter of the splitting.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Upper estimate of the largest step for which the step problem stays
    /// convex.
    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    /// Solves from the warm start `w = T u_prev`, `ξ = minimal-norm
    /// subgradient`.
    pub fn solve(
        &self,
        sys: &DiscreteSystem,
        u_prev: &[f64],
        f_n: &[f64],
        opts: &StepOptions,
    ) -> Result<StepSolution, RotheError> {
        let w0 = sys.tangential_trace(u_prev);
        let xi0: Vec<f64> = w0.iter().map(|&w| self.law.select_subgrad(w)).collect();
        self.solve_from(sys, u_prev, f_n, &w0, &xi0, opts)
    }

    /// Solves from a given initial slip `w0` and multiplier `xi0`.
    pub fn solve_from(
        &self,
        sys: &DiscreteSystem,
        u_prev: &[f64],
        f_n: &[f64],
        w0: &[f64],
        xi0: &[f64],
        opts: &StepOptions,
    ) -> Result<StepSolution, RotheError> {
        let k = self.k;
        let alpha = self.law.alpha_psi;
        let rho = self.rho;
        let n_s = self.weights.len();
        let mut r0 = sys.m.mul_vec(u_prev);
        for (r, f) in r0.iter_mut().zip(f_n) {
            *r += k * f;
        }
        let base = self.saddle.solve(&r0, &vec![0.0; sys.n_pressure()])?;
        if n_s == 0 || self.law.is_zero() {
            let p: Vec<f64> = base.p.iter().map(|v| -v / k).collect();
            let xi = vec![0.0; n_s];
            let stats = self.stats(sys, u_prev, f_n, &base.u, &p, &xi, 0, 0.0, 0.0, opts.omega);
            return Ok(StepSolution { u: base.u, p, xi, stats });
        }
        let b0 = self.reduce.mul_vec(&sys.tangential_trace(&base.u));
        let theta = k / (rho + k * alpha);
        let mut w = w0.to_vec();
        let mut y: Vec<f64> = w.iter().zip(xi0).map(|(w, xi)| k * (xi + alpha * w)).collect();
        let mut omega = opts.omega;
        let mut last_merit = f64::INFINITY;
        let mut residual = f64::INFINITY;
        let mut q = vec![0.0; n_s];
        for it in 1..=opts.max_iter {
            for b in 0..n_s {
                q[b] = rho * w[b] - y[b];
            }
            let mut tu = self.reduce_gw.mul_vec(&q);
            for (t, b) in tu.iter_mut().zip(&b0) {
                *t += b;
            }
            let mut incl = 0.0f64;
            let mut dw = 0.0f64;
            let mut merit = 0.0;
            let mut w_new = vec![0.0; n_s];
            let mut y_new = vec![0.0; n_s];
            for b in 0..n_s {
                let hat = omega * tu[b] + (1.0 - omega) * w[b];
                let z = (rho * hat + y[b]) / (rho + k * alpha);
                let wn = self.law.prox(theta, z)?;
                let yn = y[b] + rho * (hat - wn);
                let xi_new = yn / k - alpha * wn;
                // multiplier that makes the momentum equation exact for the
                // velocity built from (w, y)
                let xi_u = (y[b] + rho * (tu[b] - w[b])) / k - alpha * tu[b];
                let gap = self.law.inclusion_gap(wn, xi_new);
                incl = incl.max((tu[b] - wn).abs()).max((xi_u - xi_new).abs() + gap);
                dw = dw.max((wn - w[b]).abs());
                merit += self.weights[b] * (rho * (wn - w[b]).powi(2) + (yn - y[b]).powi(2) / rho);
                w_new[b] = wn;
                y_new[b] = yn;
            }
            residual = incl.max(dw);
            if incl <= opts.tol && dw <= opts.tol {
                let (u, p, xi) = self.recover(&base.u, &base.p, &w, &y, &tu);
                let stats = self.stats(sys, u_prev, f_n, &u, &p, &xi, it, incl, dw, omega);
                return Ok(StepSolution { u, p, xi, stats });
            }
            if merit > last_merit * (1.0 + 1e-9) && omega > 1.0 / 16.0 {
                omega = (0.5 * omega).max(1.0 / 16.0);
            }
            last_merit = merit;
            w = w_new;
            y = y_new;
        }
        Err(RotheError::NotConverged { iterations: opts.max_iter, residual })
    }

    /// Velocity, pressure and momentum-consistent ξ for the iterate `(w, y)`
    /// whose trace is `tu`.
    fn recover(
        &self,
        u_base: &[f64],
        p_base: &[f64],
        w: &[f64],
        y: &[f64],
        tu: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (k, rho, alpha) = (self.k, self.rho, self.law.alpha_psi);
        let mut u = u_base.to_vec();
        let mut pt = p_base.to_vec();
        for b in 0..w.len() {
            let c = self.weights[b] * (rho * w[b] - y[b] - self.shift * tu[b]);
            for (ui, zi) in u.iter_mut().zip(&self.z_u[b]) {
                *ui += c * zi;
            }
            for (pi, zi) in pt.iter_mut().zip(&self.z_p[b]) {
                *pi += c * zi;
            }
        }
        let p = pt.iter().map(|v| -v / k).collect();
        let xi = (0..w.len()).map(|b| (y[b] + rho * (tu[b] - w[b])) / k - alpha * tu[b]).collect();
        (u, p, xi)
    }

    #[allow(clippy::too_many_arguments)]
    fn stats(
        &self,
        sys: &DiscreteSystem,
        u_prev: &[f64],
        f_n: &[f64],
        u: &[f64],
        p: &[f64],
        xi: &[f64],
        iterations: usize,
        inclusion_residual: f64,
        increment: f64,
        omega: f64,
    ) -> StepStats {
        let bu = sys.b.mul_vec(u);
        let du: Vec<f64> = u.iter().zip(u_prev).map(|(a, b)| a - b).collect();
        let lhs = sys.m.quad_form(&du) / self.k
            + dot(&du, &sys.m.mul_vec(u_prev)) / self.k
            + sys.k_a.quad_form(u)
            + dot(&sys.trace_load(xi), u)
            - dot(p, &bu);
        StepStats {
            iterations,
            inclusion_residual,
            increment,
            divergence: norm2(&bu),
            pressure_mean: sys.pressure_integral(p),
            energy_residual: (lhs - dot(f_n, u)).abs(),
            omega,
        }
    }
}

/// The functional minimized by one step, at `v`.
pub fn step_objective(sys: &DiscreteSystem, law: &FrictionLaw, u_prev: &[f64], f_n: &[f64], k: f64, v: &[f64]) -> f64 {
    let mv = sys.m.mul_vec(v);
    let quad = 0.5 * dot(v, &mv) + 0.5 * k * sys.k_a.quad_form(v);
    let tv = sys.tangential_trace(v);
    let boundary: f64 = tv.iter().zip(&sys.m_gamma).map(|(s, w)| w * law.psi(*s)).sum();
    let lin = dot(&sys.m.mul_vec(u_prev), v) + k * dot(f_n, v);
    quad + k * boundary - lin
}
