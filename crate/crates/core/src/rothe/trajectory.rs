use super::fields::{Field, SourceTerm};
use super::step::{StepOptions, StepSolver, StepStats};
use super::{RotheError, TimeGrid};
use crate::fespace::DiscreteSystem;
use crate::friction::FrictionLaw;
use crate::linalg::{all_finite, SaddleSolver};

/// Per-step states of one Rothe run. `u` has `N+1` entries (including the
/// initial state); `p`, `xi`, `f` and `stats` have one entry per step.
#[derive(Clone, Debug)]
pub struct RotheTrajectory {
    pub grid: TimeGrid,
    pub u: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    /// step averages `f_n`
    pub f: Vec<Vec<f64>>,
    pub stats: Vec<StepStats>,
}

impl RotheTrajectory {
    pub fn steps_done(&self) -> usize {
        self.u.len().saturating_sub(1)
    }

    pub fn is_complete(&self) -> bool {
        self.steps_done() == self.grid.n
    }
}

const GAUSS2: f64 = 0.288_675_134_594_812_9; // 1/(2√3)

/// `f_n = k⁻¹ ∫_{t_{n−1}}^{t_n} f dt` by two-point Gauss per step.
pub fn average_source(f: &SourceTerm, grid: &TimeGrid) -> Result<Vec<Vec<f64>>, RotheError> {
    let mut out = Vec::with_capacity(grid.n);
    for n in 1..=grid.n {
        let (a, b) = (grid.t(n - 1), grid.t(n));
        let mid = 0.5 * (a + b);
        let half = b - a;
        let mut acc: Option<Vec<f64>> = None;
        for t in [mid - GAUSS2 * half, mid + GAUSS2 * half] {
            let v = f.load(t);
            if !all_finite(&v) {
                return Err(RotheError::NonFiniteSource { t });
            }
            match &mut acc {
                None => acc = Some(v),
                Some(s) => s.iter_mut().zip(&v).for_each(|(x, y)| *x = 0.5 * (*x + y)),
            }
        }
        out.push(acc.unwrap_or_default());
    }
    Ok(out)
}

/// Discretely divergence-free `v` minimizing `‖v − u₀‖²_H + k‖v‖²_V`, for an
/// analytic initial field.
pub fn project_initial(sys: &DiscreteSystem, u0: &Field, grid: &TimeGrid) -> Result<Vec<f64>, RotheError> {
    if *u0 == Field::Zero {
        return Ok(vec![0.0; sys.n_free()]);
    }
    let load = sys.load_vector(|x| u0.eval(x, 0.0));
    project_initial_load(sys, &load, grid.k)
}

/// Same projection from the load `(⟨u₀, φ_i⟩)_i`.
pub fn project_initial_load(sys: &DiscreteSystem, load: &[f64], k: f64) -> Result<Vec<f64>, RotheError> {
    let a = sys.m.add_scaled(1.0, &sys.k_v, k);
    let s = SaddleSolver::new(&a, &sys.bt, Some(&sys.mean_p), 1e-13)?;
    Ok(s.solve(load, &vec![0.0; sys.n_pressure()])?.u)
}

/// Projects `u0`, averages `f` and runs all steps.
pub fn run(
    sys: &DiscreteSystem,
    law: &FrictionLaw,
    u0: &Field,
    f: &SourceTerm,
    grid: &TimeGrid,
    opts: &StepOptions,
) -> Result<RotheTrajectory, RotheError> {
    let u_init = project_initial(sys, u0, grid)?;
    let f_avg = average_source(f, grid)?;
    run_from(sys, law, u_init, f_avg, grid, opts)
}

/// Runs from a given discrete initial state and step-averaged loads. A step
/// failure returns [`RotheError::StepFailed`] carrying the completed steps.
pub fn run_from(
    sys: &DiscreteSystem,
    law: &FrictionLaw,
    u_init: Vec<f64>,
    f_avg: Vec<Vec<f64>>,
    grid: &TimeGrid,
    opts: &StepOptions,
) -> Result<RotheTrajectory, RotheError> {
    assert_eq!(f_avg.len(), grid.n, "one load per step");
    let mut traj = RotheTrajectory {
        grid: *grid,
        u: vec![u_init],
        p: Vec::with_capacity(grid.n),
        xi: Vec::with_capacity(grid.n),
        f: Vec::with_capacity(grid.n),
        stats: Vec::with_capacity(grid.n),
    };
    let solver = match StepSolver::new(sys, law, grid.k) {
        Ok(s) => s,
        Err(e) => return Err(RotheError::StepFailed { step: 1, source: Box::new(e), partial: Box::new(traj) }),
    };
    for (n, f_n) in f_avg.into_iter().enumerate() {
        let u_prev = &traj.u[n];
        let w0 = sys.tangential_trace(u_prev);
        let xi0 = match traj.xi.last() {
            Some(xi) => xi.clone(),
            None => w0.iter().map(|&w| law.select_subgrad(w)).collect(),
        };
        match solver.solve_from(sys, u_prev, &f_n, &w0, &xi0, opts) {
            Ok(sol) => {
                traj.u.push(sol.u);
                traj.p.push(sol.p);
                traj.xi.push(sol.xi);
                traj.f.push(f_n);
                traj.stats.push(sol.stats);
            }
            Err(e) => return Err(RotheError::StepFailed { step: n + 1, source: Box::new(e), partial: Box::new(traj) }),
        }
    }
    Ok(traj)
}

/// Piecewise-linear and piecewise-constant interpolants of a trajectory.
#[derive(Clone, Copy, Debug)]
pub struct Interpolants<'a> {
    traj: &'a RotheTrajectory,
}

pub fn build_interpolants(traj: &RotheTrajectory) -> Interpolants<'_> {
    Interpolants { traj }
}

impl<'a> Interpolants<'a> {
    pub fn grid(&self) -> &TimeGrid {
        &self.traj.grid
    }

    pub fn trajectory(&self) -> &'a RotheTrajectory {
        self.traj
    }

    /// `u_k(t) = u_n + (t/k − n)(u_n − u_{n−1})` on `[t_{n−1}, t_n]`.
    pub fn u_linear(&self, t: f64) -> Vec<f64> {
        let g = &self.traj.grid;
        let n = g.interval(t);
        let s = (t - g.t(n)) / g.k;
        let (a, b) = (&self.traj.u[n - 1], &self.traj.u[n]);
        // convex combination, exact at both ends
        a.iter().zip(b).map(|(a, b)| -s * a + (1.0 + s) * b).collect()
    }

    /// `ū_k(t) = u_n` on `(t_{n−1}, t_n]`, and `u_1` on `[0, t_1]`.
    pub fn u_bar(&self, t: f64) -> &'a [f64] {
        &self.traj.u[self.traj.grid.interval(t)]
    }

    pub fn xi_bar(&self, t: f64) -> &'a [f64] {
        &self.traj.xi[self.traj.grid.interval(t) - 1]
    }

    pub fn f_bar(&self, t: f64) -> &'a [f64] {
        &self.traj.f[self.traj.grid.interval(t) - 1]
    }

    /// Derivative of `u_k` on step `n`: `(u_n − u_{n−1})/k`.
    pub fn u_derivative(&self, n: usize) -> Vec<f64> {
        let k = self.traj.grid.k;
        self.traj.u[n].iter().zip(&self.traj.u[n - 1]).map(|(b, a)| (b - a) / k).collect()
    }
}
