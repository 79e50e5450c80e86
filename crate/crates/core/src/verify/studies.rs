use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{par_map, worst_index, InputsDigest, VerificationReport, VerifyError};
use crate::fespace::DiscreteSystem;
use crate::friction::FrictionLaw;
use crate::linalg::{sub, DualNorm};
use crate::rothe::{
    average_source, project_initial_load, run_from, Field, Manufactured, RotheTrajectory, SourceTerm, StepOptions,
    TimeGrid,
};

const REL_TOL: f64 = 1e-8;
const ABS_TOL: f64 = 1e-12;

/// Initial data as the load `(⟨u₀, φᵢ⟩)ᵢ` together with a source term.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub u0_load: Vec<f64>,
    pub f: SourceTerm,
}

impl ProblemData {
    pub fn from_fields(sys: &DiscreteSystem, u0: &Field, f: SourceTerm) -> Self {
        let u0_load = if *u0 == Field::Zero { vec![0.0; sys.n_free()] } else { sys.load_vector(|x| u0.eval(x, 0.0)) };
        Self { u0_load, f }
    }

    pub fn zero(sys: &DiscreteSystem) -> Self {
        Self { u0_load: vec![0.0; sys.n_free()], f: SourceTerm::zero(sys.n_free()) }
    }

    fn digest(&self, d: &mut InputsDigest, grid: &TimeGrid) {
        d.nums(&self.u0_load).text(self.f.description());
        // the source enters a run only through its step averages
        for f in average_source(&self.f, grid).unwrap_or_default() {
            d.nums(&f);
        }
    }
}

/// Projects the initial data, averages the source and runs all steps.
pub fn run_data(
    sys: &DiscreteSystem,
    law: &FrictionLaw,
    data: &ProblemData,
    grid: &TimeGrid,
    opts: &StepOptions,
) -> Result<RotheTrajectory, VerifyError> {
    let u_init = if data.u0_load.iter().all(|v| *v == 0.0) {
        vec![0.0; sys.n_free()]
    } else {
        project_initial_load(sys, &data.u0_load, grid.k)?
    };
    let f_avg = average_source(&data.f, grid)?;
    Ok(run_from(sys, law, u_init, f_avg, grid, opts)?)
}

fn domain_extent(sys: &DiscreteSystem) -> (f64, f64) {
    sys.dofs.nodes.iter().fold((0.0f64, 0.0f64), |(a, b), x| (a.max(x[0]), b.max(x[1])))
}

fn positive_margin(sys: &DiscreteSystem, law: &FrictionLaw, lambda_tau: f64) -> Result<f64, VerifyError> {
    let m = 2.0 * sys.mu - law.alpha_psi / lambda_tau;
    if m > 0.0 {
        Ok(m)
    } else {
        Err(VerifyError::Precondition(format!(
            "m_margin = {m:e} is not positive; the Lipschitz estimate needs 2 mu > alpha_psi / lambda_tau"
        )))
    }
}

/// Per-node sides of the stability estimate for the difference of two runs.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzOutcome {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub report: VerificationReport,
}

/// Runs both data sets on `grid` and checks, at every node n,
///
/// ```text
/// ‖δₙ‖²_H + m k Σ_{j=1..n} ‖δⱼ‖²_V ≤ ‖δ₀‖²_H + (k/m) Σ_{j=1..n} ‖δfⱼ‖²_{V*}
/// ```
///
/// for `δ = u¹ − u²`, which is what testing the difference of the two step
/// equations with `δₙ` gives. The sums run over the step endpoints, matching
/// backward Euler.
pub fn lipschitz_check(
    sys: &DiscreteSystem,
    law: &FrictionLaw,
    grid: &TimeGrid,
    data1: &ProblemData,
    data2: &ProblemData,
    lambda_tau: f64,
    opts: &StepOptions,
) -> Result<LipschitzOutcome, VerifyError> {
    let m = positive_margin(sys, law, lambda_tau)?;
    let a = run_data(sys, law, data1, grid, opts)?;
    let b = run_data(sys, law, data2, grid, opts)?;
    let mut d = InputsDigest::new("lipschitz_check");
    d.system(sys).num(law.alpha_psi).num(lambda_tau).num(opts.tol);
    data1.digest(&mut d, grid);
    data2.digest(&mut d, grid);
    let mut report = VerificationReport::new("lipschitz_check", d.finish());

    let dn = DualNorm::new(&sys.k_v, 1e-13)?;
    let k = grid.k;
    let d0 = sys.h_norm_sq(&sub(&a.u[0], &b.u[0]));
    let (mut lhs, mut rhs) = (vec![d0], vec![d0]);
    let (mut v_sum, mut f_sum) = (0.0, 0.0);
    for n in 1..=grid.n {
        let delta = sub(&a.u[n], &b.u[n]);
        v_sum += k * sys.v_norm_sq(&delta);
        f_sum += k * dn.eval_sq(&sub(&a.f[n - 1], &b.f[n - 1]))?;
        lhs.push(sys.h_norm_sq(&delta) + m * v_sum);
        rhs.push(d0 + f_sum / m);
    }
    // node 0 is an identity; the estimate has content from node 1 on
    report.check("lipschitz_initial", lhs[0], rhs[0], REL_TOL, ABS_TOL);
    let w = 1 + worst_index(&lhs[1..], &rhs[1..], REL_TOL, ABS_TOL);
    report.check("lipschitz", lhs[w], rhs[w], REL_TOL, ABS_TOL);
    report.value("worst_node", w as f64);
    report.value("worst_ratio", if rhs[w] > 0.0 { lhs[w] / rhs[w] } else { 0.0 });
    report.value("m_margin", m);
    Ok(LipschitzOutcome { lhs, rhs, report })
}

/// `base` plus a random combination of registry fields of size `scale`, in
/// both the initial data and the source.
pub fn random_perturbation(sys: &DiscreteSystem, base: &ProblemData, scale: f64, rng: &mut ChaCha8Rng) -> ProblemData {
    let (lx, ly) = domain_extent(sys);
    let mut c = || scale * (2.0 * rng.gen::<f64>() - 1.0);
    let fields = [
        Field::Trig { a: c(), omega: 0.0, lx, ly },
        Field::Polynomial { a: c(), b: 0.0, lx, ly },
        Field::Indicator { value: [c(), c()], x_split: 0.5 * lx },
    ];
    let mut u0_load = base.u0_load.clone();
    for field in &fields {
        let l = sys.load_vector(|x| field.eval(x, 0.0));
        u0_load.iter_mut().zip(&l).for_each(|(u, v)| *u += v);
    }
    let omega = 2.0 * std::f64::consts::PI * (c() / scale).abs();
    let trig = SourceTerm::from_field(&sys.dofs, Field::Trig { a: c(), omega, lx, ly }, "trig perturbation");
    let poly =
        SourceTerm::from_field(&sys.dofs, Field::Polynomial { a: c(), b: c(), lx, ly }, "polynomial perturbation");
    let f = base.f.plus(1.0, &trig).plus(1.0, &poly);
    ProblemData { u0_load, f }
}

/// `n_pairs` independent random pairs around `base`, each checked by
/// [`lipschitz_check`]. Pair `i` draws from a ChaCha8 stream seeded by
/// `(seed, i)`, so the study is reproducible and order-independent.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_study(
    sys: &DiscreteSystem,
    law: &FrictionLaw,
    grid: &TimeGrid,
    base: &ProblemData,
    n_pairs: usize,
    scale: f64,
    seed: u64,
    lambda_tau: f64,
    opts: &StepOptions,
) -> Result<VerificationReport, VerifyError> {
    positive_margin(sys, law, lambda_tau)?;
    let idx: Vec<usize> = (0..n_pairs).collect();
    let outcomes = par_map(&idx, |&i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let d1 = random_perturbation(sys, base, scale, &mut rng);
        let d2 = random_perturbation(sys, base, scale, &mut rng);
        lipschitz_check(sys, law, grid, &d1, &d2, lambda_tau, opts)
    });
    let mut d = InputsDigest::new("lipschitz_study");
    let mut pairs = Vec::with_capacity(n_pairs);
    for o in outcomes {
        let o = o?;
        d.text(&o.report.digest);
        pairs.push(o);
    }
    let mut report = VerificationReport::new("lipschitz_study", d.finish());
    report.value("pairs", n_pairs as f64);
    for (i, o) in pairs.into_iter().enumerate() {
        report.absorb(&format!("pair_{i:02}:"), o.report);
    }
    Ok(report)
}

/// `‖ū_coarse − ū_fine‖_{L²(0,T;H)}` for grids `N` and `2N`, exact for the
/// piecewise-constant interpolants.
fn interpolant_distance(sys: &DiscreteSystem, coarse: &RotheTrajectory, fine: &RotheTrajectory) -> f64 {
    let kf = fine.grid.k;
    let mut acc = 0.0;
    for i in 1..=fine.grid.n {
        acc += kf * sys.h_norm_sq(&sub(&coarse.u[i.div_ceil(2)], &fine.u[i]));
    }
    acc.sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CauchyOutcome {
    pub steps: Vec<usize>,
    /// `e_j = ‖ū_{k_j} − ū_{k_{j+1}}‖_{L²(0,T;H)}`
    pub errors: Vec<f64>,
    pub report: VerificationReport,
}

/// Runs `N₀, 2N₀, …, 2^h N₀` steps and checks that the successive distances
/// decrease, with ratio at most `max_ratio` from the second ratio
/// `e₂/e₁` on.
#[allow(clippy::too_many_arguments)]
pub fn cauchy_study(
    sys: &DiscreteSystem,
    law: &FrictionLaw,
    data: &ProblemData,
    t_final: f64,
    n0: usize,
    halvings: usize,
    max_ratio: f64,
    opts: &StepOptions,
) -> Result<CauchyOutcome, VerifyError> {
    if halvings < 2 {
        return Err(VerifyError::Precondition(format!("need at least 2 halvings, got {halvings}")));
    }
    let mut grids = vec![TimeGrid::new(t_final, n0)?];
    for _ in 0..halvings {
        let g = grids.last().unwrap().refined();
        grids.push(g);
    }
    let trajs = par_map(&grids, |g| run_data(sys, law, data, g, opts)).into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut d = InputsDigest::new("cauchy_study");
    d.system(sys).num(law.alpha_psi).num(opts.tol).num(max_ratio);
    for t in &trajs {
        d.trajectory(t);
    }
    let mut report = VerificationReport::new("cauchy_study", d.finish());
    let errors: Vec<f64> = trajs.windows(2).map(|w| interpolant_distance(sys, &w[0], &w[1])).collect();
    for (j, e) in errors.iter().enumerate() {
        report.value(format!("e_{j}"), *e);
    }
    for j in 0..errors.len() - 1 {
        if errors[j] > 0.0 {
            report.value(format!("ratio_{}", j + 1), errors[j + 1] / errors[j]);
        }
        report.check(format!("decrease_{}", j + 1), errors[j + 1], errors[j], 0.0, 0.0);
        if j >= 1 {
            report.check(format!("ratio_{}", j + 1), errors[j + 1], max_ratio * errors[j], 0.0, 0.0);
        }
    }
    Ok(CauchyOutcome { steps: grids.iter().map(|g| g.n).collect(), errors, report })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionOutcome {
    pub steps: Vec<usize>,
    /// `‖ū_k − u‖_{L²(0,T;H)}` against the exact solution
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
    pub report: VerificationReport,
}

/// Three-point Gauss rule on `[-1, 1]`.
const GAUSS3: [(f64, f64); 3] =
    [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];

/// ψ ≡ 0 regression against the manufactured free-slip solution
/// ([`Manufactured`]) of amplitude `amp`, on `N₀, …, 2^h N₀` steps, started
/// from the divergence-free H-projection of `u(0)`. `sys`
/// must have Dirichlet left, right and top sides and a Slip bottom side.
/// Reports space-time errors and the observed orders, and checks each order
/// against `min_order` and the pressure mean against `1e−10`.
#[allow(clippy::too_many_arguments)]
pub fn stokes_regression(
    sys: &DiscreteSystem,
    t_final: f64,
    n0: usize,
    halvings: usize,
    amp: f64,
    min_order: f64,
    opts: &StepOptions,
) -> Result<RegressionOutcome, VerifyError> {
    let (lx, ly) = domain_extent(sys);
    let mms = Manufactured { amp, mu: sys.mu, lx, ly };
    let law = FrictionLaw::quadratic(0.0).expect("zero law");
    // u₀ lies in V_div, so the divergence-free H-projection needs no
    // k-smoothing; the smoothing error would scale with ‖Au₀‖
    let u_init = project_initial_load(sys, &sys.load_vector(|x| mms.velocity(x, 0.0)), 0.0)?;
    let f = SourceTerm::from_field(&sys.dofs, Field::ManufacturedForce(mms), "manufactured force");
    let mut grids = vec![TimeGrid::new(t_final, n0)?];
    for _ in 0..halvings {
        let g = grids.last().unwrap().refined();
        grids.push(g);
    }
    let results = par_map(&grids, |g| -> Result<(f64, f64), VerifyError> {
        let traj = run_from(sys, &law, u_init.clone(), average_source(&f, g)?, g, opts)?;
        let mut err = 0.0;
        for n in 1..=g.n {
            let (a, b) = (g.t(n - 1), g.t(n));
            for (x, w) in GAUSS3 {
                let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
                err += 0.5 * (b - a) * w * sys.h_error_sq(&traj.u[n], |p| mms.velocity(p, t));
            }
        }
        let mean = traj.p.iter().map(|p| sys.pressure_integral(p).abs()).fold(0.0, f64::max);
        Ok((err.sqrt(), mean))
    });
    let mut errors = Vec::with_capacity(grids.len());
    let mut mean = 0.0f64;
    for r in results {
        let (e, m) = r?;
        errors.push(e);
        mean = mean.max(m);
    }
    let mut d = InputsDigest::new("stokes_regression");
    d.system(sys).num(t_final).count(n0).count(halvings).num(amp).num(opts.tol).nums(&errors);
    let mut report = VerificationReport::new("stokes_regression", d.finish());
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    for (g, e) in grids.iter().zip(&errors) {
        report.value(format!("error_N{}", g.n), *e);
    }
    for (j, o) in orders.iter().enumerate() {
        report.check(format!("order_{}", j + 1), min_order, *o, 0.0, 0.0);
    }
    report.check("pressure_mean", mean, 1e-10, 0.0, 0.0);
    Ok(RegressionOutcome { steps: grids.iter().map(|g| g.n).collect(), errors, orders, report })
}
