//! Experiment drivers behind the subcommands. Each returns the process exit
//! code; artifacts go to the resolved output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hvi_core::fespace::{assemble, build_spaces, DiscreteSystem};
use hvi_core::friction::{validate_law, FrictionLaw};
use hvi_core::io::{write_atomic, Cell, CsvTable};
use hvi_core::mesh::{build_rect_mesh, BoundarySpec, BoundaryTag, Mesh};
use hvi_core::rothe::{run, Field, FieldContext, RotheError, RotheTrajectory, SourceTerm, TimeGrid};
use hvi_core::spectral::{compute_inf_sup, compute_lambda_tau, ConstantsReport};
use hvi_core::verify::{
    cauchy_study, energy_bounds, energy_family, lipschitz_study, run_data, stokes_regression, xi_bound, EnergyBounds,
    ProblemData, VerificationReport, VerifyError,
};

use crate::config::{ConvergenceKind, RunConfig};
use crate::{CliError, StudyKind};

pub const EXIT_OK: i32 = 0;
/// a check, gate or validation failed
pub const EXIT_FAILED: i32 = 1;
/// bad command line or config
pub const EXIT_USAGE: i32 = 2;
/// the solver stopped; partial artifacts were written
pub const EXIT_SOLVER: i32 = 3;
/// the request was refused because its preconditions do not hold
pub const EXIT_REFUSED: i32 = 4;

/// Everything built from a config that the commands share.
pub struct Setup {
    pub cfg: RunConfig,
    pub mesh: Mesh,
    pub sys: DiscreteSystem,
    pub law: FrictionLaw,
    /// discrete trace eigenvalue
    pub lambda_tau: f64,
    pub out: PathBuf,
}

impl Setup {
    pub fn new(cfg: RunConfig, out: PathBuf) -> Result<Self, CliError> {
        let g = &cfg.geometry;
        let mesh = build_rect_mesh(g.nx, g.ny, g.lx, g.ly, g.boundary)?;
        let sys = assemble(&mesh, &build_spaces(&mesh), cfg.physics.mu);
        let law = cfg.law()?;
        let lambda_tau = compute_lambda_tau(&sys, 1e-12)?.0;
        Ok(Self { cfg, mesh, sys, law, lambda_tau, out })
    }

    fn field_context(&self) -> FieldContext {
        FieldContext { lx: self.cfg.geometry.lx, ly: self.cfg.geometry.ly, mu: self.cfg.physics.mu }
    }

    pub fn u0(&self) -> Result<Field, CliError> {
        Ok(Field::resolve(&self.cfg.physics.u0.field(), self.field_context())?)
    }

    pub fn source(&self) -> Result<SourceTerm, CliError> {
        let sel = &self.cfg.physics.f;
        let field = Field::resolve(&sel.field(), self.field_context())?;
        Ok(SourceTerm::from_field(&self.sys.dofs, field, sel.to_string()))
    }

    pub fn data(&self) -> Result<ProblemData, CliError> {
        Ok(ProblemData::from_fields(&self.sys, &self.u0()?, self.source()?))
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        Ok(TimeGrid::new(self.cfg.t_final, self.cfg.n_steps)?)
    }

    fn write(&self, name: &str, table: &CsvTable) -> Result<(), CliError> {
        let path = self.out.join(name);
        table.write(&path).map_err(|source| CliError::Output { path, source })
    }

    fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        write_atomic(&path, text.as_bytes()).map_err(|source| CliError::Output { path, source })
    }
}

pub fn constants_report(s: &Setup) -> Result<ConstantsReport, CliError> {
    let inf_sup = compute_inf_sup(&s.sys)?;
    Ok(ConstantsReport::new(s.cfg.physics.mu, s.law.alpha_psi, s.cfg.k(), s.lambda_tau, inf_sup))
}

fn constants_table(r: &ConstantsReport) -> CsvTable {
    let header: Vec<&str> = ConstantsReport::CSV_HEADER.split(',').collect();
    let mut t = CsvTable::new(&header);
    t.push(vec![
        r.mu.into(),
        r.alpha_psi.into(),
        r.k.into(),
        r.lambda_tau.into(),
        r.inf_sup_alpha.into(),
        r.inf_sup_alpha_full.into(),
        r.m_margin.into(),
        r.step_bound.into(),
        r.step_ok.into(),
    ]);
    t
}

fn gate_message(r: &ConstantsReport) -> String {
    format!(
        "smallness fails: m_margin = 2 mu - alpha_psi/lambda_tau = {:e} <= 0, and the step condition fails at k = {:e}; \
         need k < lambda_tau/alpha_psi = {:e} (exact step bound k < {:e})",
        r.m_margin,
        r.k,
        r.k_threshold(),
        r.step_bound
    )
}

pub fn cmd_constants(s: &Setup) -> Result<i32, CliError> {
    let r = constants_report(s)?;
    println!("{r}");
    s.write("constants.csv", &constants_table(&r))?;
    if r.admissible() {
        Ok(EXIT_OK)
    } else {
        eprintln!("{}", gate_message(&r));
        Ok(EXIT_FAILED)
    }
}

pub fn cmd_solve(s: &Setup, force: bool) -> Result<i32, CliError> {
    let r = constants_report(s)?;
    if !r.admissible() {
        if !force {
            eprintln!("refusing to solve: {}; pass --force to run anyway", gate_message(&r));
            return Ok(EXIT_REFUSED);
        }
        eprintln!("warning: {}; continuing because of --force", gate_message(&r));
    }
    let grid = s.grid()?;
    let result = run(&s.sys, &s.law, &s.u0()?, &s.source()?, &grid, &s.cfg.solver);
    let (traj, failure) = match result {
        Ok(t) => (t, None),
        Err(RotheError::StepFailed { step, source, partial }) => (*partial, Some(format!("step {step}: {source}"))),
        Err(e) => return Err(e.into()),
    };
    write_trajectory(s, &traj, failure.as_deref())?;
    match failure {
        None => {
            println!("solved {} steps, k = {:e}; artifacts in {}", traj.steps_done(), grid.k, s.out.display());
            Ok(EXIT_OK)
        }
        Some(msg) => {
            eprintln!(
                "solver failed at {msg}; {} of {} steps written, run_status.csv marks the artifacts partial",
                traj.steps_done(),
                grid.n
            );
            Ok(EXIT_SOLVER)
        }
    }
}

fn write_trajectory(s: &Setup, traj: &RotheTrajectory, failure: Option<&str>) -> Result<(), CliError> {
    let dm = &s.sys.dofs;
    let grid = &traj.grid;
    let mut status = CsvTable::new(&["steps_done [-]", "steps_total [-]", "complete [bool]", "message [-]"]);
    status.push(vec![traj.steps_done().into(), grid.n.into(), failure.is_none().into(), failure.unwrap_or("").into()]);
    s.write("run_status.csv", &status)?;

    if s.cfg.output.csv_trajectory {
        let mut vel = CsvTable::new(&["step [-]", "t [s]", "node [-]", "x [m]", "y [m]", "u_x [m/s]", "u_y [m/s]"]);
        for (n, u) in traj.u.iter().enumerate() {
            for (i, (x, v)) in dm.nodes.iter().zip(dm.nodal_velocity(u)).enumerate() {
                vel.push(vec![
                    n.into(),
                    grid.t(n).into(),
                    i.into(),
                    x[0].into(),
                    x[1].into(),
                    v[0].into(),
                    v[1].into(),
                ]);
            }
        }
        s.write("trajectory.csv", &vel)?;
        let mut pre = CsvTable::new(&["step [-]", "t [s]", "vertex [-]", "x [m]", "y [m]", "p [Pa]"]);
        for (j, p) in traj.p.iter().enumerate() {
            for (v, x) in s.mesh.vertices.iter().enumerate() {
                let pv = p[dm.pressure_of_vertex[v]];
                pre.push(vec![(j + 1).into(), grid.t(j + 1).into(), v.into(), x[0].into(), x[1].into(), pv.into()]);
            }
        }
        s.write("pressure.csv", &pre)?;
    }

    if s.cfg.output.csv_step_stats {
        let mut st = CsvTable::new(&[
            "step [-]",
            "t [s]",
            "iterations [-]",
            "inclusion_residual [m/s]",
            "increment [m/s]",
            "divergence [m^2/s]",
            "pressure_mean [Pa m^2]",
            "energy_residual [-]",
            "omega [-]",
            "u_norm_h [m^2/s]",
            "u_norm_v [m/s]",
            "xi_norm_boundary [Pa m^0.5]",
        ]);
        for (j, stats) in traj.stats.iter().enumerate() {
            let u = &traj.u[j + 1];
            st.push(vec![
                (j + 1).into(),
                grid.t(j + 1).into(),
                stats.iterations.into(),
                stats.inclusion_residual.into(),
                stats.increment.into(),
                stats.divergence.into(),
                stats.pressure_mean.into(),
                stats.energy_residual.into(),
                stats.omega.into(),
                s.sys.h_norm_sq(u).sqrt().into(),
                s.sys.v_norm_sq(u).sqrt().into(),
                s.sys.boundary_norm_sq(&traj.xi[j]).sqrt().into(),
            ]);
        }
        s.write("step_stats.csv", &st)?;
    }

    let stride = s.cfg.output.vtk_stride;
    if stride > 0 {
        for n in 0..traj.u.len() {
            if n % stride != 0 && n != traj.steps_done() {
                continue;
            }
            let nodal = dm.nodal_velocity(&traj.u[n]);
            let vel: Vec<[f64; 2]> = dm.node_of_vertex.iter().map(|&i| nodal[i]).collect();
            let title = format!("stokes-hvi step {n} t = {:e}", grid.t(n));
            let text = if n == 0 {
                s.mesh.to_vtk(&title, &[], &[("velocity", &vel)])
            } else {
                let p: Vec<f64> = dm.pressure_of_vertex.iter().map(|&i| traj.p[n - 1][i]).collect();
                s.mesh.to_vtk(&title, &[("pressure", &p)], &[("velocity", &vel)])
            };
            s.write_text(&format!("state_{n:05}.vtk"), &text)?;
        }
    }
    Ok(())
}

/// Prints the outcome of a report and writes its check and value tables.
fn finish_report(s: &Setup, stem: &str, report: &VerificationReport) -> Result<i32, CliError> {
    s.write(&format!("{stem}_checks.csv"), &report.to_csv())?;
    s.write(&format!("{stem}_values.csv"), &report.values_csv())?;
    let failures = report.failures();
    println!("{}: {} of {} checks passed", report.title, report.checks.len() - failures.len(), report.checks.len());
    if failures.is_empty() {
        return Ok(EXIT_OK);
    }
    let mut msg = String::from("failed checks:");
    for c in failures {
        let _ = write!(msg, "\n  {}: lhs = {:e}, rhs = {:e}, margin = {:e}", c.name, c.lhs, c.rhs, c.margin);
    }
    eprintln!("{msg}");
    Ok(EXIT_FAILED)
}

fn refused(e: VerifyError) -> Result<i32, CliError> {
    match e {
        VerifyError::Precondition(m) => {
            eprintln!("study refused: {m}");
            Ok(EXIT_REFUSED)
        }
        other => Err(other.into()),
    }
}

pub fn cmd_study(s: &Setup, kind: StudyKind) -> Result<i32, CliError> {
    match kind {
        StudyKind::Convergence => study_convergence(s),
        StudyKind::Lipschitz => study_lipschitz(s),
        StudyKind::Energy => study_energy(s),
    }
}

fn study_convergence(s: &Setup) -> Result<i32, CliError> {
    let st = &s.cfg.study;
    let (n0, t) = (s.cfg.n_steps, s.cfg.t_final);
    match st.convergence {
        ConvergenceKind::Cauchy => {
            let out = match cauchy_study(&s.sys, &s.law, &s.data()?, t, n0, st.halvings, st.max_ratio, &s.cfg.solver) {
                Ok(o) => o,
                Err(e) => return refused(e),
            };
            let mut table = CsvTable::new(&[
                "level [-]",
                "steps_coarse [-]",
                "k_coarse [s]",
                "difference [m^2/s^0.5]",
                "ratio [-]",
            ]);
            for (j, e) in out.errors.iter().enumerate() {
                let ratio = if j == 0 { Cell::Text(String::new()) } else { (e / out.errors[j - 1]).into() };
                let n = out.steps[j];
                table.push(vec![j.into(), n.into(), (t / n as f64).into(), (*e).into(), ratio]);
            }
            s.write("convergence.csv", &table)?;
            finish_report(s, "convergence", &out.report)
        }
        ConvergenceKind::Manufactured => {
            let b = &s.cfg.geometry.boundary;
            let expected = BoundarySpec {
                left: BoundaryTag::Dirichlet,
                right: BoundaryTag::Dirichlet,
                top: BoundaryTag::Dirichlet,
                bottom: BoundaryTag::Slip,
            };
            if *b != expected || !s.law.is_zero() {
                eprintln!(
                    "study refused: the manufactured solution needs law = quadratic(0), a slip bottom and Dirichlet \
                     left, right and top sides (got law = {}, boundary {b})",
                    s.cfg.physics.law
                );
                return Ok(EXIT_REFUSED);
            }
            let out = match stokes_regression(&s.sys, t, n0, st.halvings, st.amp, st.min_order, &s.cfg.solver) {
                Ok(o) => o,
                Err(e) => return refused(e),
            };
            let mut table = CsvTable::new(&["steps [-]", "k [s]", "error [m^2/s^0.5]", "order [-]"]);
            for (j, (&n, &e)) in out.steps.iter().zip(&out.errors).enumerate() {
                let order = if j == 0 { Cell::Text(String::new()) } else { out.orders[j - 1].into() };
                table.push(vec![n.into(), (t / n as f64).into(), e.into(), order]);
            }
            s.write("convergence.csv", &table)?;
            finish_report(s, "convergence", &out.report)
        }
    }
}

fn study_lipschitz(s: &Setup) -> Result<i32, CliError> {
    let st = &s.cfg.study;
    let report = lipschitz_study(
        &s.sys,
        &s.law,
        &s.grid()?,
        &s.data()?,
        st.pairs,
        st.scale,
        s.cfg.seed,
        s.lambda_tau,
        &s.cfg.solver,
    );
    match report {
        Ok(r) => finish_report(s, "lipschitz", &r),
        Err(e) => refused(e),
    }
}

fn study_energy(s: &Setup) -> Result<i32, CliError> {
    let st = &s.cfg.study;
    let data = s.data()?;
    let mut grid = s.grid()?;
    let mut family: Vec<EnergyBounds> = Vec::with_capacity(st.levels);
    let mut xi_reports = Vec::with_capacity(st.levels);
    for _ in 0..st.levels.max(1) {
        let traj = match run_data(&s.sys, &s.law, &data, &grid, &s.cfg.solver) {
            Ok(t) => t,
            Err(VerifyError::Rothe(RotheError::StepFailed { step, source, .. })) => {
                eprintln!("solver failed at N = {}, step {step}: {source}", grid.n);
                return Ok(EXIT_SOLVER);
            }
            Err(e) => return refused(e),
        };
        match energy_bounds(&traj, &s.sys, &s.law, s.lambda_tau) {
            Ok(b) => family.push(b),
            Err(e) => return refused(e),
        }
        xi_reports
            .push((grid.k, xi_bound(&traj, &s.sys, &s.law, s.lambda_tau, s.cfg.solver.tol).map_err(CliError::from)?));
        grid = grid.refined();
    }

    let mut table = CsvTable::new(&[
        "k [s]",
        "steps [-]",
        "C1 [m^2/s]",
        "C2 [m^4/s^2]",
        "C3 [m^2/s]",
        "inequality_lhs [m^4/s^2]",
        "inequality_rhs [m^4/s^2]",
        "margin [m^4/s^2]",
        "pass [bool]",
    ]);
    for b in &family {
        let c = b.report.get("energy_inequality").expect("energy check present");
        let steps = (s.cfg.t_final / b.k).round() as usize;
        table.push(vec![
            b.k.into(),
            steps.into(),
            b.c1.into(),
            b.c2.into(),
            b.c3.into(),
            c.lhs.into(),
            c.rhs.into(),
            c.margin.into(),
            c.pass.into(),
        ]);
    }
    s.write("energy.csv", &table)?;
    let mut report = energy_family(&family, st.max_spread);
    for (k, r) in xi_reports {
        report.absorb(&format!("k={k:e}:"), r);
    }
    finish_report(s, "energy", &report)
}

pub fn cmd_validate_law(s: &Setup) -> Result<i32, CliError> {
    let v = &s.cfg.validate;
    let r = validate_law(&s.law, v.samples, v.radius);
    println!("{r}");
    let mut t = CsvTable::new(&[
        "law [-]",
        "n_points [-]",
        "radius [m/s]",
        "c0 [-]",
        "alpha_psi [-]",
        "alpha_hat [-]",
        "growth_violations [-]",
        "monotonicity_violations [-]",
        "worst_growth_margin [-]",
        "worst_monotonicity_margin [-]",
        "pass [bool]",
    ]);
    t.push(vec![
        r.law.into(),
        r.n_points.into(),
        r.radius.into(),
        r.c0.into(),
        r.alpha_psi.into(),
        r.alpha_hat.into(),
        r.growth_violations.into(),
        r.monotonicity_violations.into(),
        r.worst_growth_margin.into(),
        r.worst_monotonicity_margin.into(),
        r.passed().into(),
    ]);
    s.write("validate_law.csv", &t)?;
    if r.passed() {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "law {} violates its certified constants: {} growth and {} monotonicity violations; \
             smallest admissible alpha_psi on the samples is {:e} (configured {:e})",
            r.law, r.growth_violations, r.monotonicity_violations, r.alpha_hat, r.alpha_psi
        );
        Ok(EXIT_FAILED)
    }
}

/// `--out`, then `STOKES_HVI_OUT` (both arrive through `flag`), then the
/// config's `output.dir`, then `stokes-hvi-out`.
pub fn output_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf).or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("stokes-hvi-out"))
}
