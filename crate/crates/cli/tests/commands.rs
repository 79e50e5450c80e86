use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hvi_core::fespace::{assemble, build_spaces};
use hvi_core::linalg::SaddleSolver;
use hvi_core::mesh::{build_rect_mesh, BoundarySpec};
use hvi_core::rothe::{average_source, Field, SourceTerm, TimeGrid};
use hvi_core::spectral::boundary_mass_form;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn stokes(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stokes-hvi"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("STOKES_HVI_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Rows of a CSV file without the header; fields are never quoted here.
fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.ends_with("\r\n"), "{} must end with CRLF", path.display());
    let mut lines = text.split("\r\n").filter(|l| !l.is_empty());
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    let body: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    for r in &body {
        assert_eq!(r.len(), header.len(), "ragged row in {}", path.display());
    }
    (header, body)
}

fn num(s: &str) -> f64 {
    match s {
        "inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => s.parse().unwrap(),
    }
}

#[test]
fn constants_match_golden_file() {
    let out = TempDir::new().unwrap();
    let o = stokes(&["constants"], &data("reference.cfg"), out.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (h, got) = rows(&out.path().join("constants.csv"));
    let (hg, want) = rows(&data("reference_constants.csv"));
    assert_eq!(h, hg);
    assert!(h.iter().all(|c| c.contains('[') && c.ends_with(']')), "every column names its unit");
    for (g, w) in got[0].iter().zip(&want[0]) {
        if w == "true" || w == "false" || w == "inf" {
            assert_eq!(g, w);
        } else {
            let (g, w) = (num(g), num(w));
            assert!((g - w).abs() <= 1e-8 * w.abs().max(1.0), "{g} vs {w}");
        }
    }
    assert!(stdout(&o).contains("lambda_tau = "));
}

#[test]
fn constants_without_friction_and_with_huge_alpha() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "zero.cfg", "[physics]\nmu = 0.7\nlaw = quadratic(0)\nalpha_psi = 0\n");
    let o = stokes(&["constants"], &cfg, dir.path());
    assert_eq!(code(&o), 0);
    let (_, r) = rows(&dir.path().join("constants.csv"));
    assert_eq!(num(&r[0][6]), 1.4, "m = 2 mu");

    let cfg = write_config(
        &dir,
        "huge.cfg",
        "[physics]\nlaw = slip_weakening(1, 0.5, 0.5)\nalpha_psi = 1e6\n[time]\nt_final = 1\nn = 2\n",
    );
    let o = stokes(&["constants"], &cfg, dir.path());
    assert_eq!(code(&o), 1);
    let e = stderr(&o);
    assert!(e.contains("k < lambda_tau/alpha_psi"), "{e}");
    assert!(e.contains("m_margin"), "{e}");

    // the gate also guards solve, unless forced
    let o = stokes(&["solve"], &cfg, dir.path());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("--force"));
    let o = stokes(&["solve", "--force"], &cfg, dir.path());
    assert_ne!(code(&o), 4);
    assert!(stderr(&o).contains("continuing because of --force"));
}

#[test]
fn config_errors_name_line_and_key() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.cfg", "seed = 1\n[time]\nt_final = 1\nn = many\n");
    let o = stokes(&["constants"], &cfg, dir.path());
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("line 4") && e.contains("time.n"), "{e}");
    let o = stokes(&["constants"], &dir.path().join("missing.cfg"), dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn zero_data_solve_emits_zero_fields() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "z.cfg",
        "[physics]\nlaw = slip_weakening(1, 0.5, 0.5)\n[time]\nn = 4\n[output]\nvtk_stride = 2\n",
    );
    let o = stokes(&["solve"], &cfg, dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, traj) = rows(&dir.path().join("trajectory.csv"));
    assert!(traj.iter().all(|r| num(&r[5]) == 0.0 && num(&r[6]) == 0.0));
    let (_, p) = rows(&dir.path().join("pressure.csv"));
    assert!(p.iter().all(|r| num(&r[5]) == 0.0));
    let (_, status) = rows(&dir.path().join("run_status.csv"));
    assert_eq!(status[0][..3], ["4", "4", "true"]);
    let (_, stats) = rows(&dir.path().join("step_stats.csv"));
    assert_eq!(stats.len(), 4);
    for n in [0, 2, 4] {
        let vtk = fs::read_to_string(dir.path().join(format!("state_{n:05}.vtk"))).unwrap();
        assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(vtk.contains("VECTORS velocity double"));
    }
    assert!(!dir.path().join("state_00001.vtk").exists());
}

#[test]
fn quadratic_law_solve_matches_linear_steps() {
    let (mu, kappa, t_final, n) = (0.8, 1.3, 0.4, 4);
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "l1.cfg",
        &format!(
            "[geometry]\nnx = 3\nny = 3\n[physics]\nmu = {mu}\nlaw = quadratic({kappa})\nf = trig(5, 2)\n\
             [time]\nt_final = {t_final}\nn = {n}\n[solver]\ntol = 1e-12\n"
        ),
    );
    let o = stokes(&["solve"], &cfg, dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    // the friction term is linear, so every step is one saddle solve with the
    // boundary stiffness folded into the velocity block
    let mesh = build_rect_mesh(3, 3, 1.0, 1.0, BoundarySpec::slip_bottom()).unwrap();
    let sys = assemble(&mesh, &build_spaces(&mesh), mu);
    let grid = TimeGrid::new(t_final, n).unwrap();
    let k = grid.k;
    let a = sys.m.add_scaled(1.0, &sys.k_a, k).add_scaled(1.0, &boundary_mass_form(&sys), k * kappa);
    let solver = SaddleSolver::new(&a, &sys.bt, Some(&sys.mean_p), 1e-14).unwrap();
    let f = SourceTerm::from_field(&sys.dofs, Field::Trig { a: 5.0, omega: 2.0, lx: 1.0, ly: 1.0 }, "trig");
    let mut u = vec![0.0; sys.n_free()];
    let mut expected = vec![sys.dofs.nodal_velocity(&u)];
    for f_n in average_source(&f, &grid).unwrap() {
        let mut rhs = sys.m.mul_vec(&u);
        rhs.iter_mut().zip(&f_n).for_each(|(r, f)| *r += k * f);
        u = solver.solve(&rhs, &vec![0.0; sys.n_pressure()]).unwrap().u;
        expected.push(sys.dofs.nodal_velocity(&u));
    }
    let scale = expected.iter().flatten().flat_map(|v| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(scale > 1e-3);
    let (_, traj) = rows(&dir.path().join("trajectory.csv"));
    assert_eq!(traj.len(), (n + 1) * sys.dofs.n_nodes());
    for r in &traj {
        let (step, node): (usize, usize) = (r[0].parse().unwrap(), r[2].parse().unwrap());
        let want = expected[step][node];
        for c in 0..2 {
            assert!((num(&r[5 + c]) - want[c]).abs() <= 1e-9 * scale, "step {step} node {node}");
        }
    }
}

#[test]
fn failed_run_leaves_flagged_partial_artifacts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "p.cfg",
        "[physics]\nlaw = slip_weakening(1, 0.5, 0.5)\nf = trig(20, 0)\n[time]\nn = 4\n[solver]\nmax_iter = 2\n",
    );
    let o = stokes(&["solve"], &cfg, dir.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("partial"));
    let (_, status) = rows(&dir.path().join("run_status.csv"));
    assert_eq!(status[0][2], "false");
    let done: usize = status[0][0].parse().unwrap();
    assert!(done < 4);
    let (_, traj) = rows(&dir.path().join("trajectory.csv"));
    let last: usize = traj.last().unwrap()[0].parse().unwrap();
    assert_eq!(last, done);
    let (_, stats) = rows(&dir.path().join("step_stats.csv"));
    assert_eq!(stats.len(), done);
}

#[test]
fn convergence_study_on_manufactured_solution_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "m.cfg",
        "[geometry]\nnx = 8\nny = 8\n[physics]\nlaw = quadratic(0)\n[time]\nn = 4\n\
         [study]\nconvergence = manufactured\nhalvings = 3\nmin_order = 0.8\n",
    );
    let o = stokes(&["study", "convergence"], &cfg, dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (h, r) = rows(&dir.path().join("convergence.csv"));
    assert_eq!(h[2], "error [m^2/s^0.5]");
    assert_eq!(r.len(), 4);
    for row in &r[1..] {
        assert!(num(&row[3]) >= 0.8, "order {}", row[3]);
    }

    // the manufactured solution needs ψ ≡ 0
    let cfg = write_config(&dir, "m2.cfg", "[physics]\nlaw = quadratic(1)\n[study]\nconvergence = manufactured\n");
    let o = stokes(&["study", "convergence"], &cfg, dir.path());
    assert_eq!(code(&o), 4);
}

#[test]
fn cauchy_study_on_reference_passes() {
    let out = TempDir::new().unwrap();
    let o = stokes(&["study", "convergence"], &data("reference.cfg"), out.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, checks) = rows(&out.path().join("convergence_checks.csv"));
    assert!(checks.iter().all(|c| c[7] == "true"));
    assert!(checks.iter().all(|c| c[8].len() == 64));
}

#[test]
fn lipschitz_study_is_refused_without_margin() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "l.cfg",
        "[physics]\nlaw = slip_weakening(1, 0.5, 0.5)\nalpha_psi = 100\n[time]\nt_final = 0.01\nn = 2\n",
    );
    let o = stokes(&["study", "lipschitz"], &cfg, dir.path());
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("m_margin"), "{}", stderr(&o));

    let o = stokes(&["study", "lipschitz"], &data("reference.cfg"), dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, checks) = rows(&dir.path().join("lipschitz_checks.csv"));
    assert_eq!(checks.len(), 40);
}

#[test]
fn energy_study_emits_per_k_table() {
    let dir = TempDir::new().unwrap();
    let o = stokes(&["study", "energy"], &data("energy.cfg"), dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (h, r) = rows(&dir.path().join("energy.csv"));
    assert_eq!(h[0], "k [s]");
    let steps: Vec<&str> = r.iter().map(|row| row[1].as_str()).collect();
    assert_eq!(steps, ["8", "16", "32", "64", "128"]);

    // the smooth reference problem resolves its transient, so the increment
    // sum shrinks with k and the uniformity check reports it
    let o = stokes(&["study", "energy"], &data("reference.cfg"), dir.path());
    assert_eq!(code(&o), 1);
    let e = stderr(&o);
    assert!(e.contains("C2_spread") && e.contains("margin"), "{e}");
}

#[test]
fn validate_law_positive_and_negative_controls() {
    let dir = TempDir::new().unwrap();
    let l1 = write_config(&dir, "l1.cfg", "[physics]\nlaw = quadratic(2)\n");
    let o = stokes(&["validate-law"], &l1, dir.path());
    assert_eq!(code(&o), 0);
    let o = stokes(&["validate-law"], &data("reference.cfg"), dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("alpha_hat"));
    let (_, r) = rows(&dir.path().join("validate_law.csv"));
    assert_eq!(r[0][1], "100004");

    let halved = write_config(
        &dir,
        "half.cfg",
        "[physics]\nlaw = slip_weakening(1.0, 0.5, 0.5)\nalpha_psi = 0.5\n[validate]\nsamples = 100000\n",
    );
    let o = stokes(&["validate-law"], &halved, dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("monotonicity violations"));
    let (_, r) = rows(&dir.path().join("validate_law.csv"));
    assert_eq!(r[0][10], "false");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for out in [&a, &b] {
        for args in [&["solve"][..], &["study", "lipschitz"], &["study", "convergence"]] {
            let o = stokes(args, &data("reference.cfg"), out.path());
            assert_eq!(code(&o), 0, "{}", stderr(&o));
        }
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 10);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn output_directory_precedence() {
    let dir = TempDir::new().unwrap();
    let env_out = dir.path().join("from_env");
    let cfg_out = dir.path().join("from_config");
    let cfg = write_config(&dir, "o.cfg", &format!("[output]\ndir = {}\n", cfg_out.display()));
    let run = |env: bool, flag: Option<&Path>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_stokes-hvi"));
        c.args(["constants", "--config"]).arg(&cfg).env_remove("STOKES_HVI_OUT");
        if env {
            c.env("STOKES_HVI_OUT", &env_out);
        }
        if let Some(f) = flag {
            c.arg("--out").arg(f);
        }
        assert_eq!(code(&c.output().unwrap()), 0);
    };
    run(false, None);
    assert!(cfg_out.join("constants.csv").exists());
    run(true, None);
    assert!(env_out.join("constants.csv").exists());
    let flag_out = dir.path().join("from_flag");
    run(true, Some(&flag_out));
    assert!(flag_out.join("constants.csv").exists());
}
