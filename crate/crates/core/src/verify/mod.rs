//! Numerical checks of the a-priori estimates and convergence statements for
//! Rothe trajectories, plus a manufactured-solution regression for ψ ≡ 0.
//!
//! Every check is an inequality `lhs ≤ rhs·(1 + rel_tol) + abs_tol` between
//! discrete quantities, stored together with a SHA-256 digest of the inputs
//! it was computed from.

mod energy;
mod pressure;
mod studies;

pub use energy::{bv2_partition_sum, bv2_seminorm, energy_bounds, energy_family, xi_bound, Bv2, EnergyBounds};
pub use pressure::pressure_uniqueness_check;
pub use studies::{
    cauchy_study, lipschitz_check, lipschitz_study, random_perturbation, run_data, stokes_regression, CauchyOutcome,
    LipschitzOutcome, ProblemData, RegressionOutcome,
};

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fespace::DiscreteSystem;
use crate::io::{Cell, CsvTable};
use crate::linalg::LinalgError;
use crate::rothe::{RotheError, RotheTrajectory};
use crate::spectral::SpectralError;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Rothe(#[from] RotheError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// One inequality `lhs ≤ rhs·(1 + rel_tol) + abs_tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// `rhs·(1 + rel_tol) + abs_tol − lhs`
    pub margin: f64,
    pub pass: bool,
    pub digest: String,
}

impl Check {
    pub fn evaluate(name: impl Into<String>, lhs: f64, rhs: f64, rel_tol: f64, abs_tol: f64, digest: &str) -> Self {
        let margin = rhs * (1.0 + rel_tol) + abs_tol - lhs;
        // NaN anywhere fails
        let pass = margin >= 0.0;
        Self { name: name.into(), lhs, rhs, rel_tol, abs_tol, margin, pass, digest: digest.to_string() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub title: String,
    pub digest: String,
    pub checks: Vec<Check>,
    /// reported quantities that are not themselves checks
    pub values: Vec<(String, f64)>,
}

impl VerificationReport {
    pub fn new(title: impl Into<String>, digest: String) -> Self {
        Self { title: title.into(), digest, checks: Vec::new(), values: Vec::new() }
    }

    pub fn check(&mut self, name: impl Into<String>, lhs: f64, rhs: f64, rel_tol: f64, abs_tol: f64) -> &Check {
        let c = Check::evaluate(name, lhs, rhs, rel_tol, abs_tol, &self.digest);
        self.checks.push(c);
        self.checks.last().unwrap()
    }

    pub fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.push((name.into(), v));
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn get_value(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// Appends the checks and values of `other`, prefixing their names.
    pub fn absorb(&mut self, prefix: &str, other: VerificationReport) {
        for mut c in other.checks {
            c.name = format!("{prefix}{}", c.name);
            self.checks.push(c);
        }
        for (n, v) in other.values {
            self.values.push((format!("{prefix}{n}"), v));
        }
    }

    pub const CSV_COLUMNS: [&'static str; 9] = [
        "report [-]",
        "check [-]",
        "lhs [check units]",
        "rhs [check units]",
        "margin [check units]",
        "rel_tol [-]",
        "abs_tol [check units]",
        "pass [bool]",
        "inputs_sha256 [hex]",
    ];

    /// One row per check.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&Self::CSV_COLUMNS);
        for c in &self.checks {
            t.push(vec![
                self.title.as_str().into(),
                c.name.as_str().into(),
                c.lhs.into(),
                c.rhs.into(),
                c.margin.into(),
                c.rel_tol.into(),
                c.abs_tol.into(),
                c.pass.into(),
                c.digest.as_str().into(),
            ]);
        }
        t
    }

    pub fn values_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["report [-]", "quantity [-]", "value [quantity units]"]);
        for (n, v) in &self.values {
            t.push(vec![Cell::from(self.title.as_str()), n.as_str().into(), (*v).into()]);
        }
        t
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} [{}]", self.title, &self.digest[..self.digest.len().min(16)])?;
        for (n, v) in &self.values {
            writeln!(f, "  {n} = {v:e}")?;
        }
        for c in &self.checks {
            writeln!(
                f,
                "  {} {}: lhs = {:e}, rhs = {:e}, margin = {:e}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.lhs,
                c.rhs,
                c.margin
            )?;
        }
        let failed = self.failures().len();
        write!(f, "  {} of {} checks passed", self.checks.len() - failed, self.checks.len())
    }
}

/// SHA-256 over a canonical byte stream of the inputs of a check.
#[derive(Clone, Debug)]
pub struct InputsDigest(Sha256);

impl InputsDigest {
    pub fn new(label: &str) -> Self {
        let mut d = Self(Sha256::new());
        d.text(label);
        d
    }

    pub fn text(&mut self, s: &str) -> &mut Self {
        self.count(s.len());
        self.0.update(s.as_bytes());
        self
    }

    pub fn num(&mut self, v: f64) -> &mut Self {
        self.0.update(v.to_le_bytes());
        self
    }

    pub fn nums(&mut self, v: &[f64]) -> &mut Self {
        self.count(v.len());
        for x in v {
            self.num(*x);
        }
        self
    }

    pub fn count(&mut self, n: usize) -> &mut Self {
        self.0.update((n as u64).to_le_bytes());
        self
    }

    pub fn system(&mut self, sys: &DiscreteSystem) -> &mut Self {
        self.num(sys.mu).count(sys.n_free()).count(sys.n_pressure());
        for x in &sys.dofs.nodes {
            self.num(x[0]).num(x[1]);
        }
        self.nums(&sys.m_gamma)
    }

    pub fn trajectory(&mut self, traj: &RotheTrajectory) -> &mut Self {
        self.num(traj.grid.t_final).count(traj.grid.n);
        for u in &traj.u {
            self.nums(u);
        }
        for f in &traj.f {
            self.nums(f);
        }
        self
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// Index of the entry with the smallest relative margin of
/// `lhs ≤ rhs·(1 + rel) + abs`.
fn worst_index(lhs: &[f64], rhs: &[f64], rel: f64, abs: f64) -> usize {
    let score = |i: usize| {
        let m = rhs[i] * (1.0 + rel) + abs - lhs[i];
        m / lhs[i].abs().max(rhs[i].abs()).max(f64::MIN_POSITIVE)
    };
    (0..lhs.len()).min_by(|&a, &b| score(a).total_cmp(&score(b))).unwrap_or(0)
}

/// Maps `f` over `items` on scoped threads; results keep the item order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.unwrap()).collect()
}

/// `(max − min)/max` of non-negative values, 0 when all vanish.
fn relative_spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(0.0, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}
