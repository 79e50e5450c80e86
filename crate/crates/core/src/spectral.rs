//! Discrete trace eigenvalue, inf-sup constant, and the smallness and
//! step-size conditions they feed.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::fespace::DiscreteSystem;
use crate::linalg::dense::generalized_symmetric_eigen;
use crate::linalg::{gen_eig_extreme, DenseMatrix, EigenTarget, LinalgError, SparseMatrix, SpdSolver, TripletBuilder};

#[derive(Debug, Clone, Error)]
pub enum SpectralError {
    #[error("no Slip boundary nodes: the trace operator is zero")]
    NoSlipBoundary,
    #[error("pressure space has no zero-mean functions (n_p = {0})")]
    TrivialPressureSpace(usize),
    #[error("velocity space for the inf-sup quotient is empty")]
    EmptyVelocitySpace,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Smallest positive λ of `K_V x = λ Tᵀ M_Γ T x` and its K_V-normalized
/// eigenvector.
pub fn compute_lambda_tau(sys: &DiscreteSystem, tol: f64) -> Result<(f64, Vec<f64>), SpectralError> {
    if sys.n_slip() == 0 {
        return Err(SpectralError::NoSlipBoundary);
    }
    let bmat = boundary_mass_form(sys);
    match gen_eig_extreme(&sys.k_v, &bmat, EigenTarget::SmallestPositive, tol) {
        Err(LinalgError::EmptyPositiveSpectrum) => Err(SpectralError::NoSlipBoundary),
        other => Ok(other?),
    }
}

/// `Tᵀ diag(M_Γ) T` on the free velocity DOFs.
pub fn boundary_mass_form(sys: &DiscreteSystem) -> SparseMatrix {
    let mut b = TripletBuilder::new(sys.n_free(), sys.n_free());
    for (s, w) in sys.dofs.slip.iter().zip(&sys.m_gamma) {
        b.push(s.free, s.free, s.sign * s.sign * w);
    }
    b.build_symmetric()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfSup {
    /// supremum over V₀ (all boundary DOFs fixed)
    pub v0: f64,
    /// supremum over the full discrete V, for diagnostics
    pub full: f64,
}

/// Discrete inf-sup constants over V₀ and over V.
pub fn compute_inf_sup(sys: &DiscreteSystem) -> Result<InfSup, SpectralError> {
    let interior = &sys.dofs.interior_free;
    let all: Vec<usize> = (0..sys.n_free()).collect();
    let rows: Vec<usize> = (0..sys.n_pressure()).collect();
    let v0 = inf_sup_from_parts(
        &sys.k_v.submatrix(interior, interior),
        &sys.b.submatrix(&rows, interior),
        &sys.m_q,
        &sys.mean_p,
    )?;
    let full = inf_sup_from_parts(&sys.k_v, &sys.b.submatrix(&rows, &all), &sys.m_q, &sys.mean_p)?;
    Ok(InfSup { v0, full })
}

/// `√λ_min` of `Zᵀ B K⁻¹ Bᵀ Z y = β² Zᵀ M_Q Z y`, where the columns of `Z`
/// span the pressures with zero mean. A rounding-level λ_min (a spurious
/// pressure mode) is reported as 0.
pub fn inf_sup_from_parts(
    k: &SparseMatrix,
    b: &SparseMatrix,
    m_q: &SparseMatrix,
    mean: &[f64],
) -> Result<f64, SpectralError> {
    let n_p = b.rows();
    if n_p < 2 {
        return Err(SpectralError::TrivialPressureSpace(n_p));
    }
    if k.rows() == 0 {
        return Err(SpectralError::EmptyVelocitySpace);
    }
    let solver = SpdSolver::new(k, 1e-14, 20 * k.rows().max(10))?;
    // columns of K⁻¹Bᵀ, then S = B K⁻¹ Bᵀ
    let mut s = DenseMatrix::zeros(n_p, n_p);
    let mut col = vec![0.0; k.rows()];
    for j in 0..n_p {
        col.iter_mut().for_each(|v| *v = 0.0);
        for (i, v) in b.row(j) {
            col[i] = v;
        }
        let x = solver.solve(&col)?;
        let bx = b.mul_vec(&x);
        for i in 0..n_p {
            s[(i, j)] = bx[i];
        }
    }
    s.symmetrize();
    let mq = DenseMatrix::from_row_major(n_p, n_p, m_q.to_dense());
    let z = zero_mean_basis(mean);
    let zt = z.transpose();
    let sz = zt.matmul(&s).matmul(&z);
    let mz = zt.matmul(&mq).matmul(&z);
    let (vals, _) = generalized_symmetric_eigen(&sz, &mz)?;
    let top = vals[vals.len() - 1];
    if vals[0] <= 1e-12 * top {
        return Ok(0.0);
    }
    Ok(vals[0].sqrt())
}

/// Orthonormal basis (as columns) of the complement of `m`, from the
/// Householder reflector that maps `m` onto the first axis.
fn zero_mean_basis(m: &[f64]) -> DenseMatrix {
    let n = m.len();
    let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut v = m.to_vec();
    v[0] += if m[0] >= 0.0 { norm } else { -norm };
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let mut z = DenseMatrix::zeros(n, n - 1);
    for j in 1..n {
        for i in 0..n {
            let h = if i == j { 1.0 } else { 0.0 } - 2.0 * v[i] * v[j] / vv;
            z[(i, j - 1)] = h;
        }
    }
    z
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smallness {
    pub m_margin: f64,
    pub step_bound: f64,
    /// α k/λ < 1 + 2μk at the given k
    pub step_ok: bool,
}

/// `m = 2μ − α/λ`; the step condition α k/λ < 1 + 2μk holds iff
/// `k < step_bound`.
pub fn smallness(mu: f64, alpha_psi: f64, lambda_tau: f64, k: f64) -> Smallness {
    let m_margin = 2.0 * mu - alpha_psi / lambda_tau;
    let step_bound = if m_margin >= 0.0 { f64::INFINITY } else { lambda_tau / (alpha_psi - 2.0 * mu * lambda_tau) };
    Smallness { m_margin, step_bound, step_ok: step_condition(mu, alpha_psi, lambda_tau, k) }
}

/// Unique solvability condition of one time step.
pub fn step_condition(mu: f64, alpha_psi: f64, lambda_tau: f64, k: f64) -> bool {
    alpha_psi * k / lambda_tau < 1.0 + 2.0 * mu * k
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantsReport {
    pub mu: f64,
    pub alpha_psi: f64,
    pub k: f64,
    pub lambda_tau: f64,
    pub inf_sup_alpha: f64,
    pub inf_sup_alpha_full: f64,
    pub m_margin: f64,
    pub step_bound: f64,
    pub step_ok: bool,
}

impl ConstantsReport {
    pub fn new(mu: f64, alpha_psi: f64, k: f64, lambda_tau: f64, inf_sup: InfSup) -> Self {
        let s = smallness(mu, alpha_psi, lambda_tau, k);
        Self {
            mu,
            alpha_psi,
            k,
            lambda_tau,
            inf_sup_alpha: inf_sup.v0,
            inf_sup_alpha_full: inf_sup.full,
            m_margin: s.m_margin,
            step_bound: s.step_bound,
            step_ok: s.step_ok,
        }
    }

    /// Gate used by the solver front end.
    pub fn admissible(&self) -> bool {
        self.m_margin > 0.0 || self.step_ok
    }

    /// Threshold λ_τ/α_ψ below which the step condition holds for any μ.
    pub fn k_threshold(&self) -> f64 {
        self.lambda_tau / self.alpha_psi
    }

    pub const CSV_HEADER: &'static str = "mu [Pa s],alpha_psi [-],k [s],lambda_tau [-],inf_sup_alpha [-],\
inf_sup_alpha_full [-],m_margin [Pa s],step_bound [s],step_ok [bool]";

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        for v in [
            self.mu,
            self.alpha_psi,
            self.k,
            self.lambda_tau,
            self.inf_sup_alpha,
            self.inf_sup_alpha_full,
            self.m_margin,
            self.step_bound,
        ] {
            let _ = write!(s, "{},", crate::io::fmt_f64(v));
        }
        s.push_str(if self.step_ok { "true" } else { "false" });
        s
    }
}

impl fmt::Display for ConstantsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use crate::io::fmt_f64 as g;
        writeln!(f, "lambda_tau = {}", g(self.lambda_tau))?;
        writeln!(f, "inf_sup_alpha = {}", g(self.inf_sup_alpha))?;
        writeln!(f, "inf_sup_alpha_full = {}", g(self.inf_sup_alpha_full))?;
        writeln!(f, "m_margin = {}", g(self.m_margin))?;
        writeln!(f, "step_bound = {}", g(self.step_bound))?;
        write!(f, "step_ok = {}", self.step_ok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallness_examples() {
        let s = smallness(0.7, 0.0, 2.0, 0.1);
        assert_eq!(s.m_margin, 1.4);
        assert_eq!(s.step_bound, f64::INFINITY);
        let s = smallness(1.0, 3.0, 1.0, 0.5);
        assert_eq!(s.m_margin, -1.0);
        assert_eq!(s.step_bound, 1.0);
        assert!(s.step_ok);
        assert!(!smallness(1.0, 3.0, 1.0, 1.0).step_ok);
        let s = smallness(0.5, 0.2, 0.25, 1.0);
        assert!((s.m_margin - 0.2).abs() < 1e-15);
    }

    #[test]
    fn householder_basis_is_orthonormal_complement() {
        let m = [0.3, 1.0, 0.5, 0.25];
        let z = zero_mean_basis(&m);
        for a in 0..3 {
            let ca = z.column(a);
            assert!(crate::linalg::dot(&ca, &m).abs() < 1e-15);
            for b in 0..3 {
                let d = crate::linalg::dot(&ca, &z.column(b));
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_pressure_is_rejected() {
        let k = SparseMatrix::identity(2);
        let b = SparseMatrix::from_dense(1, 2, &[1.0, 0.0]);
        let mq = SparseMatrix::identity(1);
        assert!(matches!(inf_sup_from_parts(&k, &b, &mq, &[1.0]), Err(SpectralError::TrivialPressureSpace(1))));
    }
}
