//! Deterministic sparse/dense linear algebra.
//!
//! Every reduction is a plain sequential loop, so results are bit-identical
//! across runs on the same platform. SPD systems whose envelope fits in
//! [`PROFILE_BUDGET`] entries (or that have at most [`DIRECT_LIMIT`]
//! unknowns) are factored directly; larger ones use Jacobi-preconditioned CG.

mod cholesky;
pub mod dense;
mod eigen;
mod saddle;
mod sparse;

pub use cholesky::ProfileCholesky;
pub use dense::{DenseCholesky, DenseMatrix};
pub use eigen::{gen_eig_extreme, EigenTarget};
pub use saddle::{solve_saddle, SaddleSolver};
pub use sparse::{SparseMatrix, TripletBuilder};

use thiserror::Error;

/// Below this many unknowns the direct factorization path is always used,
/// and dense Schur complements are formed.
pub const DIRECT_LIMIT: usize = 2000;

/// Largest envelope (stored factor entries) accepted for a direct solve.
pub const PROFILE_BUDGET: usize = 8_000_000;

/// Whether [`SpdSolver::new`] will factor `k` directly.
pub fn prefers_direct(k: &SparseMatrix) -> bool {
    k.rows() <= DIRECT_LIMIT || cholesky::envelope_size(k) <= PROFILE_BUDGET
}

#[derive(Debug, Clone, Error)]
pub enum LinalgError {
    #[error("{context}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },
    #[error("matrix is not positive definite (pivot {pivot:e} at row {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("rank deficiency at pivot {index} (value {pivot:e}); null mode has {} entries", mode.len())]
    RankDeficient { index: usize, pivot: f64, mode: Vec<f64> },
    #[error("iterative solve did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("semidefinite operator has empty positive spectrum")]
    EmptyPositiveSpectrum,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `y += a x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Reusable SPD solver: a profile Cholesky factor for small systems,
/// Jacobi-PCG otherwise.
#[derive(Clone, Debug)]
pub enum SpdSolver {
    Direct(ProfileCholesky),
    Iterative { matrix: SparseMatrix, inv_diag: Vec<f64>, tol: f64, max_iter: usize },
}

impl SpdSolver {
    pub fn new(k: &SparseMatrix, tol: f64, max_iter: usize) -> Result<Self, LinalgError> {
        if prefers_direct(k) {
            Ok(Self::Direct(ProfileCholesky::factor(k)?))
        } else {
            Self::iterative(k, tol, max_iter)
        }
    }

    pub fn iterative(k: &SparseMatrix, tol: f64, max_iter: usize) -> Result<Self, LinalgError> {
        let diag = k.diagonal();
        if let Some((index, &pivot)) = diag.iter().enumerate().find(|(_, d)| **d <= 0.0) {
            return Err(LinalgError::NotPositiveDefinite { index, pivot });
        }
        Ok(Self::Iterative { matrix: k.clone(), inv_diag: diag.iter().map(|d| 1.0 / d).collect(), tol, max_iter })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Direct(f) => f.dim(),
            Self::Iterative { matrix, .. } => matrix.rows(),
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        match self {
            Self::Direct(f) => Ok(f.solve(rhs)),
            Self::Iterative { matrix, inv_diag, tol, max_iter } => {
                pcg(matrix, inv_diag, rhs, None, *tol, *max_iter).map(|(x, _)| x)
            }
        }
    }
}

/// Jacobi-preconditioned conjugate gradients. Returns the solution and the
/// iteration count; stops when ‖r‖₂ ≤ tol·‖rhs‖₂.
pub fn pcg(
    k: &SparseMatrix,
    inv_diag: &[f64],
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), LinalgError> {
    let n = rhs.len();
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = sub(rhs, &k.mul_vec(&x));
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..=max_iter {
        let rnorm = norm2(&r);
        if !rnorm.is_finite() {
            return Err(LinalgError::NonFinite("conjugate gradients"));
        }
        if rnorm <= tol * bnorm {
            return Ok((x, it));
        }
        if it == max_iter {
            return Err(LinalgError::NotConverged { iterations: it, residual: rnorm / bnorm });
        }
        k.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite { index: it, pivot: pap });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    unreachable!()
}

/// Solves `K x = rhs` for SPD `K` to relative residual `tol`.
pub fn solve_spd(k: &SparseMatrix, rhs: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, LinalgError> {
    if rhs.len() != k.rows() {
        return Err(LinalgError::DimensionMismatch { context: "solve_spd", expected: k.rows(), found: rhs.len() });
    }
    if !all_finite(rhs) {
        return Err(LinalgError::NonFinite("solve_spd right-hand side"));
    }
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        return Ok(vec![0.0; rhs.len()]);
    }
    let inv_diag: Vec<f64> = k.diagonal().iter().map(|d| 1.0 / d).collect();
    if prefers_direct(k) {
        let f = ProfileCholesky::factor(k)?;
        let mut x = f.solve(rhs);
        // a couple of refinement sweeps recover accuracy on ill-conditioned input
        for _ in 0..3 {
            let r = sub(rhs, &k.mul_vec(&x));
            if norm2(&r) <= tol * bnorm {
                return Ok(x);
            }
            let dx = f.solve(&r);
            axpy(1.0, &dx, &mut x);
        }
        return pcg(k, &inv_diag, rhs, Some(&x), tol, max_iter).map(|(x, _)| x);
    }
    pcg(k, &inv_diag, rhs, None, tol, max_iter).map(|(x, _)| x)
}

/// Discrete dual norm √(gᵀ K⁻¹ g) for a Gram matrix `K`.
pub fn dual_norm(k: &SparseMatrix, g: &[f64], tol: f64) -> Result<f64, LinalgError> {
    let x = solve_spd(k, g, tol, 10 * k.rows().max(10))?;
    Ok(dot(g, &x).max(0.0).sqrt())
}

/// Dual-norm evaluator that keeps its factorization between calls.
#[derive(Clone, Debug)]
pub struct DualNorm {
    solver: SpdSolver,
}

impl DualNorm {
    pub fn new(k: &SparseMatrix, tol: f64) -> Result<Self, LinalgError> {
        Ok(Self { solver: SpdSolver::new(k, tol, 10 * k.rows().max(10))? })
    }

    pub fn eval(&self, g: &[f64]) -> Result<f64, LinalgError> {
        if g.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        let x = self.solver.solve(g)?;
        Ok(dot(g, &x).max(0.0).sqrt())
    }

    pub fn eval_sq(&self, g: &[f64]) -> Result<f64, LinalgError> {
        self.eval(g).map(|v| v * v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let k = SparseMatrix::identity(3);
        let x = solve_spd(&k, &[1.0, 2.0, 3.0], 1e-12, 10).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn diagonal_solve() {
        let k = SparseMatrix::from_diagonal(&[2.0, 4.0]);
        let x = solve_spd(&k, &[2.0, 8.0], 1e-12, 10).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn cg_reports_non_convergence() {
        let n = 50;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 2.0 + i as f64);
            if i + 1 < n {
                b.push(i, i + 1, -1.0);
                b.push(i + 1, i, -1.0);
            }
        }
        let k = b.build_symmetric();
        let inv: Vec<f64> = k.diagonal().iter().map(|d| 1.0 / d).collect();
        let rhs = vec![1.0; n];
        match pcg(&k, &inv, &rhs, None, 1e-14, 2) {
            Err(LinalgError::NotConverged { iterations: 2, residual }) => assert!(residual > 1e-14),
            other => panic!("unexpected {other:?}"),
        }
        let (x, _) = pcg(&k, &inv, &rhs, None, 1e-12, 200).unwrap();
        let r = sub(&rhs, &k.mul_vec(&x));
        assert!(norm2(&r) <= 1e-12 * norm2(&rhs));
    }

    #[test]
    fn dual_norm_trivial_cases() {
        let k = SparseMatrix::identity(4);
        assert_eq!(dual_norm(&k, &[0.0; 4], 1e-12).unwrap(), 0.0);
        let g = [1.0, -2.0, 2.0, 0.0];
        assert!((dual_norm(&k, &g, 1e-12).unwrap() - 3.0).abs() < 1e-14);
    }
}
