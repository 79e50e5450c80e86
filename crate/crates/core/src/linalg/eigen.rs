//! Extreme eigenpair of `B x = θ K x` with `K` SPD and `B` symmetric PSD.
//!
//! Block power iteration on `K⁻¹B` in the K inner product with a
//! Rayleigh–Ritz projection each sweep. The block converges at rate
//! θ_{p+1}/θ₁, so a handful of vectors is enough for trace-type operators
//! whose spectrum decays like 1/j.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::{symmetric_eigen, DenseMatrix};
use super::sparse::SparseMatrix;
use super::{axpy, dot, norm2, LinalgError, SpdSolver};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenTarget {
    /// largest θ of `B x = θ K x`
    Largest,
    /// smallest positive λ of `K x = λ B x`, i.e. 1/θ_max
    SmallestPositive,
}

const BLOCK: usize = 6;
const MAX_SWEEPS: usize = 2000;

/// Returns the requested eigenvalue and a K-normalized eigenvector.
pub fn gen_eig_extreme(
    kmat: &SparseMatrix,
    bmat: &SparseMatrix,
    which: EigenTarget,
    tol: f64,
) -> Result<(f64, Vec<f64>), LinalgError> {
    let n = kmat.rows();
    if bmat.rows() != n || bmat.cols() != n {
        return Err(LinalgError::DimensionMismatch { context: "gen_eig_extreme", expected: n, found: bmat.rows() });
    }
    if n == 0 || bmat.max_abs() == 0.0 {
        return Err(LinalgError::EmptyPositiveSpectrum);
    }
    let solver = SpdSolver::new(kmat, tol * 1e-3, 20 * n.max(10))?;
    let p = BLOCK.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e16e);
    let mut block: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();

    let mut theta_prev = f64::NAN;
    for _sweep in 0..MAX_SWEEPS {
        let mut next = Vec::with_capacity(block.len());
        for x in &block {
            next.push(solver.solve(&bmat.mul_vec(x))?);
        }
        let basis = k_orthonormalize(kmat, next);
        if basis.is_empty() {
            return Err(LinalgError::EmptyPositiveSpectrum);
        }
        // Rayleigh–Ritz on span(basis): basisᵀ K basis = I
        let q = basis.len();
        let bb: Vec<Vec<f64>> = basis.iter().map(|v| bmat.mul_vec(v)).collect();
        let mut h = DenseMatrix::zeros(q, q);
        for i in 0..q {
            for j in 0..q {
                h[(i, j)] = dot(&basis[i], &bb[j]);
            }
        }
        let (vals, vecs) = symmetric_eigen(&h);
        // descending order
        block = (0..q)
            .rev()
            .map(|c| {
                let mut v = vec![0.0; n];
                for (i, b) in basis.iter().enumerate() {
                    axpy(vecs[(i, c)], b, &mut v);
                }
                v
            })
            .collect();
        let theta = vals[q - 1];
        if theta <= 0.0 {
            return Err(LinalgError::EmptyPositiveSpectrum);
        }
        let x = &block[0];
        let kx = kmat.mul_vec(x);
        let mut r = bmat.mul_vec(x);
        axpy(-theta, &kx, &mut r);
        let rel = norm2(&r) / (theta * norm2(&kx));
        let settled = (theta - theta_prev).abs() <= tol * theta;
        theta_prev = theta;
        if rel <= tol && settled {
            let mut x = block.swap_remove(0);
            let kn = dot(&x, &kmat.mul_vec(&x)).sqrt();
            x.iter_mut().for_each(|v| *v /= kn);
            let value = match which {
                EigenTarget::Largest => theta,
                EigenTarget::SmallestPositive => 1.0 / theta,
            };
            return Ok((value, x));
        }
    }
    Err(LinalgError::NotConverged { iterations: MAX_SWEEPS, residual: f64::NAN })
}

/// Modified Gram–Schmidt in the K inner product, dropping directions that
/// collapse (vectors in the kernel of B vanish after one K⁻¹B sweep).
fn k_orthonormalize(kmat: &SparseMatrix, vecs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let max_norm = vecs.iter().map(|v| dot(v, &kmat.mul_vec(v)).sqrt()).fold(0.0f64, f64::max);
    if max_norm == 0.0 || !max_norm.is_finite() {
        return Vec::new();
    }
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for mut v in vecs {
        // two passes for stability
        for _ in 0..2 {
            for (q, kq) in &out {
                let c = dot(&v, kq);
                axpy(-c, q, &mut v);
            }
        }
        let kv = kmat.mul_vec(&v);
        let nv = dot(&v, &kv).max(0.0).sqrt();
        if nv <= 1e-10 * max_norm {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let kv: Vec<f64> = kv.iter().map(|x| x / nv).collect();
        out.push((v, kv));
    }
    out.into_iter().map(|(v, _)| v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_semidefinite_case() {
        let k = SparseMatrix::identity(3);
        let b = SparseMatrix::from_diagonal(&[0.0, 0.0, 4.0]);
        let (lam, x) = gen_eig_extreme(&k, &b, EigenTarget::SmallestPositive, 1e-12).unwrap();
        assert!((lam - 0.25).abs() < 1e-14);
        assert!((x[2].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_identity_pair() {
        let k = SparseMatrix::from_diagonal(&[1.0, 2.0]);
        let b = SparseMatrix::identity(2);
        let (lam, _) = gen_eig_extreme(&k, &b, EigenTarget::SmallestPositive, 1e-12).unwrap();
        assert!((lam - 1.0).abs() < 1e-12);
        let (theta, _) = gen_eig_extreme(&k, &b, EigenTarget::Largest, 1e-12).unwrap();
        assert!((theta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_right_operator_fails() {
        let k = SparseMatrix::identity(3);
        let b = SparseMatrix::zeros(3, 3);
        let err = gen_eig_extreme(&k, &b, EigenTarget::SmallestPositive, 1e-10).unwrap_err();
        assert_eq!(err.to_string(), "semidefinite operator has empty positive spectrum");
    }
}
