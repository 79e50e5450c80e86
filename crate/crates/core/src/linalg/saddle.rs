use super::dense::{DenseCholesky, DenseMatrix};
use super::sparse::SparseMatrix;
use super::{axpy, dot, norm2, sub, LinalgError, SpdSolver, DIRECT_LIMIT};

/// Schur-complement solver for
///
/// ```text
/// [ K  Bᵀ   0 ] [u]   [f]
/// [ B  0    m ] [p] = [g]
/// [ 0  mᵀ   0 ] [λ]   [0]
/// ```
///
/// The optional bordering row `m` pins the pressure component along the
/// kernel of `Bᵀ` (constants for enclosed flow) so that `mᵀp = 0`. For a
/// compatible right-hand side the multiplier λ vanishes.
#[derive(Clone, Debug)]
pub struct SaddleSolver {
    k: SparseMatrix,
    bt: SparseMatrix,
    b: SparseMatrix,
    k_solver: SpdSolver,
    mean: Option<Vec<f64>>,
    schur: SchurSolver,
    tol: f64,
}

#[derive(Clone, Debug)]
enum SchurSolver {
    Empty,
    Dense {
        /// columns of K⁻¹Bᵀ
        kinv_bt: Vec<Vec<f64>>,
        chol: DenseCholesky,
        /// (S + c mmᵀ)⁻¹ m, present when a mean row is given
        mean_response: Option<Vec<f64>>,
    },
    Iterative,
}

#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// bordering multiplier; nonzero only for an incompatible `g`
    pub multiplier: f64,
}

impl SaddleSolver {
    /// `bt` is n_u × n_p. `mean`, if given, has length n_p.
    pub fn new(k: &SparseMatrix, bt: &SparseMatrix, mean: Option<&[f64]>, tol: f64) -> Result<Self, LinalgError> {
        let n_u = k.rows();
        let n_p = bt.cols();
        if bt.rows() != n_u {
            return Err(LinalgError::DimensionMismatch {
                context: "saddle Bᵀ rows", expected: n_u, found: bt.rows()
            });
        }
        if let Some(m) = mean {
            if m.len() != n_p {
                return Err(LinalgError::DimensionMismatch {
                    context: "saddle mean row",
                    expected: n_p,
                    found: m.len(),
                });
            }
        }
        let k_solver = SpdSolver::new(k, tol * 1e-2, 20 * n_u.max(10))?;
        let b = bt.transpose();
        let schur = if n_p == 0 {
            SchurSolver::Empty
        } else if n_p <= DIRECT_LIMIT {
            let mut kinv_bt = Vec::with_capacity(n_p);
            let mut col = vec![0.0; n_u];
            for j in 0..n_p {
                col.iter_mut().for_each(|v| *v = 0.0);
                for (i, v) in b.row(j) {
                    col[i] = v;
                }
                kinv_bt.push(k_solver.solve(&col)?);
            }
            let mut s = DenseMatrix::zeros(n_p, n_p);
            for a in 0..n_p {
                for c in 0..n_p {
                    let mut acc = 0.0;
                    for (i, v) in b.row(a) {
                        acc += v * kinv_bt[c][i];
                    }
                    s[(a, c)] = acc;
                }
            }
            s.symmetrize();
            if let Some(m) = mean {
                let max_diag = (0..n_p).map(|i| s[(i, i)]).fold(0.0f64, f64::max);
                let max_m2 = m.iter().fold(0.0f64, |acc, v| acc.max(v * v));
                let c = if max_m2 > 0.0 { max_diag.max(1.0) / max_m2 } else { 0.0 };
                for a in 0..n_p {
                    for d in 0..n_p {
                        s[(a, d)] += c * m[a] * m[d];
                    }
                }
            }
            let chol = DenseCholesky::factor(&s)?;
            let mean_response = mean.map(|m| chol.solve(m));
            SchurSolver::Dense { kinv_bt, chol, mean_response }
        } else {
            SchurSolver::Iterative
        };
        Ok(Self { k: k.clone(), bt: bt.clone(), b, k_solver, mean: mean.map(<[f64]>::to_vec), schur, tol })
    }

    pub fn velocity_dim(&self) -> usize {
        self.k.rows()
    }

    pub fn pressure_dim(&self) -> usize {
        self.bt.cols()
    }

    /// Solves with the direct Schur path, then refines until the relative
    /// block residual is below `tol`.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<SaddleSolution, LinalgError> {
        if f.len() != self.velocity_dim() || g.len() != self.pressure_dim() {
            return Err(LinalgError::DimensionMismatch {
                context: "saddle right-hand side",
                expected: self.velocity_dim() + self.pressure_dim(),
                found: f.len() + g.len(),
            });
        }
        let scale = (dot(f, f) + dot(g, g)).sqrt();
        let mut sol = self.solve_once(f, g)?;
        if scale == 0.0 {
            return Ok(sol);
        }
        for _ in 0..4 {
            let (ru, rp) = self.residual(&sol, f, g);
            let res = (dot(&ru, &ru) + dot(&rp, &rp)).sqrt();
            if res <= self.tol * scale {
                return Ok(sol);
            }
            let corr = self.solve_once(&ru, &rp)?;
            axpy(1.0, &corr.u, &mut sol.u);
            axpy(1.0, &corr.p, &mut sol.p);
            sol.multiplier += corr.multiplier;
        }
        let (ru, rp) = self.residual(&sol, f, g);
        let res = (dot(&ru, &ru) + dot(&rp, &rp)).sqrt() / scale;
        if res <= self.tol {
            Ok(sol)
        } else {
            Err(LinalgError::NotConverged { iterations: 4, residual: res })
        }
    }

    /// Block residual `(f − Ku − Bᵀp, g − Bu − mλ)`.
    pub fn residual(&self, sol: &SaddleSolution, f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut ru = sub(f, &self.k.mul_vec(&sol.u));
        axpy(-1.0, &self.bt.mul_vec(&sol.p), &mut ru);
        let mut rp = sub(g, &self.b.mul_vec(&sol.u));
        if let Some(m) = &self.mean {
            axpy(-sol.multiplier, m, &mut rp);
        }
        (ru, rp)
    }

    fn solve_once(&self, f: &[f64], g: &[f64]) -> Result<SaddleSolution, LinalgError> {
        let u_star = self.k_solver.solve(f)?;
        let n_p = self.pressure_dim();
        match &self.schur {
            SchurSolver::Empty => Ok(SaddleSolution { u: u_star, p: Vec::new(), multiplier: 0.0 }),
            SchurSolver::Dense { kinv_bt, chol, mean_response } => {
                let r = sub(&self.b.mul_vec(&u_star), g);
                let mut p = chol.solve(&r);
                let mut multiplier = 0.0;
                if let (Some(m), Some(q2)) = (&self.mean, mean_response) {
                    multiplier = -dot(m, &p) / dot(m, q2);
                    axpy(multiplier, q2, &mut p);
                }
                let mut u = u_star;
                for (j, col) in kinv_bt.iter().enumerate() {
                    if p[j] != 0.0 {
                        axpy(-p[j], col, &mut u);
                    }
                }
                Ok(SaddleSolution { u, p, multiplier })
            }
            SchurSolver::Iterative => {
                // CG on the (possibly singular, consistent) Schur complement,
                // then shift along constants to meet the mean row.
                let r = sub(&self.b.mul_vec(&u_star), g);
                let apply = |q: &[f64]| -> Result<Vec<f64>, LinalgError> {
                    let w = self.k_solver.solve(&self.bt.mul_vec(q))?;
                    Ok(self.b.mul_vec(&w))
                };
                let p = schur_cg(apply, &r, self.tol * 1e-2, 10 * n_p)?;
                let mut p = p;
                if let Some(m) = &self.mean {
                    let shift = dot(m, &p) / m.iter().sum::<f64>();
                    p.iter_mut().for_each(|v| *v -= shift);
                }
                let w = self.k_solver.solve(&self.bt.mul_vec(&p))?;
                Ok(SaddleSolution { u: sub(&u_star, &w), p, multiplier: 0.0 })
            }
        }
    }
}

fn schur_cg<F>(apply: F, rhs: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, LinalgError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, LinalgError>,
{
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..=max_iter {
        if rr.sqrt() <= tol * bnorm {
            return Ok(x);
        }
        if it == max_iter {
            return Err(LinalgError::NotConverged { iterations: it, residual: rr.sqrt() / bnorm });
        }
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(LinalgError::RankDeficient { index: it, pivot: pap, mode: p });
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    unreachable!()
}

/// One-shot saddle solve returning `(u, p)`.
pub fn solve_saddle(
    k: &SparseMatrix,
    bt: &SparseMatrix,
    rhs_u: &[f64],
    rhs_p: &[f64],
    mean: Option<&[f64]>,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    let s = SaddleSolver::new(k, bt, mean, tol)?;
    let sol = s.solve(rhs_u, rhs_p)?;
    Ok((sol.u, sol.p))
}
