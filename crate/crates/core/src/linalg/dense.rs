//! Small dense kernels: Cholesky, cyclic Jacobi eigensolver, and the
//! symmetric-definite generalized eigenproblem built from the two.

use super::LinalgError;

/// Row-major square or rectangular dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    /// Builds from column vectors of equal length.
    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let n = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), n);
            for i in 0..n {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Replaces the matrix by (A + Aᵀ)/2.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense lower Cholesky factor.
#[derive(Clone, Debug)]
pub struct DenseCholesky {
    l: DenseMatrix,
}

impl DenseCholesky {
    /// Factors an SPD matrix. On a non-positive pivot the error carries the
    /// null vector of the leading block ending at that pivot.
    pub fn factor(a: &DenseMatrix) -> Result<Self, LinalgError> {
        let n = a.rows;
        assert_eq!(n, a.cols);
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 1e-12 * scale || !d.is_finite() {
                return Err(LinalgError::RankDeficient { index: j, pivot: d, mode: leading_null_vector(&l, a, j) });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = self.solve_lower(b);
        self.solve_upper_in_place(&mut y);
        y
    }

    /// `L⁻¹ b`
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// `L⁻ᵀ b` in place
    pub fn solve_upper_in_place(&self, y: &mut [f64]) {
        let n = self.l.rows;
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.l
    }
}

/// For a Cholesky breakdown at pivot `j`, the vector `[−A₁₁⁻¹ a; 1; 0…]`
/// spans the kernel of the leading (j+1)-block when its Schur pivot is 0.
fn leading_null_vector(l: &DenseMatrix, a: &DenseMatrix, j: usize) -> Vec<f64> {
    let n = a.rows;
    let mut y: Vec<f64> = (0..j).map(|i| a[(i, j)]).collect();
    for i in 0..j {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..j).rev() {
        let mut s = y[i];
        for k in i + 1..j {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut v = vec![0.0; n];
    for i in 0..j {
        v[i] = -y[i];
    }
    v[j] = 1.0;
    let norm = super::norm2(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues ascending with eigenvectors as matching columns.
pub fn symmetric_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.rows;
    assert_eq!(n, a.cols);
    let mut m = a.clone();
    m.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let total: f64 = m.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * total || total == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let vals = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vecs = DenseMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, new)] = v[(k, old)];
        }
    }
    (vals, vecs)
}

/// Solves `A x = λ B x` with `A` symmetric and `B` SPD. Eigenvalues ascending;
/// eigenvectors are B-orthonormal columns.
pub fn generalized_symmetric_eigen(a: &DenseMatrix, b: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix), LinalgError> {
    let n = a.rows;
    let chol = DenseCholesky::factor(b)?;
    // C = L⁻¹ A L⁻ᵀ
    let mut tmp = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = chol.solve_lower(&a.column(j));
        for i in 0..n {
            tmp[(i, j)] = col[i];
        }
    }
    let tmp_t = tmp.transpose();
    let mut c = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = chol.solve_lower(&tmp_t.column(j));
        for i in 0..n {
            c[(i, j)] = col[i];
        }
    }
    let (vals, y) = symmetric_eigen(&c);
    let mut x = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut col = y.column(j);
        chol.solve_upper_in_place(&mut col);
        for i in 0..n {
            x[(i, j)] = col[i];
        }
    }
    Ok((vals, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_two_by_two() {
        let a = DenseMatrix::from_row_major(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = symmetric_eigen(&a);
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        let v = vecs.column(1);
        assert!((v[0].abs() - v[1].abs()).abs() < 1e-14);
    }

    #[test]
    fn generalized_diagonal_case() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 6.0]);
        let b = DenseMatrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 2.0]);
        let (vals, _) = generalized_symmetric_eigen(&a, &b).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rank_deficiency_reports_null_mode() {
        let a = DenseMatrix::from_row_major(3, 3, vec![1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        match DenseCholesky::factor(&a) {
            Err(LinalgError::RankDeficient { index, mode, .. }) => {
                assert_eq!(index, 1);
                let r = a.mul_vec(&mode);
                assert!(super::super::norm2(&r) < 1e-14);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }
}
