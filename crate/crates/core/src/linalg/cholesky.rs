//! Envelope (profile) Cholesky factorization.
//!
//! Row `i` of the factor is stored from its first structural nonzero
//! column up to the diagonal. For the lexicographically ordered meshes
//! used here the envelope is a band of width O(nx), so factor cost is
//! O(n·bw²) and each solve O(n·bw).

use super::sparse::SparseMatrix;
use super::LinalgError;

/// Number of entries the envelope factor of `a` would store.
pub fn envelope_size(a: &SparseMatrix) -> usize {
    a.row_first_col().iter().enumerate().map(|(i, &f)| i - f + 1).sum()
}

#[derive(Clone, Debug)]
pub struct ProfileCholesky {
    n: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl ProfileCholesky {
    /// Factors `a = L Lᵀ`. Only the lower triangle of `a` is read.
    pub fn factor(a: &SparseMatrix) -> Result<Self, LinalgError> {
        let n = a.rows();
        if n != a.cols() {
            return Err(LinalgError::DimensionMismatch { context: "cholesky", expected: n, found: a.cols() });
        }
        let first = a.row_first_col();
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut data = vec![0.0; total];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let li = &data[start[i] + k0 - fi..start[i] + j - fi];
                let lj = &data[start[j] + k0 - fj..start[j] + j - fj];
                let s: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
                let djj = data[start[j] + j - fj];
                let idx = start[i] + j - fi;
                data[idx] = (data[idx] - s) / djj;
            }
            let row = &data[start[i]..start[i] + i - fi];
            let s: f64 = row.iter().map(|x| x * x).sum();
            let idx = start[i] + i - fi;
            let d = data[idx] - s;
            if d <= 1e-14 * scale || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { index: i, pivot: d });
            }
            data[idx] = d.sqrt();
        }
        Ok(Self { n, first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn stored(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i] + i - fi];
            let s: f64 = row.iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] = (x[i] - s) / self.data[self.start[i] + i - fi];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let xi = x[i] / self.data[self.start[i] + i - fi];
            x[i] = xi;
            let row = &self.data[self.start[i]..self.start[i] + i - fi];
            for (xk, l) in x[fi..i].iter_mut().zip(row) {
                *xk -= l * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_factor_solves() {
        let n = 6;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 4.0;
            if i + 1 < n {
                d[i * n + i + 1] = -1.0;
                d[(i + 1) * n + i] = -1.0;
            }
        }
        let a = SparseMatrix::from_dense(n, n, &d);
        let f = ProfileCholesky::factor(&a).unwrap();
        assert_eq!(f.stored(), 2 * n - 1);
        let b: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let x = f.solve(&b);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = SparseMatrix::from_dense(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(ProfileCholesky::factor(&a), Err(LinalgError::NotPositiveDefinite { index: 1, .. })));
    }
}
