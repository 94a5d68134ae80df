//! Row-packed lower-triangular Cholesky factor that grows one row at a time.

use nalgebra::DMatrix;

/// Lower-triangular `L` stored row by row: row `i` holds `L[i, 0..=i]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct PackedLower {
    n: usize,
    data: Vec<f64>,
}

impl PackedLower {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }

    /// Appends row `[off_diag..., diag]`; `off_diag` must have length equal to the current dimension.
    pub fn push_row(&mut self, off_diag: &[f64], diag: f64) {
        debug_assert_eq!(off_diag.len(), self.n);
        self.data.extend_from_slice(off_diag);
        self.data.push(diag);
        self.n += 1;
    }

    pub fn from_dense(l: &DMatrix<f64>) -> Self {
        let n = l.nrows();
        let mut out = PackedLower {
            n: 0,
            data: Vec::with_capacity(n * (n + 1) / 2),
        };
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            row.clear();
            row.extend((0..i).map(|j| l[(i, j)]));
            out.push_row(&row, l[(i, i)]);
        }
        out
    }

    #[cfg(test)]
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i).iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    /// Solves `L v = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let s: f64 = row[..i].iter().zip(&b[..i]).map(|(l, v)| l * v).sum();
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// Solves `L^T x = v` in place.
    pub fn backward_solve_transposed(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        for j in (0..self.n).rev() {
            let row = self.row(j);
            v[j] /= row[j];
            let xj = v[j];
            for (vi, l) in v[..j].iter_mut().zip(&row[..j]) {
                *vi -= l * xj;
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_match_dense() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]);
        let chol = a.clone().cholesky().unwrap();
        let packed = PackedLower::from_dense(&chol.l());
        assert_eq!(packed.to_dense(), chol.l());
        let b = [1.0, -2.0, 0.5];
        let mut v = b;
        packed.forward_solve(&mut v);
        packed.backward_solve_transposed(&mut v);
        let x = a.lu().solve(&nalgebra::DVector::from_row_slice(&b)).unwrap();
        for i in 0..3 {
            assert!((v[i] - x[i]).abs() < 1e-12);
        }
    }
}
