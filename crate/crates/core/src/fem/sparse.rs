//! Compressed sparse row storage for the symmetric FE matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric sparse matrix in CSR format. Both triangles are stored so that
/// matrix-vector products need no branching; `symmetric` records the promise
/// that pattern and values mirror each other.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed.
    /// Accumulation order is fixed by the (row, col) sort, so assembly is
    /// reproducible regardless of input order.
    pub fn from_triplets(
        n: usize,
        triplets: &[(usize, usize, f64)],
        symmetric: bool,
    ) -> SparseMatrix {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1, k));

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k];
            debug_assert!(r < n && c < n);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
            symmetric,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric_flagged(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .iter()
            .zip(self.values[lo..hi].iter())
            .map(|(&c, &v)| (c, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or(0.0)
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut s = 0.0;
            for k in lo..hi {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// x^T A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut row = 0.0;
            for k in lo..hi {
                row += self.values[k] * y[self.col_idx[k]];
            }
            s += x[i] * row;
        }
        s
    }

    /// Largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum relative pattern/value asymmetry, for diagnostics and tests.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.inf_norm().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Extract the principal submatrix on `keep` (ascending indices).
    pub fn restrict(&self, keep: &[usize]) -> SparseMatrix {
        let mut full_to_sub = vec![usize::MAX; self.n];
        for (s, &f) in keep.iter().enumerate() {
            full_to_sub[f] = s;
        }
        let mut triplets = Vec::new();
        for (s, &f) in keep.iter().enumerate() {
            for (c, v) in self.row(f) {
                let cs = full_to_sub[c];
                if cs != usize::MAX {
                    triplets.push((s, cs, v));
                }
            }
        }
        SparseMatrix::from_triplets(keep.len(), &triplets, self.symmetric)
    }

    /// Dense copy (small systems only).
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.n > 2000 {
            return Err(Error::Capacity(format!(
                "refusing dense copy of a {0}x{0} sparse matrix",
                self.n
            )));
        }
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_accumulate() {
        let a = SparseMatrix::from_triplets(
            3,
            &[(0, 0, 1.0), (0, 0, 2.0), (1, 2, 4.0), (2, 1, 4.0), (2, 2, 5.0)],
            true,
        );
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 2), 4.0);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn matvec_matches_dense() {
        let a = SparseMatrix::from_triplets(
            3,
            &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (2, 2, 1.5)],
            true,
        );
        let x = vec![1.0, 2.0, 3.0];
        let y = a.apply(&x);
        assert_eq!(y, vec![0.0, 3.0, 4.5]);
        assert_eq!(a.bilinear(&x, &x), 1.0 * 0.0 + 2.0 * 3.0 + 3.0 * 4.5);
    }

    #[test]
    fn restriction() {
        let a = SparseMatrix::from_triplets(
            4,
            &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (3, 3, 4.0), (1, 3, 9.0), (3, 1, 9.0)],
            true,
        );
        let s = a.restrict(&[1, 3]);
        assert_eq!(s.n(), 2);
        assert_eq!(s.get(0, 0), 2.0);
        assert_eq!(s.get(1, 1), 4.0);
        assert_eq!(s.get(0, 1), 9.0);
    }
}
