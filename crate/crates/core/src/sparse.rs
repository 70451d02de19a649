//! Compressed sparse row storage and a thin wrapper around faer's sparse LU.

use std::fmt::Write as _;
use std::path::Path;

use faer::sparse::{SparseColMat, Triplet};
use faer::linalg::solvers::Solve;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Accumulates (row, col, value) contributions; duplicates are summed in
/// insertion order.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CsrMatrix {
        // stable: equal (row, col) keep insertion order, so the summation
        // order is reproducible
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `selfᵀ x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = TripletBuilder::new(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(j, i, v);
            }
        }
        t.build()
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols && (0..self.nrows).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sub-matrix with the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = TripletBuilder::new(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                if col_map[j] != usize::MAX {
                    t.push(ri, col_map[j], v);
                }
            }
        }
        t.build()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                trip.push(Triplet::new(i, j, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| Error::InvalidArgument(format!("sparse conversion failed: {e:?}")))
    }

    /// Coordinate triplet text, `row col value`, 17 significant digits.
    pub fn write_triplets(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "# {} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let _ = writeln!(s, "{i} {j} {v:.16e}");
            }
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// Block matrix assembled from CSR blocks laid out on a grid; `None` blocks
/// are zero.
pub fn block_matrix(blocks: &[Vec<Option<&CsrMatrix>>], row_sizes: &[usize], col_sizes: &[usize]) -> CsrMatrix {
    let nrows: usize = row_sizes.iter().sum();
    let ncols: usize = col_sizes.iter().sum();
    let mut t = TripletBuilder::new(nrows, ncols);
    let mut r0 = 0;
    for (bi, row) in blocks.iter().enumerate() {
        let mut c0 = 0;
        for (bj, blk) in row.iter().enumerate() {
            if let Some(m) = blk {
                assert_eq!((m.nrows, m.ncols), (row_sizes[bi], col_sizes[bj]));
                for i in 0..m.nrows {
                    for (j, v) in m.row(i) {
                        t.push(r0 + i, c0 + j, v);
                    }
                }
            }
            c0 += col_sizes[bj];
        }
        r0 += row_sizes[bi];
    }
    t.build()
}

/// Sparse LU factorization of a square matrix.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    /// Factorizes `a` and checks the factorization on a probe right-hand
    /// side; a numerically singular matrix is reported as rank deficient.
    pub fn new(a: &CsrMatrix, what: &str) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::InvalidArgument(format!("{what}: matrix is not square")));
        }
        let n = a.nrows;
        let mat = a.to_faer()?;
        // faer panics on an exactly zero pivot instead of returning an error
        let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| mat.sp_lu()))
            .map_err(|_| Error::RankDeficient(format!("{what}: zero pivot")))?
            .map_err(|e| Error::RankDeficient(format!("{what}: {e:?}")))?;
        let out = Self { n, lu };
        if n > 0 {
            let probe: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
            let x = out.solve(&probe);
            let r = a.mul_vec(&x);
            let res = r.iter().zip(&probe).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let bn = probe.iter().map(|v| v * v).sum::<f64>().sqrt();
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            // a rounding-sized pivot shows up as an enormous solution
            if !res.is_finite() || !xn.is_finite() || res > 1e-6 * (bn + a.max_abs() * xn) || a.max_abs() * xn > 1e13 * bn
            {
                return Err(Error::RankDeficient(format!("{what}: factorization residual {res:e}")));
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = faer::Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.lu.solve(rhs);
        (0..self.n).map(|i| x[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(1, 0, 2.0);
        t.push(0, 0, 3.0);
        let m = t.build();
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![4.0, 2.0]);
        assert_eq!(m.tr_mul_vec(&[1.0, 1.0]), vec![6.0, 0.0]);
    }

    #[test]
    fn lu_solves_indefinite_saddle() {
        // [[2, 1], [1, 0]] is indefinite
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 0, 2.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        let m = t.build();
        let lu = SparseLu::new(&m, "test").unwrap();
        let x = lu.solve(&[1.0, 2.0]);
        assert!((x[0] - 2.0).abs() < 1e-14 && (x[1] + 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_reported() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        t.push(1, 1, 1.0);
        assert!(matches!(SparseLu::new(&t.build(), "test"), Err(Error::RankDeficient(_))));
    }
}
