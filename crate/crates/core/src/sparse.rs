//! Compressed sparse row storage.
//!
//! Entries within a row are kept sorted by column and duplicates are summed
//! at construction, so two matrices built from the same triplets in any
//! order have identical internal layout.

use std::ops::{Add, AddAssign, Mul};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

/// Rows per rayon task; below `PAR_MIN_ROWS` the product runs serially.
const PAR_CHUNK: usize = 256;
const PAR_MIN_ROWS: usize = 4096;

/// Scalar types that can be stored in a [`CsrMatrix`].
pub trait Entry:
    Copy + Default + PartialEq + Send + Sync + Add<Output = Self> + AddAssign + Mul<Output = Self>
{
    fn abs(self) -> f64;
    fn conj(self) -> Self;
    fn from_f64(x: f64) -> Self;
}

impl Entry for f64 {
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn conj(self) -> Self {
        self
    }
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl Entry for Complex64 {
    fn abs(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Entry> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::from_f64(1.0); n])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        indptr.push(0);
        for (i, &d) in diag.iter().enumerate() {
            if d != T::default() {
                indices.push(i);
                values.push(d);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: n,
            ncols: n,
            indptr,
            indices,
            values,
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates
    /// and dropping entries that sum to exactly zero.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(
                r < nrows && c < ncols,
                "triplet ({r}, {c}) outside {nrows}x{ncols}"
            );
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        };
        m.prune(0.0);
        m
    }

    /// Builds a matrix row by row. `row_fn(i)` must return entries with
    /// distinct columns; they are sorted here.
    pub fn from_rows<F>(nrows: usize, ncols: usize, row_fn: F) -> Self
    where
        F: Fn(usize) -> Vec<(usize, T)> + Sync,
    {
        let rows: Vec<Vec<(usize, T)>> = (0..nrows)
            .into_par_iter()
            .map(|i| {
                let mut row = row_fn(i);
                row.sort_by_key(|e| e.0);
                row.dedup_by(|b, a| {
                    if a.0 == b.0 {
                        a.1 += b.1;
                        true
                    } else {
                        false
                    }
                });
                row.retain(|e| e.1 != T::default());
                row
            })
            .collect();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (c, v) in row {
                assert!(c < ncols);
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Removes stored entries with magnitude `<= tol`.
    pub fn prune(&mut self, tol: f64) {
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut w = 0;
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let v = self.values[k];
                if v.abs() > tol {
                    self.indices[w] = self.indices[k];
                    self.values[w] = v;
                    w += 1;
                }
            }
            indptr.push(w);
        }
        self.indices.truncate(w);
        self.values.truncate(w);
        self.indptr = indptr;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::default(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn map<U: Entry>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        let mut out = CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        };
        out.prune(0.0);
        out
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for (i, j, v) in self.triplets() {
            t.push((j, i, v));
        }
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn adjoint(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for (i, j, v) in self.triplets() {
            t.push((j, i, v.conj()));
        }
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, T::from_f64(1.0))
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &Self, s: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<(usize, usize, T)> = self.triplets().collect();
        t.extend(other.triplets().map(|(i, j, v)| (i, j, v * s)));
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        Self::from_rows(self.nrows, other.ncols, |i| {
            let mut acc: Vec<(usize, T)> = Vec::new();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    acc.push((j, a * b));
                }
            }
            acc
        })
    }

    /// Kronecker product with `self` as the slow (outer) index.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = (other.nrows, other.ncols);
        Self::from_rows(self.nrows * p, self.ncols * q, |row| {
            let (i, k) = (row / p, row % p);
            let mut out = Vec::new();
            for (j, a) in self.row(i) {
                for (l, b) in other.row(k) {
                    out.push((j * q + l, a * b));
                }
            }
            out
        })
    }

    /// Largest `|self - other|` over all entries.
    pub fn max_abs_diff(&self, other: &Self) -> f64
    where
        T: std::ops::Neg<Output = T>,
    {
        self.add_scaled(other, -T::from_f64(1.0)).max_abs()
    }

    /// Largest `|M - M^dagger|`.
    pub fn hermiticity_defect(&self) -> f64
    where
        T: std::ops::Neg<Output = T>,
    {
        self.max_abs_diff(&self.adjoint())
    }

    /// `y = self * x`, parallel over rows for large matrices.
    pub fn matvec_into<X>(&self, x: &[X], y: &mut [X])
    where
        X: Copy + Default + AddAssign + Send + Sync,
        T: Mul<X, Output = X>,
    {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let row_dot = |i: usize| {
            let mut acc = X::default();
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            acc
        };
        if self.nrows >= PAR_MIN_ROWS {
            y.par_chunks_mut(PAR_CHUNK)
                .enumerate()
                .for_each(|(c, chunk)| {
                    let base = c * PAR_CHUNK;
                    for (o, yi) in chunk.iter_mut().enumerate() {
                        *yi = row_dot(base + o);
                    }
                });
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row_dot(i);
            }
        }
    }

    pub fn matvec<X>(&self, x: &[X]) -> Vec<X>
    where
        X: Copy + Default + AddAssign + Send + Sync,
        T: Mul<X, Output = X>,
    {
        let mut y = vec![X::default(); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<T>
    where
        T: nalgebra::Scalar,
    {
        let mut d = DMatrix::from_element(self.nrows, self.ncols, T::default());
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    pub fn from_dense(d: &DMatrix<T>, tol: f64) -> Self
    where
        T: nalgebra::Scalar,
    {
        Self::from_rows(d.nrows(), d.ncols(), |i| {
            (0..d.ncols())
                .filter_map(|j| {
                    let v = d[(i, j)];
                    (v.abs() > tol).then_some((j, v))
                })
                .collect()
        })
    }
}

impl CsrMatrix<Complex64> {
    /// Largest imaginary part among stored entries.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn real_part(&self) -> CsrMatrix<f64> {
        self.map(|v| v.re)
    }
}

impl CsrMatrix<f64> {
    pub fn to_complex(&self) -> CsrMatrix<Complex64> {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn triplets_are_summed_and_sorted() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![(1, 1, 2.0), (0, 1, 1.0), (1, 1, 3.0), (0, 0, 0.0)],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 1), 5.0);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn build_order_does_not_change_layout() {
        let a =
            CsrMatrix::from_triplets(3, 3, vec![(0, 2, c(1.0)), (2, 0, c(4.0)), (1, 1, c(2.0))]);
        let b =
            CsrMatrix::from_triplets(3, 3, vec![(1, 1, c(2.0)), (2, 0, c(4.0)), (0, 2, c(1.0))]);
        assert_eq!(a, b);
    }

    #[test]
    fn kron_matches_dense_definition() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 2.0)]);
        let b = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 3.0), (1, 1, 5.0)]);
        let k = a.kron(&b);
        assert_eq!(k.get(0, 2), 3.0);
        assert_eq!(k.get(1, 3), 5.0);
        assert_eq!(k.get(2, 0), 6.0);
        assert_eq!(k.get(3, 1), 10.0);
        assert_eq!(k.nnz(), 4);
    }

    #[test]
    fn matmul_and_matvec_agree() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]);
        let b = a.transpose();
        let ab = a.matmul(&b);
        let x = [1.0, -1.0];
        let via_product = ab.matvec(&x);
        let stepwise = a.matvec(&b.matvec(&x));
        assert_eq!(via_product, stepwise);
    }

    #[test]
    fn parallel_matvec_matches_serial() {
        let n = PAR_MIN_ROWS + 17;
        let m = CsrMatrix::from_rows(n, n, |i| vec![(i, 1.0 + i as f64), ((i * 7 + 3) % n, 0.5)]);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let y = m.matvec(&x);
        for i in [0, 1, n / 2, n - 1] {
            let expect: f64 = m.row(i).map(|(j, v)| v * x[j]).sum();
            assert!((y[i] - expect).abs() < 1e-12);
        }
    }
}
