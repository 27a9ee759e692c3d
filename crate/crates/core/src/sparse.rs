//! Compressed-sparse-row complex matrices.
//!
//! Entries within a row are kept sorted by column and explicit zeros are
//! dropped, so two matrices built from the same data compare equal and
//! serialize identically.

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![ONE; n],
        }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_triplets(n, n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect())
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed in input order; exact zeros are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut iter = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != ZERO {
                indptr[r + 1] += 1;
                indices.push(c);
                data.push(v);
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(self.data[span].iter().copied())
    }

    /// Iterates over stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        self.iter().collect()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.data[span.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        if c == ZERO {
            return Self::zeros(self.nrows, self.ncols);
        }
        out.data.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn map_values(&self, f: impl Fn(usize, usize, C64) -> C64) -> Self {
        let trip = self.iter().map(|(i, j, v)| (i, j, f(i, j, v))).collect();
        Self::from_triplets(self.nrows, self.ncols, trip)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "shape mismatch in add");
        let mut trip = self.triplets();
        trip.extend(other.iter());
        Self::from_triplets(self.nrows, self.ncols, trip)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn transpose(&self) -> Self {
        let trip = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, trip)
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let trip = self.iter().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, trip)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "shape mismatch in matmul");
        let mut acc = vec![ZERO; other.ncols];
        let mut seen = vec![false; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut trip = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !seen[j] {
                        seen[j] = true;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                trip.push((i, j, acc[j]));
                acc[j] = ZERO;
                seen[j] = false;
            }
            cols.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, trip)
    }

    /// Kronecker product `self ⊗ other`; `self` indexes the slow (outer) block.
    pub fn kron(&self, other: &Self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (i1, j1, a) in self.iter() {
            for (i2, j2, b) in other.iter() {
                trip.push((i1 * other.nrows + i2, j1 * other.ncols + j2, a * b));
            }
        }
        Self::from_triplets(self.nrows * other.nrows, self.ncols * other.ncols, trip)
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = ZERO;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut out = vec![ZERO; self.nrows * self.ncols];
        for (i, j, v) in self.iter() {
            out[i * self.ncols + j] = v;
        }
        out
    }

    /// Principal submatrix on `rows` (global indices, sorted). `local` maps a
    /// global index to its position in `rows`, or `usize::MAX` if absent.
    pub fn principal_submatrix(&self, rows: &[usize], local: &[usize]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for &g in rows {
            for (j, v) in self.row(g) {
                let lj = local[j];
                if lj != usize::MAX {
                    indices.push(lj);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        let n = rows.len();
        // Local order follows the global order because `rows` is sorted.
        Self {
            nrows: n,
            ncols: n,
            indptr,
            indices,
            data,
        }
    }

    /// Converts to faer's compressed-sparse-column layout.
    pub(crate) fn to_faer_csc(&self) -> faer::sparse::SparseColMat<usize, C64> {
        let trip: Vec<_> = self
            .iter()
            .map(|(i, j, v)| faer::sparse::Triplet::new(i, j, v))
            .collect();
        faer::sparse::SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .expect("valid triplets")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn triplets_merge_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(1, 1, c(1.0)), (0, 1, c(2.0)), (1, 1, c(-1.0)), (0, 1, c(1.0))]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0));
        assert_eq!(m.get(1, 1), ZERO);
    }

    #[test]
    fn kron_matches_dense() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0)), (1, 0, c(2.0))]);
        let b = CsrMatrix::from_triplets(2, 2, vec![(0, 0, c(3.0)), (1, 1, C64::new(0.0, 1.0))]);
        let k = a.kron(&b);
        assert_eq!(k.get(0, 2), c(3.0));
        assert_eq!(k.get(1, 3), C64::new(0.0, 1.0));
        assert_eq!(k.get(2, 0), c(6.0));
        assert_eq!(k.nnz(), 4);
    }

    #[test]
    fn matmul_and_adjoint() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 1, C64::new(1.0, 2.0))]);
        let p = a.adjoint().matmul(&a);
        assert_eq!(p.get(1, 1), c(5.0));
        assert_eq!(p.nnz(), 1);
        assert_eq!(a.adjoint().adjoint(), a);
    }
}
