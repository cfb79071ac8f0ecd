//! Compressed sparse row storage.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-compressed sparse matrix with sorted, duplicate-free column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Assembles from `(row, col, value)` triplets. Duplicates are summed in
    /// input order; entries that sum to exactly zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        // stable: equal (row, col) keep insertion order, so sums are reproducible
        order.sort_by_key(|&i| (triplets[i].0, triplets[i].1));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut i = 0;
        while i < order.len() {
            let (r, c, _) = triplets[order[i]];
            let mut v = T::zero();
            while i < order.len() && triplets[order[i]].0 == r && triplets[order[i]].1 == c {
                v += triplets[order[i]].2;
                i += 1;
            }
            if v != T::zero() {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let trip: Vec<_> = diag.iter().enumerate().map(|(i, &d)| (i, i, d)).collect();
        Self::from_triplets(diag.len(), diag.len(), &trip).expect("diagonal in range")
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

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(T::zero(), |j| vals[j])
    }

    /// Iterator over stored `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    /// `y = M x`
    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *yr = cols
                .iter()
                .zip(vals)
                .fold(T::zero(), |acc, (&c, &v)| acc + v * x[c]);
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = M^T x`
    pub fn mul_transpose_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::zero(); self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let trip: Vec<_> = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &trip).expect("transpose in range")
    }

    /// Entrywise `a * self + b * other`, computed per entry as one expression.
    pub fn lincomb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.check_shape(other)?;
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            let (ca, va) = self.row(r);
            let (cb, vb) = other.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ca.len() || j < cb.len() {
                let next_a = ca.get(i).copied().unwrap_or(usize::MAX);
                let next_b = cb.get(j).copied().unwrap_or(usize::MAX);
                if next_a == next_b {
                    trip.push((r, next_a, a * va[i] + b * vb[j]));
                    i += 1;
                    j += 1;
                } else if next_a < next_b {
                    trip.push((r, next_a, a * va[i]));
                    i += 1;
                } else {
                    trip.push((r, next_b, b * vb[j]));
                    j += 1;
                }
            }
        }
        Self::from_triplets(self.nrows, self.ncols, &trip)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lincomb(T::one(), other, T::one())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lincomb(T::one(), other, -T::one())
    }

    pub fn scale(&self, a: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = *v * a);
        out.drop_zeros()
    }

    /// `M'_{ij} = f(i, j, M_{ij})` on the stored pattern.
    pub fn map_entries(&self, f: impl Fn(usize, usize, T) -> T) -> Self {
        let trip: Vec<_> = self.triplets().map(|(r, c, v)| (r, c, f(r, c, v))).collect();
        Self::from_triplets(self.nrows, self.ncols, &trip).expect("pattern in range")
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// `max |M_ij - sign * M_ji|`, i.e. the symmetry (`sign = 1`) or
    /// skew-symmetry (`sign = -1`) defect.
    pub fn transpose_defect(&self, sign: T) -> T {
        let mut worst = T::zero();
        for (r, c, v) in self.triplets() {
            worst = worst.max((v - sign * self.get(c, r)).abs());
        }
        worst
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            out[r][c] = v;
        }
        out
    }

    /// `M^T diag(w) M`, accumulated so that entry `(i, j)` and `(j, i)` are
    /// bitwise equal.
    pub fn weighted_gram(&self, weights: &[T]) -> Result<Self> {
        if weights.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                got: weights.len(),
            });
        }
        let mut trip = Vec::new();
        for (r, &w) in weights.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&ci, &vi) in cols.iter().zip(vals) {
                for (&cj, &vj) in cols.iter().zip(vals) {
                    trip.push((ci, cj, w * (vi * vj)));
                }
            }
        }
        Self::from_triplets(self.ncols, self.ncols, &trip)
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.nrows * self.ncols,
                got: other.nrows * other.ncols,
            });
        }
        Ok(())
    }

    fn drop_zeros(self) -> Self {
        if self.values.iter().all(|&v| v != T::zero()) {
            return self;
        }
        let trip: Vec<_> = self.triplets().collect();
        Self::from_triplets(self.nrows, self.ncols, &trip).expect("pattern in range")
    }
}
