use std::io::{self, Write};

use crate::error::{CutFemError, Result};
use crate::scalar::Real;

/// Stored entries with magnitude below this are dropped on finalization.
const DROP_BELOW: f64 = 1e-300;

/// Square matrix in compressed-sparse-row layout with strictly ascending
/// column indices in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

/// Accumulates `(row, col, value)` contributions; duplicates are summed in
/// insertion order when the matrix is built.
#[derive(Debug, Clone)]
pub struct TripletBuilder<T> {
    dim: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> TripletBuilder<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.dim && col < self.dim);
        self.entries.push((row, col, value));
    }

    /// Adds `scale * c c^T` over the index set `dofs`.
    pub fn add_outer(&mut self, dofs: &[usize], c: &[T], scale: T) {
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                self.add(i, j, scale * c[a] * c[b]);
            }
        }
    }

    /// Adds a dense local matrix (row-major, `dofs.len()` squared entries).
    pub fn add_local(&mut self, dofs: &[usize], local: &[T]) {
        let n = dofs.len();
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                self.add(i, j, local[a * n + b]);
            }
        }
    }

    pub fn build(self) -> SparseMatrix<T> {
        let TripletBuilder { dim, mut entries } = self;
        // Pattern pass: stable sort keeps insertion order within duplicates.
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let drop = T::lit(DROP_BELOW);
        let mut row_offsets = vec![0; dim + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut k = 0;
        while k < entries.len() {
            let (r, c, _) = entries[k];
            let mut sum = T::zero();
            while k < entries.len() && entries[k].0 == r && entries[k].1 == c {
                sum += entries[k].2;
                k += 1;
            }
            if sum == T::zero() || sum.abs() < drop {
                continue;
            }
            col_indices.push(c);
            values.push(sum);
            row_offsets[r + 1] += 1;
        }
        for r in 0..dim {
            row_offsets[r + 1] += row_offsets[r];
        }
        SparseMatrix {
            dim,
            row_offsets,
            col_indices,
            values,
        }
    }
}

impl<T: Real> SparseMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        TripletBuilder::new(dim).build()
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); dim])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut b = TripletBuilder::new(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            b.add(i, i, d);
        }
        b.build()
    }

    /// Row-major dense input.
    pub fn from_dense(dim: usize, dense: &[T]) -> Self {
        let mut b = TripletBuilder::new(dim);
        for i in 0..dim {
            for j in 0..dim {
                b.add(i, j, dense[i * dim + j]);
            }
        }
        b.build()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => T::zero(),
        }
    }

    /// Sorted `(row, col, value)` triplets.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut dense = vec![T::zero(); self.dim * self.dim];
        for (i, j, v) in self.triplets() {
            dense[i * self.dim + j] = v;
        }
        dense
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.dim {
            return Err(CutFemError::DimensionMismatch {
                expected: self.dim,
                found: n,
            });
        }
        Ok(())
    }

    /// `y = A x`, rows accumulated left to right.
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = T::zero();
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x.len())?;
        let mut y = vec![T::zero(); self.dim];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[T]) -> Result<T> {
        let y = self.matvec(x)?;
        Ok(x.iter().zip(&y).map(|(&a, &b)| a * b).sum())
    }

    /// `x^T A y`.
    pub fn bilinear_form(&self, x: &[T], y: &[T]) -> Result<T> {
        self.check_len(x.len())?;
        let ay = self.matvec(y)?;
        Ok(x.iter().zip(&ay).map(|(&a, &b)| a * b).sum())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// Entrywise sum; the pattern is the union of both patterns.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_len(other.dim)?;
        let mut b = TripletBuilder::new(self.dim);
        for (i, j, v) in self.triplets() {
            b.add(i, j, v);
        }
        for (i, j, v) in other.triplets() {
            b.add(i, j, v);
        }
        Ok(b.build())
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// `max |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(T::zero(), T::max)
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        self.triplets().all(|(i, j, _)| {
            let range = self.row_offsets[j]..self.row_offsets[j + 1];
            self.col_indices[range].binary_search(&i).is_ok()
        })
    }

    /// Writes sorted `row,col,value` lines with a header.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "row,col,value")?;
        for (i, j, v) in self.triplets() {
            writeln!(out, "{i},{j},{v}")?;
        }
        Ok(())
    }
}
