//! Compressed-row real matrices assembled from triplets.

use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Result, SemError};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Sums duplicates and drops entries that end up exactly zero.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trips: Vec<(usize, usize, f64)>) -> Self {
        trips.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut values = Vec::with_capacity(trips.len());
        let mut i = 0;
        while i < trips.len() {
            let (r, c, _) = trips[i];
            debug_assert!(r < nrows && c < ncols);
            let mut v = 0.0;
            while i < trips.len() && trips[i].0 == r && trips[i].1 == c {
                v += trips[i].2;
                i += 1;
            }
            if v != 0.0 {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        SparseMatrix { nrows, ncols, indptr, indices, values }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix::from_triplets(nrows, ncols, Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
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

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows)
            .flat_map(move |r| (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k])))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.values[self.indptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn transpose(&self) -> Self {
        SparseMatrix::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)).collect())
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok((0..self.nrows)
            .map(|r| (self.indptr[r]..self.indptr[r + 1]).map(|k| self.values[k] * x[self.indices[k]]).sum())
            .collect())
    }

    pub fn matvec_c64(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(x.len())?;
        Ok((0..self.nrows)
            .map(|r| (self.indptr[r]..self.indptr[r + 1]).map(|k| x[self.indices[k]] * self.values[k]).sum())
            .collect())
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.ncols {
            return Err(SemError::DimensionMismatch { expected: self.ncols, got: n });
        }
        Ok(())
    }

    /// Max absolute column sum.
    pub fn norm1(&self) -> f64 {
        let mut col = vec![0.0; self.ncols];
        for (_, c, v) in self.triplets() {
            col[c] += v.abs();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Relative Frobenius asymmetry `‖S - Sᵀ‖_F / ‖S‖_F`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let diff = SparseMatrix::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets().chain(t.triplets().map(|(r, c, v)| (r, c, -v))).collect(),
        );
        let n2: f64 = self.values.iter().map(|v| v * v).sum();
        let d2: f64 = diff.values.iter().map(|v| v * v).sum();
        if n2 == 0.0 {
            0.0
        } else {
            (d2 / n2).sqrt()
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let trips: Vec<Triplet<usize, usize, f64>> = self.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trips).expect("valid triplets")
    }

    /// `Σ s_i · M_i` over matrices of equal shape.
    pub fn linear_combination(parts: &[(&SparseMatrix, f64)]) -> Self {
        let (n, m) = (parts[0].0.nrows, parts[0].0.ncols);
        let trips = parts.iter().flat_map(|(mat, s)| mat.triplets().map(move |(r, c, v)| (r, c, s * v))).collect();
        SparseMatrix::from_triplets(n, m, trips)
    }

    /// Block matrix from a grid of optional `(block, scale)` entries.
    pub fn from_blocks(grid: &[Vec<Option<(&SparseMatrix, f64)>>]) -> Self {
        let rows: Vec<usize> =
            grid.iter().map(|row| row.iter().flatten().next().expect("block row has an entry").0.nrows).collect();
        let cols: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().find_map(|row| row[j]).expect("block column has an entry").0.ncols)
            .collect();
        let mut trips = Vec::new();
        let mut r0 = 0;
        for (i, row) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (j, blk) in row.iter().enumerate() {
                if let Some((m, s)) = blk {
                    trips.extend(m.triplets().map(|(r, c, v)| (r0 + r, c0 + c, s * v)));
                }
                c0 += cols[j];
            }
            r0 += rows[i];
        }
        SparseMatrix::from_triplets(r0, cols.iter().sum(), trips)
    }

    /// Matrix Market coordinate format, 1-based indices.
    pub fn write_matrix_market(&self, mut w: impl Write, comment: &str) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        for line in comment.lines() {
            writeln!(w, "% {line}")?;
        }
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{} {} {v:.17e}", r + 1, c + 1)?;
        }
        Ok(())
    }
}
