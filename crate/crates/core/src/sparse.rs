//! Compressed sparse row matrices.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Sparse matrix in CSR layout with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from raw parts, checking the layout invariants.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let m = Csr {
            rows,
            cols,
            indptr,
            indices,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds from unordered `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; rows + 1];
        for &(r, c, _) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::DimensionMismatch(format!(
                    "triplet ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let mut order: Vec<(usize, f64)> = vec![(0, 0.0); triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            order[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        for r in 0..rows {
            let row = &mut order[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in row.iter() {
                if indices.len() > *indptr.last().unwrap() && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Csr {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Csr {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Diagonal 0/1 matrix keeping the rows flagged in `keep`.
    pub fn row_selector(keep: &[bool]) -> Self {
        let n = keep.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for (i, &k) in keep.iter().enumerate() {
            if k {
                indices.push(i);
            }
            indptr.push(indices.len());
        }
        let values = vec![1.0; indices.len()];
        Csr {
            rows: n,
            cols: n,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: ArrayView2<f64>) -> Self {
        let (rows, cols) = m.dim();
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..rows {
            for c in 0..cols {
                let v = m[[r, c]];
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.indptr.len() != self.rows + 1 || self.indptr[0] != 0 {
            return Err(Error::InvalidGraph("malformed row offsets".into()));
        }
        if self.indices.len() != self.values.len() || *self.indptr.last().unwrap() != self.indices.len() {
            return Err(Error::InvalidGraph("offsets disagree with entry count".into()));
        }
        for r in 0..self.rows {
            let (a, b) = (self.indptr[r], self.indptr[r + 1]);
            if a > b {
                return Err(Error::InvalidGraph(format!("row {r}: decreasing offsets")));
            }
            let row = &self.indices[a..b];
            if row.iter().any(|&c| c >= self.cols) {
                return Err(Error::InvalidGraph(format!("row {r}: column out of range")));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGraph(format!("row {r}: columns not strictly increasing")));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.indptr[r + 1] - self.indptr[r]
    }

    /// Value at `(r, c)`, zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (idx, vals) = self.row(r);
        match idx.binary_search(&c) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (idx, vals) = self.row(r);
            idx.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for (r, c, v) in self.iter() {
            out[[r, c]] = v;
        }
        out
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                indices[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        Csr {
            rows: self.cols,
            cols: self.rows,
            indptr: counts,
            indices,
            values,
        }
    }

    /// `self · dense`.
    pub fn mul_dense(&self, dense: ArrayView2<f64>) -> Result<Array2<f64>> {
        if dense.nrows() != self.cols {
            return Err(Error::shape(
                "sparse_dense_matmul",
                format!("{}x{} times {}x{}", self.rows, self.cols, dense.nrows(), dense.ncols()),
            ));
        }
        let k = dense.ncols();
        let mut out = Array2::zeros((self.rows, k));
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            let mut orow = out.row_mut(r);
            for (&c, &v) in idx.iter().zip(vals) {
                orow.scaled_add(v, &dense.row(c));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · dense` without materializing the transpose.
    pub fn transpose_mul_dense(&self, dense: ArrayView2<f64>) -> Result<Array2<f64>> {
        if dense.nrows() != self.rows {
            return Err(Error::shape(
                "sparse_dense_matmul",
                format!("({}x{})ᵀ times {}x{}", self.rows, self.cols, dense.nrows(), dense.ncols()),
            ));
        }
        let mut out = Array2::zeros((self.cols, dense.ncols()));
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            let drow = dense.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                out.row_mut(c).scaled_add(v, &drow);
            }
        }
        Ok(out)
    }

    /// Sparse-sparse product `self · other`.
    pub fn mul_sparse(&self, other: &Csr) -> Result<Csr> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "sparse_sparse_matmul",
                format!("{}x{} times {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        let mut acc = vec![0.0; other.cols];
        let mut touched = vec![false; other.cols];
        let mut cols_in_row: Vec<usize> = Vec::new();
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&k, &a) in idx.iter().zip(vals) {
                let (oidx, ovals) = other.row(k);
                for (&c, &b) in oidx.iter().zip(ovals) {
                    if !touched[c] {
                        touched[c] = true;
                        cols_in_row.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols_in_row.sort_unstable();
            for &c in &cols_in_row {
                indices.push(c);
                values.push(acc[c]);
                acc[c] = 0.0;
                touched[c] = false;
            }
            cols_in_row.clear();
            indptr.push(indices.len());
        }
        Ok(Csr {
            rows: self.rows,
            cols: other.cols,
            indptr,
            indices,
            values,
        })
    }

    /// Copy keeping only the rows flagged in `keep`; other rows become empty.
    pub fn filter_rows(&self, keep: &[bool]) -> Csr {
        debug_assert_eq!(keep.len(), self.rows);
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..self.rows {
            if keep[r] {
                let (idx, vals) = self.row(r);
                indices.extend_from_slice(idx);
                values.extend_from_slice(vals);
            }
            indptr.push(indices.len());
        }
        Csr {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    /// Copy where each stored value is replaced by `f(row, col, value)`;
    /// entries mapped to zero are dropped.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Csr {
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                let nv = f(r, c, v);
                if nv != 0.0 {
                    indices.push(c);
                    values.push(nv);
                }
            }
            indptr.push(indices.len());
        }
        Csr {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    /// Rows rescaled to unit sum; all-zero rows stay zero.
    pub fn row_normalized(&self) -> Csr {
        let sums: Vec<f64> = (0..self.rows).map(|r| self.row(r).1.iter().sum()).collect();
        self.map_values(|r, _, v| if sums[r] != 0.0 { v / sums[r] } else { 0.0 })
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }
}
