//! Row-major dense and CSR sparse real matrices.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scaled(&self, c: f64) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// `(min, max)` over all entries; `None` for an empty matrix.
    pub fn range(&self) -> Option<(f64, f64)> {
        let mut it = self.data.iter().copied();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }
}

/// Compressed sparse rows; column indices are strictly increasing per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_start: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_start: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_start.len() != rows + 1 || row_start[0] != 0 || row_start[rows] != col_idx.len() {
            return Err(Error::InvalidArgument("malformed CSR row pointer".into()));
        }
        if col_idx.len() != values.len() {
            return Err(Error::InvalidArgument("CSR column and value arrays differ in length".into()));
        }
        for i in 0..rows {
            let (a, b) = (row_start[i], row_start[i + 1]);
            if a > b {
                return Err(Error::InvalidArgument("CSR row pointer decreases".into()));
            }
            let r = &col_idx[a..b];
            if r.windows(2).any(|w| w[0] >= w[1]) || r.last().is_some_and(|&c| c >= cols) {
                return Err(Error::InvalidArgument(format!("CSR row {i} has unsorted or out-of-range columns")));
            }
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_start,
            col_idx,
            values,
        })
    }

    /// Build from per-row `(column, value)` lists; columns are sorted here.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_start.push(0);
        for mut r in rows {
            r.sort_by_key(|&(c, _)| c);
            for (c, v) in r {
                col_idx.push(c);
                values.push(v);
            }
            row_start.push(col_idx.len());
        }
        Self::from_csr(n, cols, row_start, col_idx, values)
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let rows = (0..m.rows())
            .map(|i| m.row(i).iter().copied().enumerate().collect())
            .collect();
        Self::from_rows(m.cols(), rows).expect("dense rows are well formed")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_start[i], self.row_start[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (c, v) = self.row(i);
        c.binary_search(&j).ok().map(|k| v[k])
    }

    pub fn row_start(&self) -> &[usize] {
        &self.row_start
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v *= c);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_validation() {
        assert!(SparseMatrix::from_csr(2, 2, vec![0, 1, 2], vec![0, 5], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_csr(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        let m = SparseMatrix::from_rows(3, vec![vec![(2, 1.0), (0, 2.0)], vec![]]).unwrap();
        assert_eq!(m.row(0), (&[0usize, 2][..], &[2.0, 1.0][..]));
        assert_eq!(m.get(0, 2), Some(1.0));
        assert_eq!(m.get(1, 0), None);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn dense_basics() {
        let m = DenseMatrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(m.row(1), &[3.0, 4.0, 5.0]);
        assert_eq!(m.transpose().get(2, 1), 5.0);
        assert_eq!(m.range(), Some((0.0, 5.0)));
        assert!(DenseMatrix::new(2, 2, vec![1.0]).is_err());
    }
}
