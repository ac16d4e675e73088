//! Compressed-row sparse matrices and sparse × dense products.

use crate::error::{Error, Result};
use crate::numkit::Tensor;

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row and every stored
/// value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn empty(rows: usize, cols: usize) -> Self {
        CsrMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are rejected,
    /// explicit zeros are kept.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut prev: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            if r >= rows || c >= cols {
                return Err(Error::shape(
                    "CsrMatrix::from_triplets",
                    format!("entry ({r},{c}) outside {rows}×{cols}"),
                ));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("CsrMatrix::from_triplets"));
            }
            if prev == Some((r, c)) {
                return Err(Error::InvalidArgument(format!("duplicate sparse entry ({r},{c})")));
            }
            prev = Some((r, c));
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Keeps every nonzero of a dense matrix.
    pub fn from_dense(m: &Tensor) -> Result<Self> {
        let (r, c) = m.shape2()?;
        let mut trip = Vec::new();
        for i in 0..r {
            for j in 0..c {
                let v = m.get2(i, j);
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(r, c, &trip)
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

    /// Stored entries of row `r` as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(&[self.rows, self.cols]);
        for (r, c, v) in self.triplets() {
            t.set2(r, c, v);
        }
        t
    }

    pub fn transpose(&self) -> CsrMatrix {
        let trip: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        CsrMatrix::from_triplets(self.cols, self.rows, &trip).expect("transpose of a valid matrix")
    }

    /// `copies` copies of `self` along the diagonal.
    pub fn block_diagonal(&self, copies: usize) -> CsrMatrix {
        let mut indptr = Vec::with_capacity(self.rows * copies + 1);
        let mut indices = Vec::with_capacity(self.nnz() * copies);
        let mut values = Vec::with_capacity(self.nnz() * copies);
        indptr.push(0);
        for b in 0..copies {
            let off = b * self.cols;
            for r in 0..self.rows {
                for (c, v) in self.row(r) {
                    indices.push(c + off);
                    values.push(v);
                }
                indptr.push(indices.len());
            }
        }
        CsrMatrix {
            rows: self.rows * copies,
            cols: self.cols * copies,
            indptr,
            indices,
            values,
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let t = self.transpose();
        let d = self.to_dense();
        let dt = t.to_dense();
        d.max_abs_diff(&dt) <= tol
    }
}

/// Sparse × dense product. Cost is `nnz · F`.
pub fn spmm(s: &CsrMatrix, x: &Tensor) -> Result<Tensor> {
    let (xr, f) = x.shape2()?;
    if s.cols != xr {
        return Err(Error::shape(
            "spmm",
            format!("{}×{} · {:?}", s.rows, s.cols, x.dims()),
        ));
    }
    let xd = x.data();
    let mut out = vec![0.0; s.rows * f];
    for r in 0..s.rows {
        let orow = &mut out[r * f..(r + 1) * f];
        for (c, v) in s.row(r) {
            let xrow = &xd[c * f..(c + 1) * f];
            for (o, xv) in orow.iter_mut().zip(xrow) {
                *o += v * xv;
            }
        }
    }
    let t = Tensor::new(vec![s.rows, f], out)?;
    if !t.all_finite() {
        return Err(Error::NonFinite("spmm"));
    }
    Ok(t)
}

/// `sᵀ · x`, used by the backward pass of [`spmm`].
pub(crate) fn spmm_t(s: &CsrMatrix, x: &Tensor) -> Result<Tensor> {
    let (xr, f) = x.shape2()?;
    if s.rows != xr {
        return Err(Error::shape("spmm_t", format!("({}×{})ᵀ · {:?}", s.rows, s.cols, x.dims())));
    }
    let xd = x.data();
    let mut out = vec![0.0; s.cols * f];
    for r in 0..s.rows {
        let xrow = &xd[r * f..(r + 1) * f];
        for (c, v) in s.row(r) {
            let orow = &mut out[c * f..(c + 1) * f];
            for (o, xv) in orow.iter_mut().zip(xrow) {
                *o += v * xv;
            }
        }
    }
    Tensor::new(vec![s.cols, f], out)
}
