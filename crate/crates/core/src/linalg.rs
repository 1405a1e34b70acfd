//! Small linear algebra kit: banded symmetric Cholesky for the solves, a
//! row-sparse matrix for the averaging operator, and dense pencil helpers
//! built on nalgebra for the spectral analysis.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Something finite element contributions can be scattered into.
pub trait MatrixSink {
    fn add(&mut self, i: usize, j: usize, v: f64);
}

impl MatrixSink for DMatrix<f64> {
    fn add(&mut self, i: usize, j: usize, v: f64) {
        self[(i, j)] += v;
    }
}

/// Symmetric band matrix; only the lower band is stored.
#[derive(Debug, Clone)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    // row i holds columns i - bw ..= i at offsets 0 ..= bw
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        Self {
            n,
            bw: half_bandwidth,
            data: vec![0.0; n * (half_bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.bw
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (self.bw + j - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// In-place band Cholesky `A = L Lᵀ`. Fails with the offending pivot when
    /// the matrix is not positive definite.
    pub fn cholesky(mut self) -> std::result::Result<BandedCholesky, (usize, f64)> {
        let (n, bw) = (self.n, self.bw);
        for j in 0..n {
            let k0 = j.saturating_sub(bw);
            let mut d = self.data[self.idx(j, j)];
            for k in k0..j {
                let l = self.data[self.idx(j, k)];
                d -= l * l;
            }
            if !(d > 0.0) {
                return Err((j, d));
            }
            let d = d.sqrt();
            let jj = self.idx(j, j);
            self.data[jj] = d;
            for i in j + 1..(j + bw + 1).min(n) {
                let mut s = self.data[self.idx(i, j)];
                for k in i.saturating_sub(bw).max(k0)..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                let ij = self.idx(i, j);
                self.data[ij] = s / d;
            }
        }
        Ok(BandedCholesky { factor: self })
    }
}

impl MatrixSink for BandedSym {
    /// Upper-triangle contributions are ignored; callers scatter symmetric
    /// element matrices in full.
    fn add(&mut self, i: usize, j: usize, v: f64) {
        if i >= j {
            assert!(i - j <= self.bw, "entry ({i}, {j}) outside the band");
            let k = self.idx(i, j);
            self.data[k] += v;
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    factor: BandedSym,
}

impl BandedCholesky {
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let f = &self.factor;
        let (n, bw) = (f.n, f.bw);
        assert_eq!(rhs.len(), n);
        let mut y = rhs.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= f.data[f.idx(i, k)] * y[k];
            }
            y[i] = s / f.data[f.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= f.data[f.idx(k, i)] * y[k];
            }
            y[i] = s / f.data[f.idx(i, i)];
        }
        y
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rhs.nrows(), rhs.ncols());
        for (c, col) in rhs.column_iter().enumerate() {
            out.set_column(c, &self.solve(&col.into_owned()));
        }
        out
    }
}

/// Row-compressed sparse matrix, built row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    ncols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            ncols,
            rows: vec![Vec::new(); nrows],
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn push(&mut self, row: usize, col: usize, v: f64) {
        debug_assert!(col < self.ncols);
        self.rows[row].push((col, v));
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows
                .iter()
                .map(|r| r.iter().map(|&(c, v)| v * x[c]).sum::<f64>()),
        )
    }

    /// `Aᵀ y`.
    pub fn tr_mul_vec(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out[c] += v * y[r];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.ncols);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] += v;
            }
        }
        m
    }
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn cholesky_spd(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(symmetrize(m))
        .ok_or_else(|| Error::NumericalRank(format!("{what} is not symmetric positive definite")))
}

/// Lower-triangular solve `L X = B`.
pub fn lower_solve(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    l.solve_lower_triangular(b)
        .expect("Cholesky factor has a positive diagonal")
}

/// Eigenvalues of the symmetric pencil `(A, M)`, ascending, via
/// `L⁻¹ sym(A) L⁻ᵀ` with `M = L Lᵀ`.
pub fn pencil_eigenvalues(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = cholesky_spd(m, "pencil Gram matrix")?.unpack();
    let t = lower_solve(&l, &symmetrize(a));
    let c = lower_solve(&l, &t.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(&c)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Writes the nonzeros of `m` in MatrixMarket coordinate format.
pub fn write_matrix_market(m: &DMatrix<f64>, mut out: impl Write) -> std::io::Result<()> {
    let nnz = m.iter().filter(|v| **v != 0.0).count();
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), nnz)?;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
    }
    Ok(())
}
