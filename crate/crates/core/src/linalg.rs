//! Thin wrappers over `faer` for the dense decompositions used by the solvers.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub use faer::Mat as DenseMatrix;

/// Dense matrix from a row-major slice.
pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Mat<f64> {
    MatRef::from_row_major_slice(data, rows, cols).to_owned()
}

/// Row-major copy of a dense matrix.
pub fn to_row_major(a: MatRef<'_, f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.nrows() * a.ncols());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(a[(i, j)]);
        }
    }
    out
}

pub fn column(a: MatRef<'_, f64>, j: usize) -> Vec<f64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

/// Singular value decomposition with singular values in nonincreasing order.
/// `v` always has `a.ncols()` columns so the trailing columns span the null
/// space when `a` is wide.
pub struct Svd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

pub fn svd(a: MatRef<'_, f64>) -> Result<Svd> {
    let dec = if a.nrows() >= a.ncols() { a.thin_svd() } else { a.svd() }
        .map_err(|e| Error::LinearAlgebra(format!("SVD did not converge: {e:?}")))?;
    let s = dec.S().column_vector().iter().copied().collect();
    Ok(Svd {
        u: dec.U().to_owned(),
        s,
        v: dec.V().to_owned(),
    })
}

/// Orthonormal null-space basis: right singular vectors whose singular value
/// is `<= rel_tol * sigma_max`, plus the full singular spectrum.
pub fn null_space(a: MatRef<'_, f64>, rel_tol: f64) -> Result<(Mat<f64>, Vec<f64>)> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Ok((Mat::identity(n, n), Vec::new()));
    }
    let dec = svd(a)?;
    let smax = dec.s.first().copied().unwrap_or(0.0);
    let rank = dec.s.iter().filter(|&&s| s > rel_tol * smax).count();
    let basis = dec.v.subcols(rank, n - rank).to_owned();
    Ok((basis, dec.s))
}

/// Moore-Penrose pseudoinverse keeping singular values above
/// `rel_cutoff * sigma_max`.
pub fn pinv(a: MatRef<'_, f64>, rel_cutoff: f64) -> Result<(Mat<f64>, usize)> {
    let dec = svd(a)?;
    let smax = dec.s.first().copied().unwrap_or(0.0);
    if !(smax > 0.0) {
        return Err(Error::ZeroPseudoinverse);
    }
    let keep: Vec<usize> = (0..dec.s.len()).filter(|&i| dec.s[i] > rel_cutoff * smax).collect();
    let mut out = Mat::<f64>::zeros(a.ncols(), a.nrows());
    for &k in &keep {
        let inv = 1.0 / dec.s[k];
        for i in 0..a.ncols() {
            let vik = dec.v[(i, k)] * inv;
            for j in 0..a.nrows() {
                out[(i, j)] += vik * dec.u[(j, k)];
            }
        }
    }
    Ok((out, keep.len()))
}

/// Numerical rank at `rel_tol * sigma_max`.
pub fn rank(a: MatRef<'_, f64>, rel_tol: f64) -> Result<usize> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0);
    }
    let s = a
        .singular_values()
        .map_err(|e| Error::LinearAlgebra(format!("SVD did not converge: {e:?}")))?;
    let smax = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&x| x > rel_tol * smax && x > 0.0).count())
}

/// Eigenpairs of a real square matrix; complex pairs included.
pub struct Eigen {
    pub values: Vec<c64>,
    pub vectors: Mat<c64>,
}

pub fn eigen(a: MatRef<'_, f64>) -> Result<Eigen> {
    let dec = a
        .eigen()
        .map_err(|e| Error::LinearAlgebra(format!("eigendecomposition failed: {e:?}")))?;
    Ok(Eigen {
        values: dec.S().column_vector().iter().copied().collect(),
        vectors: dec.U().to_owned(),
    })
}

/// Symmetric eigendecomposition, eigenvalues ascending.
pub fn symmetric_eigen(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let dec = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("symmetric eigendecomposition failed: {e:?}")))?;
    Ok((dec.S().column_vector().iter().copied().collect(), dec.U().to_owned()))
}

/// Orthonormal basis for the columns of `a` (thin Q factor).
pub fn orthonormalize(a: MatRef<'_, f64>) -> Mat<f64> {
    a.qr().compute_thin_Q()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
