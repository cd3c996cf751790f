//! Macaulay matrices in compressed sparse row form, plus the shift
//! selectors that turn their null space into an eigenvalue problem.

use std::io::Write;

use crate::error::{Error, Result};
use crate::mvp::PolynomialSystem;
use crate::polynomial::{binomial, monomial_basis_capped, shift_poly, MonomialOrdering};

/// Default number of selector rows beyond the null-space dimension.
pub const EXTRA_SELECTOR_ROWS: usize = 16;

/// Which seed equation and shift monomial produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowSource {
    pub equation: usize,
    /// Index of the shift monomial in the column ordering.
    pub shift: usize,
}

#[derive(Debug, Clone)]
pub struct MacaulayMatrix {
    ordering: MonomialOrdering,
    degree: u32,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    provenance: Vec<RowSource>,
}

/// `d_max * n_e - n_v + 1`, floored at `d_max`.
pub fn macaulay_degree_bound(system: &PolynomialSystem) -> u32 {
    let d_max = system.max_degree() as i64;
    let bound = d_max * system.num_equations() as i64 - system.n_v() as i64 + 1;
    bound.max(d_max) as u32
}

/// `(n_rows, n_cols)` of the Macaulay matrix at the default degree bound.
pub fn count_rows_cols(system: &PolynomialSystem) -> Result<(u128, u128)> {
    count_rows_cols_at(system, macaulay_degree_bound(system))
}

pub fn count_rows_cols_at(system: &PolynomialSystem, degree: u32) -> Result<(u128, u128)> {
    let n_v = system.n_v() as u128;
    let overflow = |what| Error::CapExceeded {
        what,
        needed: u128::MAX,
        cap: u128::MAX,
    };
    let mut rows: u128 = 0;
    for &d_e in system.degrees() {
        if d_e > degree {
            continue;
        }
        let r = binomial((degree - d_e) as u128 + n_v, n_v).ok_or_else(|| overflow("Macaulay rows"))?;
        rows = rows.checked_add(r).ok_or_else(|| overflow("Macaulay rows"))?;
    }
    let cols = binomial(degree as u128 + n_v, n_v).ok_or_else(|| overflow("Macaulay columns"))?;
    Ok((rows, cols))
}

/// Largest row or column count [`build_macaulay`] will materialize. Past this
/// the matrix alone needs gigabytes.
pub const MACAULAY_SIZE_CAP: u128 = 10_000_000;

pub fn build_macaulay(system: &PolynomialSystem) -> Result<MacaulayMatrix> {
    build_macaulay_at(system, macaulay_degree_bound(system), MACAULAY_SIZE_CAP)
}

/// Every seed equation `p_e` times every monomial of degree
/// `<= degree - deg(p_e)`, expanded over the graded basis of degree `degree`.
pub fn build_macaulay_at(system: &PolynomialSystem, degree: u32, cap: u128) -> Result<MacaulayMatrix> {
    let (rows, cols) = count_rows_cols_at(system, degree)?;
    for (what, needed) in [("Macaulay rows", rows), ("Macaulay columns", cols)] {
        if needed > cap {
            return Err(Error::CapExceeded { what, needed, cap });
        }
    }
    let ordering = monomial_basis_capped(system.n_v(), degree, cap)?;
    let mut row_ptr = Vec::with_capacity(rows as usize + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut provenance = Vec::with_capacity(rows as usize);
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for (e, (p, &d_e)) in system.polys().iter().zip(system.degrees()).enumerate() {
        if d_e > degree {
            continue;
        }
        for shift in 0..ordering.count_up_to(degree - d_e) {
            entries.clear();
            for (c, m) in shift_poly(p, ordering.monomial(shift)).terms() {
                let col = ordering
                    .index_of(m)
                    .expect("shifted monomial lies inside the basis");
                entries.push((col, *c));
            }
            entries.sort_unstable_by_key(|&(c, _)| c);
            for &(c, v) in &entries {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
            provenance.push(RowSource { equation: e, shift });
        }
    }
    Ok(MacaulayMatrix {
        ordering,
        degree,
        row_ptr,
        col_idx,
        values,
        provenance,
    })
}

impl MacaulayMatrix {
    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.ordering.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Degree bound used to build the column basis.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn ordering(&self) -> &MonomialOrdering {
        &self.ordering
    }

    pub fn provenance(&self) -> &[RowSource] {
        &self.provenance
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn max_row_nnz(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(r);
        cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum()
    }

    /// `M x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.row_dot(r, x)).collect()
    }

    /// `M^T y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols()];
        for (r, &yr) in y.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, v) in cols.iter().zip(vals) {
                out[c] += v * yr;
            }
        }
        out
    }

    /// Accumulates `scale * sum_r m_r (m_r^T X)` into `out` for the given rows,
    /// where `X` and `out` are `n_cols x k` blocks stored row-major.
    pub fn gram_block_into(&self, rows: impl Iterator<Item = usize>, x: &[f64], k: usize, scale: f64, out: &mut [f64]) {
        let mut proj = vec![0.0; k];
        for r in rows {
            let (cols, vals) = self.row(r);
            proj.iter_mut().for_each(|p| *p = 0.0);
            for (&c, v) in cols.iter().zip(vals) {
                let xr = &x[c * k..(c + 1) * k];
                for (p, xv) in proj.iter_mut().zip(xr) {
                    *p += v * xv;
                }
            }
            for (&c, v) in cols.iter().zip(vals) {
                let w = scale * v;
                let or = &mut out[c * k..(c + 1) * k];
                for (o, p) in or.iter_mut().zip(&proj) {
                    *o += w * p;
                }
            }
        }
    }

    /// `M X` for a row-major `n_cols x k` block; result is `n_rows x k` row-major.
    pub fn mul_block(&self, x: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows() * k];
        for r in 0..self.n_rows() {
            let (cols, vals) = self.row(r);
            let or = &mut out[r * k..(r + 1) * k];
            for (&c, v) in cols.iter().zip(vals) {
                for (o, xv) in or.iter_mut().zip(&x[c * k..(c + 1) * k]) {
                    *o += v * xv;
                }
            }
        }
        out
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n_cols();
        let mut out = vec![0.0; self.n_rows() * n];
        for r in 0..self.n_rows() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[r * n + c] = v;
            }
        }
        out
    }

    /// Writes `row col value` lines, one per stored entry.
    pub fn write_coordinates<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "% {} {} {}", self.n_rows(), self.n_cols(), self.nnz())?;
        for r in 0..self.n_rows() {
            let (cols, vals) = self.row(r);
            for (&c, v) in cols.iter().zip(vals) {
                writeln!(w, "{r} {c} {v:e}")?;
            }
        }
        Ok(())
    }
}

/// Paired column indices with `monomial(svl[j]) = v_l * monomial(s1[j])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftSelectors {
    pub s1: Vec<usize>,
    pub svl: Vec<usize>,
    pub variable: usize,
}

impl ShiftSelectors {
    pub fn len(&self) -> usize {
        self.s1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s1.is_empty()
    }
}

/// Monomials whose `v_l` multiple stays in the basis: all of degree `<= d - 1`.
pub fn eligible_selector_count(ordering: &MonomialOrdering) -> usize {
    if ordering.max_degree() == 0 {
        0
    } else {
        ordering.count_up_to(ordering.max_degree() - 1)
    }
}

/// Takes `min(eligible, null_dim + extra_rows)` monomials in graded order.
pub fn build_shift_selectors(
    ordering: &MonomialOrdering,
    null_dim: usize,
    variable: usize,
    extra_rows: usize,
) -> Result<ShiftSelectors> {
    let eligible = eligible_selector_count(ordering);
    if eligible < null_dim {
        return Err(Error::NotEnoughSelectors {
            eligible,
            needed: null_dim,
        });
    }
    selectors_with_count(ordering, (null_dim + extra_rows).min(eligible), variable)
}

/// The first `count` eligible monomials paired with their `v_variable` shifts.
pub fn selectors_with_count(ordering: &MonomialOrdering, count: usize, variable: usize) -> Result<ShiftSelectors> {
    if variable >= ordering.n_v() {
        return Err(Error::InvalidArgument(format!(
            "shift variable {variable} out of range for {} variables",
            ordering.n_v()
        )));
    }
    let eligible = eligible_selector_count(ordering);
    if count > eligible {
        return Err(Error::NotEnoughSelectors {
            eligible,
            needed: count,
        });
    }
    let mut s1 = Vec::with_capacity(count);
    let mut svl = Vec::with_capacity(count);
    for j in 0..count {
        let mut m = ordering.monomial(j).clone();
        m.0[variable] += 1;
        s1.push(j);
        svl.push(ordering.index_of(&m).expect("degree below bound"));
    }
    Ok(ShiftSelectors { s1, svl, variable })
}
