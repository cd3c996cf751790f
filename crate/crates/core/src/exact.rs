//! Dense solver: Macaulay null space, shift eigenproblem, root extraction.

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, StrategyProfile};
use crate::linalg;
use crate::macaulay::{build_macaulay, count_rows_cols, eligible_selector_count, selectors_with_count, MacaulayMatrix, ShiftSelectors};
use crate::mvp::{build_ne_mvp, recover_strategy_with_tol, system_residual, PolynomialSystem};
use crate::regularization::TsallisParams;
use crate::solution::{Solution, SolutionSet, SolutionSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExactTolerances {
    /// Singular values `<= rank_tol * sigma_max` count as zero.
    pub rank_tol: f64,
    pub residual_tol: f64,
    pub first_entry_tol: f64,
    /// Relative bound on the imaginary part of a candidate root.
    pub imag_tol: f64,
    pub neg_tol: f64,
    /// Allowed `|sum x_i - 1|` for accepted profiles.
    pub simplex_tol: f64,
    pub dedup_tol: f64,
    /// Largest `n_rows * n_cols` densified.
    pub dense_cap: usize,
    pub shift_variable: usize,
    pub extra_rows: usize,
}

impl Default for ExactTolerances {
    fn default() -> Self {
        Self {
            rank_tol: 1e-8,
            residual_tol: 1e-6,
            first_entry_tol: 1e-8,
            imag_tol: 1e-6,
            neg_tol: 1e-6,
            simplex_tol: 1e-6,
            dedup_tol: crate::solution::DEDUP_TOL,
            dense_cap: 50_000_000,
            shift_variable: 0,
            extra_rows: crate::macaulay::EXTRA_SELECTOR_ROWS,
        }
    }
}

/// Orthonormal null-space basis and the singular spectrum it came from.
pub struct NullSpace {
    pub basis: Mat<f64>,
    pub singular_values: Vec<f64>,
}

impl NullSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

pub fn null_space_dense(m: &MacaulayMatrix, rank_tol: f64, dense_cap: usize) -> Result<NullSpace> {
    let entries = m.n_rows().saturating_mul(m.n_cols());
    if entries > dense_cap {
        return Err(Error::DenseBudget { entries: entries as u128, cap: dense_cap as u128 });
    }
    let dense = linalg::from_row_major(m.n_rows(), m.n_cols(), &m.to_dense());
    let (basis, singular_values) = linalg::null_space(dense.as_ref(), rank_tol)?;
    Ok(NullSpace {
        basis,
        singular_values,
    })
}

/// Rows `idx` of `z`.
pub fn select_rows(z: MatRef<'_, f64>, idx: &[usize]) -> Mat<f64> {
    Mat::from_fn(idx.len(), z.ncols(), |i, j| z[(idx[i], j)])
}

/// Selector rows and the two projected blocks `S_1 Z` and `S_vl Z`.
pub struct ShiftBlocks {
    pub selectors: ShiftSelectors,
    pub s1z: Mat<f64>,
    pub svz: Mat<f64>,
}

/// Builds selectors with `null_dim + extra_rows` rows and doubles the count
/// until `S_1 Z` has full column rank or every eligible monomial is used.
pub fn shift_blocks(
    z: MatRef<'_, f64>,
    ordering: &crate::polynomial::MonomialOrdering,
    variable: usize,
    extra_rows: usize,
    rank_tol: f64,
) -> Result<ShiftBlocks> {
    let d = z.ncols();
    let eligible = eligible_selector_count(ordering);
    if eligible < d {
        return Err(Error::NotEnoughSelectors { eligible, needed: d });
    }
    let mut count = (d + extra_rows).min(eligible);
    loop {
        let selectors = selectors_with_count(ordering, count, variable)?;
        let s1z = select_rows(z, &selectors.s1);
        let r = linalg::rank(s1z.as_ref(), rank_tol)?;
        if r == d {
            let svz = select_rows(z, &selectors.svl);
            return Ok(ShiftBlocks { selectors, s1z, svz });
        }
        if count == eligible {
            return Err(Error::RankDeficient { rank: r, dim: d });
        }
        count = (2 * count).min(eligible);
    }
}

/// Eigenpairs of `pinv(S_1 Z) (S_vl Z)`.
pub fn solve_gevp(svz: MatRef<'_, f64>, s1z: MatRef<'_, f64>, rank_tol: f64) -> Result<linalg::Eigen> {
    let d = s1z.ncols();
    let (q, r) = linalg::pinv(s1z, rank_tol)?;
    if r < d {
        return Err(Error::RankDeficient { rank: r, dim: d });
    }
    linalg::eigen((&q * svz).as_ref())
}

/// Counters for candidates dropped at each filter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rejections {
    pub small_first_entry: usize,
    pub complex: usize,
    pub negative: usize,
    pub residual: usize,
    pub off_simplex: usize,
    pub duplicate: usize,
}

/// Maps each eigenvector through `Z`, normalizes by the constant entry and
/// keeps real, nonnegative, small-residual, simplex-valid, new roots.
pub fn extract_solutions(
    z: MatRef<'_, f64>,
    eig: &linalg::Eigen,
    system: &PolynomialSystem,
    game: &Game,
    tol: &ExactTolerances,
) -> Result<(SolutionSet, Rejections)> {
    let n_v = system.n_v();
    let mut set = SolutionSet::new(tol.dedup_tol);
    let mut rej = Rejections::default();
    for k in 0..eig.values.len() {
        // Only the first 1 + n_v entries of psi = Z w are needed.
        let psi: Vec<c64> = (0..=n_v)
            .map(|i| {
                (0..z.ncols()).fold(c64::new(0.0, 0.0), |acc, j| acc + eig.vectors[(j, k)] * z[(i, j)])
            })
            .collect();
        if psi[0].norm() < tol.first_entry_tol {
            rej.small_first_entry += 1;
            continue;
        }
        let scaled: Vec<c64> = psi.iter().map(|p| p / psi[0]).collect();
        let re_max = scaled[1..].iter().map(|p| p.re.abs()).fold(1.0, f64::max);
        if scaled[1..].iter().any(|p| p.im.abs() > tol.imag_tol * re_max) {
            rej.complex += 1;
            continue;
        }
        let v: Vec<f64> = scaled[1..].iter().map(|p| p.re).collect();
        let Some(sol) = accept_candidate(&v, system, game, tol, &mut rej, SolutionSource::Exact {
            eigenvalue: eig.values[k].re,
        })?
        else {
            continue;
        };
        if !set.insert(sol) {
            rej.duplicate += 1;
        }
    }
    set.sort();
    Ok((set, rej))
}

fn accept_candidate(
    v: &[f64],
    system: &PolynomialSystem,
    game: &Game,
    tol: &ExactTolerances,
    rej: &mut Rejections,
    source: SolutionSource,
) -> Result<Option<Solution>> {
    let profile = match recover_strategy_with_tol(v, system, tol.neg_tol) {
        Ok(p) => p,
        Err(Error::NegativeVariable { .. }) => {
            rej.negative += 1;
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let residual = linalg::norm2(&system_residual(system, v)?);
    if !(residual < tol.residual_tol) {
        rej.residual += 1;
        return Ok(None);
    }
    if profile.validate(game, tol.simplex_tol).is_err() {
        rej.off_simplex += 1;
        return Ok(None);
    }
    let deviation = simplex_deviation(&profile);
    Ok(Some(Solution::evaluate(
        game,
        system.params(),
        profile,
        v.to_vec(),
        residual,
        deviation,
        source,
    )?))
}

pub(crate) fn simplex_deviation(profile: &StrategyProfile) -> f64 {
    profile
        .strategies()
        .iter()
        .map(|s| (s.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Sizes and intermediate quantities of a dense solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDiagnostics {
    pub n_rows: usize,
    pub n_cols: usize,
    pub degree: u32,
    pub null_dim: usize,
    pub selector_rows: usize,
    /// `(re, im)` of every shift eigenvalue.
    pub eigenvalues: Vec<(f64, f64)>,
    pub rejections: Rejections,
    pub warnings: Vec<String>,
}

pub fn solve_exact(game: &Game, params: &TsallisParams, tol: &ExactTolerances) -> Result<SolutionSet> {
    Ok(solve_exact_with_diagnostics(game, params, tol)?.0)
}

pub fn solve_exact_with_diagnostics(
    game: &Game,
    params: &TsallisParams,
    tol: &ExactTolerances,
) -> Result<(SolutionSet, ExactDiagnostics)> {
    let system = build_ne_mvp(game, params)?;
    // Refuse before building anything the dense path could not factor.
    let (rows, cols) = count_rows_cols(&system)?;
    let entries = rows.saturating_mul(cols);
    if entries > tol.dense_cap as u128 {
        return Err(Error::DenseBudget {
            entries,
            cap: tol.dense_cap as u128,
        });
    }
    let m = build_macaulay(&system)?;
    let ns = null_space_dense(&m, tol.rank_tol, tol.dense_cap)?;
    let mut diag = ExactDiagnostics {
        n_rows: m.n_rows(),
        n_cols: m.n_cols(),
        degree: m.degree(),
        null_dim: ns.dim(),
        selector_rows: 0,
        eigenvalues: Vec::new(),
        rejections: Rejections::default(),
        warnings: system.warnings().to_vec(),
    };
    if ns.dim() == 0 {
        return Ok((SolutionSet::new(tol.dedup_tol), diag));
    }
    let blocks = shift_blocks(ns.basis.as_ref(), m.ordering(), tol.shift_variable, tol.extra_rows, tol.rank_tol)?;
    diag.selector_rows = blocks.selectors.len();
    let eig = solve_gevp(blocks.svz.as_ref(), blocks.s1z.as_ref(), tol.rank_tol)?;
    diag.eigenvalues = eig.values.iter().map(|c| (c.re, c.im)).collect();
    let (set, rej) = extract_solutions(ns.basis.as_ref(), &eig, &system, game, tol)?;
    diag.rejections = rej;
    Ok((set, diag))
}
