//! Mini-batch subspace iteration: top singular pairs, the null space through
//! the shifted Gram operator, and pseudoinverses built from either.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::StageConfig;
use crate::error::{Error, Result};
use crate::linalg;
use crate::macaulay::MacaulayMatrix;

/// Matrix accessed one row at a time.
pub trait RowOperator {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// Accumulates `scale * sum_r a_r (a_r^T X)` into `out`; blocks are
    /// `n_cols x k` row-major.
    fn gram_rows(&self, rows: &mut dyn Iterator<Item = usize>, x: &[f64], k: usize, scale: f64, out: &mut [f64]);
    /// `A X`, `n_rows x k` row-major.
    fn mul_block(&self, x: &[f64], k: usize) -> Vec<f64>;
}

impl RowOperator for MacaulayMatrix {
    fn n_rows(&self) -> usize {
        MacaulayMatrix::n_rows(self)
    }

    fn n_cols(&self) -> usize {
        MacaulayMatrix::n_cols(self)
    }

    fn gram_rows(&self, rows: &mut dyn Iterator<Item = usize>, x: &[f64], k: usize, scale: f64, out: &mut [f64]) {
        self.gram_block_into(rows, x, k, scale, out)
    }

    fn mul_block(&self, x: &[f64], k: usize) -> Vec<f64> {
        MacaulayMatrix::mul_block(self, x, k)
    }
}

/// Dense row-major matrix.
pub struct DenseRows<'a> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

impl RowOperator for DenseRows<'_> {
    fn n_rows(&self) -> usize {
        self.rows
    }

    fn n_cols(&self) -> usize {
        self.cols
    }

    fn gram_rows(&self, rows: &mut dyn Iterator<Item = usize>, x: &[f64], k: usize, scale: f64, out: &mut [f64]) {
        let mut proj = vec![0.0; k];
        for r in rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            proj.iter_mut().for_each(|p| *p = 0.0);
            for (c, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    for (p, xv) in proj.iter_mut().zip(&x[c * k..(c + 1) * k]) {
                        *p += a * xv;
                    }
                }
            }
            for (c, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    let w = scale * a;
                    for (o, p) in out[c * k..(c + 1) * k].iter_mut().zip(&proj) {
                        *o += w * p;
                    }
                }
            }
        }
    }

    fn mul_block(&self, x: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * k];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let o = &mut out[r * k..(r + 1) * k];
            for (c, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    for (ov, xv) in o.iter_mut().zip(&x[c * k..(c + 1) * k]) {
                        *ov += a * xv;
                    }
                }
            }
        }
        out
    }
}

/// Unbiased mini-batch estimate of `A^T A X`: rows drawn uniformly with
/// replacement and scaled by `n / b`. A batch at least as large as the row
/// count uses every row once.
fn sampled_gram(op: &dyn RowOperator, x: &[f64], k: usize, batch: usize, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let n = op.n_rows();
    if batch >= n {
        op.gram_rows(&mut (0..n), x, k, 1.0, out);
    } else {
        let rows: Vec<usize> = (0..batch).map(|_| rng.random_range(0..n)).collect();
        op.gram_rows(&mut rows.into_iter(), x, k, n as f64 / batch as f64, out);
    }
}

fn random_block(rows: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..rows * k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn to_mat(x: &[f64], rows: usize, k: usize) -> Mat<f64> {
    linalg::from_row_major(rows, k, x)
}

fn normalize_columns(x: &mut [f64], k: usize) {
    let mut norms = vec![0.0; k];
    for row in x.chunks_exact(k) {
        for (n, v) in norms.iter_mut().zip(row) {
            *n += v * v;
        }
    }
    norms.iter_mut().for_each(|n| *n = 1.0 / n.sqrt().max(f64::MIN_POSITIVE));
    for row in x.chunks_exact_mut(k) {
        for (v, n) in row.iter_mut().zip(&norms) {
            *v *= n;
        }
    }
}

fn orthonormalize(x: &[f64], rows: usize, k: usize) -> Vec<f64> {
    linalg::to_row_major(linalg::orthonormalize(to_mat(x, rows, k).as_ref()).as_ref())
}

/// Gram matrix `(A X)^T (A X)` from a full pass.
fn full_gram(op: &dyn RowOperator, x: &[f64], k: usize) -> Mat<f64> {
    let y = op.mul_block(x, k);
    let mut g = Mat::<f64>::zeros(k, k);
    for row in y.chunks_exact(k) {
        for i in 0..k {
            for j in i..k {
                g[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    g
}

/// Rotates `x` by `rot` (`k x k`) in place.
fn rotate(x: &mut [f64], k: usize, rot: &Mat<f64>) {
    let mut tmp = vec![0.0; k];
    for row in x.chunks_exact_mut(k) {
        for (j, t) in tmp.iter_mut().enumerate() {
            *t = (0..k).map(|i| row[i] * rot[(i, j)]).sum();
        }
        row.copy_from_slice(&tmp);
    }
}

/// Estimated top right singular vectors and values.
#[derive(Debug, Clone)]
pub struct TopK {
    /// `n_cols x k`, orthonormal columns, singular values nonincreasing.
    pub vectors: Mat<f64>,
    pub values: Vec<f64>,
    pub converged: bool,
    pub steps: usize,
}

/// Mini-batch subspace iteration `X <- orth(X + eta * A_B^T A_B X)`. Every
/// `skip` steps a full pass computes Ritz values; the run stops once they
/// change by less than `norm_tol` (relative) or after `iters` steps. With
/// `k = 1` the iterate is averaged over the second half of the run, which
/// removes most of the sampling noise.
pub fn stochastic_topk_svd(op: &dyn RowOperator, k: usize, cfg: &StageConfig, seed: u64) -> Result<TopK> {
    cfg.validate("top-k")?;
    let n = op.n_cols();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = orthonormalize(&random_block(n, k, &mut rng), n, k);
    let mut ax = vec![0.0; n * k];
    let mut avg = vec![0.0; n];
    let tail_start = cfg.iters / 2;
    let mut last: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut steps = 0;
    for t in 0..cfg.iters {
        sampled_gram(op, &x, k, cfg.batch_size, &mut rng, &mut ax);
        for (xv, a) in x.iter_mut().zip(&ax) {
            *xv += cfg.eta * a;
        }
        if k == 1 {
            normalize_columns(&mut x, 1);
            if t >= tail_start {
                let sign = if avg.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
                avg.iter_mut().zip(&x).for_each(|(a, b)| *a += sign * b);
            }
        } else {
            x = orthonormalize(&x, n, k);
        }
        steps = t + 1;
        if cfg.norm_tol > 0.0 && steps % cfg.skip == 0 {
            let vals = ritz_values(op, &x, k)?;
            if let Some(prev) = &last {
                let change = vals
                    .iter()
                    .zip(prev)
                    .map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE))
                    .fold(0.0, f64::max);
                if change < cfg.norm_tol {
                    converged = true;
                    break;
                }
            }
            last = Some(vals);
        }
    }
    if k == 1 && steps > tail_start && avg.iter().any(|a| *a != 0.0) && !converged {
        x = avg;
        normalize_columns(&mut x, 1);
    }
    // Final Rayleigh-Ritz rotation with a full pass.
    let g = full_gram(op, &x, k);
    let (vals, vecs) = linalg::symmetric_eigen(g.as_ref())?;
    let order: Vec<usize> = (0..k).rev().collect();
    let rot = Mat::from_fn(k, k, |i, j| vecs[(i, order[j])]);
    rotate(&mut x, k, &rot);
    let values = order.iter().map(|&i| vals[i].max(0.0).sqrt()).collect();
    Ok(TopK {
        vectors: to_mat(&x, n, k),
        values,
        converged: converged || cfg.norm_tol == 0.0,
        steps,
    })
}

fn ritz_values(op: &dyn RowOperator, x: &[f64], k: usize) -> Result<Vec<f64>> {
    let g = full_gram(op, x, k);
    let (vals, _) = linalg::symmetric_eigen(g.as_ref())?;
    Ok(vals)
}

/// One pass of the null-space search at a fixed subspace size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullStageLog {
    pub k: usize,
    pub steps: usize,
    /// Vectors with residual energy `||M z||^2 <= eigenvalue_tolerance`.
    pub count: usize,
    /// Smallest residual energy outside the counted set, if any.
    pub next_residual: Option<f64>,
    pub outcome: NullStageOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullStageOutcome {
    /// Every vector was null; `k` doubled.
    Doubled,
    /// Count and the next residual stabilized.
    Settled,
    /// Ran out of iterations.
    Exhausted,
}

/// Stochastic null-space estimate.
#[derive(Debug, Clone)]
pub struct StochasticNullSpace {
    pub basis: Mat<f64>,
    pub sigma_max_sq: f64,
    pub lambda_star: f64,
    pub converged: bool,
    pub stages: Vec<NullStageLog>,
}

/// Top eigenvectors of `lambda* I - M^T M` with `lambda* = 1.1 sigma_max^2`
/// are the null vectors of `M`. The subspace size doubles (1, 2, 4, ...),
/// warm-started from the previous vectors, until some returned vector has a
/// nonzero residual energy and the count of null vectors stops changing.
pub fn null_space_stochastic(
    op: &dyn RowOperator,
    sigma_cfg: &StageConfig,
    cfg: &StageConfig,
    seed: u64,
) -> Result<StochasticNullSpace> {
    cfg.validate("null_space")?;
    let n = op.n_cols();
    let top = stochastic_topk_svd(op, 1, sigma_cfg, crate::game::derive_seed(seed, 0))?;
    let sigma_max_sq = top.values[0] * top.values[0];
    if !(sigma_max_sq > 0.0) {
        // The zero matrix: everything is null.
        return Ok(StochasticNullSpace {
            basis: Mat::identity(n, n),
            sigma_max_sq,
            lambda_star: 0.0,
            converged: true,
            stages: Vec::new(),
        });
    }
    let lambda_star = 1.1 * sigma_max_sq;
    let tol = cfg.eigenvalue_tolerance.unwrap_or(1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(crate::game::derive_seed(seed, 1));

    let mut k = cfg.k.unwrap_or(1).clamp(1, n);
    let mut x = orthonormalize(&random_block(n, k, &mut rng), n, k);
    let mut stages = Vec::new();
    let mut ax = vec![0.0; n * k];
    loop {
        let mut prev: Option<(usize, f64)> = None;
        let mut outcome = NullStageOutcome::Exhausted;
        let mut count = 0;
        let mut next_residual = None;
        let mut steps = 0;
        for t in 0..cfg.iters {
            sampled_gram(op, &x, k, cfg.batch_size, &mut rng, &mut ax);
            let scale = cfg.eta / lambda_star;
            for (xv, a) in x.iter_mut().zip(&ax) {
                *xv += cfg.eta * *xv - scale * a;
            }
            normalize_columns(&mut x, k);
            steps = t + 1;
            if steps % cfg.skip != 0 && steps != cfg.iters {
                continue;
            }
            // Rayleigh-Ritz on the current block.
            x = orthonormalize(&x, n, k);
            let g = full_gram(op, &x, k);
            let (vals, vecs) = linalg::symmetric_eigen(g.as_ref())?;
            // Ascending ||Mz||^2 is descending lambda* - ||Mz||^2.
            rotate(&mut x, k, &vecs);
            count = vals.iter().filter(|&&r| r <= tol).count();
            next_residual = vals.get(count).copied();
            if count == k {
                outcome = NullStageOutcome::Doubled;
                break;
            }
            let r = next_residual.expect("count < k");
            if let Some((c_prev, r_prev)) = prev {
                if c_prev == count && (r - r_prev).abs() <= 1e-2 * r {
                    outcome = NullStageOutcome::Settled;
                    break;
                }
            }
            prev = Some((count, r));
        }
        stages.push(NullStageLog {
            k,
            steps,
            count,
            next_residual,
            outcome,
        });
        match outcome {
            NullStageOutcome::Doubled if k < n => {
                let extra = k.min(n - k);
                let mut wide = vec![0.0; n * (k + extra)];
                let fresh = random_block(n, extra, &mut rng);
                for i in 0..n {
                    wide[i * (k + extra)..i * (k + extra) + k].copy_from_slice(&x[i * k..(i + 1) * k]);
                    wide[i * (k + extra) + k..(i + 1) * (k + extra)].copy_from_slice(&fresh[i * extra..(i + 1) * extra]);
                }
                k += extra;
                x = orthonormalize(&wide, n, k);
                ax = vec![0.0; n * k];
            }
            _ => {
                let xm = to_mat(&x, n, k);
                let basis = xm.subcols(0, count).to_owned();
                return Ok(StochasticNullSpace {
                    basis,
                    sigma_max_sq,
                    lambda_star,
                    converged: outcome != NullStageOutcome::Exhausted,
                    stages,
                });
            }
        }
    }
}

/// Pseudoinverse of a dense matrix: dense SVD when both sides are at most
/// `dense_max`, otherwise a stochastic top-`rank` SVD. Returns the matrix
/// and the number of singular values kept.
pub fn pseudoinverse_svd(
    a: &Mat<f64>,
    cfg: &StageConfig,
    dense_max: usize,
    rel_cutoff: f64,
    seed: u64,
) -> Result<(Mat<f64>, usize)> {
    if a.nrows() <= dense_max && a.ncols() <= dense_max {
        return linalg::pinv(a.as_ref(), rel_cutoff);
    }
    let data = linalg::to_row_major(a.as_ref());
    let op = DenseRows {
        rows: a.nrows(),
        cols: a.ncols(),
        data: &data,
    };
    let k = cfg.k.unwrap_or(a.nrows().min(a.ncols())).min(a.ncols());
    let top = stochastic_topk_svd(&op, k, cfg, seed)?;
    let smax = top.values.first().copied().unwrap_or(0.0);
    if !(smax > 0.0) {
        return Err(Error::ZeroPseudoinverse);
    }
    // A = U S V^T with U = A V / S.
    let av = a * &top.vectors;
    let mut out = Mat::<f64>::zeros(a.ncols(), a.nrows());
    let mut kept = 0;
    for (j, &s) in top.values.iter().enumerate() {
        if s <= rel_cutoff * smax {
            continue;
        }
        kept += 1;
        let inv2 = 1.0 / (s * s);
        for i in 0..a.ncols() {
            let vij = top.vectors[(i, j)] * inv2;
            for r in 0..a.nrows() {
                out[(i, r)] += vij * av[(r, j)];
            }
        }
    }
    Ok((out, kept))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: usize, cols: usize, data: &[f64]) -> DenseRows<'_> {
        DenseRows { rows, cols, data }
    }

    fn full_cfg(iters: usize) -> StageConfig {
        StageConfig {
            k: None,
            iters,
            eta: 1.0,
            batch_size: usize::MAX,
            norm_tol: 0.0,
            skip: 50,
            eigenvalue_tolerance: Some(1e-10),
        }
    }

    #[test]
    fn diagonal_top_one() {
        let d = [3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0];
        let top = stochastic_topk_svd(&dense(3, 3, &d), 1, &full_cfg(200), 1).unwrap();
        assert!((top.values[0] - 3.0).abs() < 1e-6);
        assert!((top.vectors[(0, 0)].abs() - 1.0).abs() < 1e-6);
        let top2 = stochastic_topk_svd(&dense(3, 3, &d), 2, &full_cfg(200), 1).unwrap();
        assert!((top2.values[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn rank_one_direction() {
        let u = [1.0, 2.0];
        let w = [0.6, 0.8, 0.0];
        let data: Vec<f64> = u.iter().flat_map(|a| w.iter().map(move |b| a * b)).collect();
        let top = stochastic_topk_svd(&dense(2, 3, &data), 1, &full_cfg(100), 3).unwrap();
        let dot: f64 = (0..3).map(|i| top.vectors[(i, 0)] * w[i]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn null_space_of_ones() {
        let data = [1.0, 1.0, 1.0, 1.0];
        let sigma = full_cfg(200);
        let mut cfg = full_cfg(20_000);
        cfg.eta = 0.5;
        let ns = null_space_stochastic(&dense(2, 2, &data), &sigma, &cfg, 5).unwrap();
        assert_eq!(ns.basis.ncols(), 1);
        let z = (ns.basis[(0, 0)], ns.basis[(1, 0)]);
        assert!((z.0 + z.1).abs() < 1e-4);
        assert!((z.0.abs() - 0.5f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn full_rank_has_no_null_vectors() {
        let data = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let ns = null_space_stochastic(&dense(3, 3, &data), &full_cfg(300), &full_cfg(20_000), 2).unwrap();
        assert_eq!(ns.basis.ncols(), 0);
        assert!(ns.converged);
    }

    #[test]
    fn stochastic_pseudoinverse_matches_dense() {
        let a = linalg::from_row_major(3, 2, &[2.0, 0.0, 0.0, 4.0, 0.0, 0.0]);
        let mut cfg = full_cfg(500);
        cfg.k = Some(2);
        let (p, kept) = pseudoinverse_svd(&a, &cfg, 1, 1e-10, 4).unwrap();
        assert_eq!(kept, 2);
        assert!((p[(0, 0)] - 0.5).abs() < 1e-8 && (p[(1, 1)] - 0.25).abs() < 1e-8);
        let (d, _) = pseudoinverse_svd(&a, &cfg, 8, 1e-10, 4).unwrap();
        assert!((&p - &d).norm_l2() < 1e-8);
    }
}
