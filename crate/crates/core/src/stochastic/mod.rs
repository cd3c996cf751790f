//! Iterative solver: the Macaulay null space from mini-batch subspace
//! iteration, then a scan of shifted inverse power iterations over a grid of
//! candidate eigenvalues.

pub mod config;
pub mod topk;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use config::{ConfigFile, SolverConfig, StageConfig};
pub use topk::{null_space_stochastic, pseudoinverse_svd, stochastic_topk_svd, NullStageLog, RowOperator, StochasticNullSpace};

use crate::error::{Error, Result};
use crate::exact::{select_rows, simplex_deviation};
use crate::game::{derive_seed, Game, StrategyProfile};
use crate::linalg;
use crate::macaulay::{build_macaulay, eligible_selector_count, selectors_with_count};
use crate::mvp::{build_ne_mvp, recover_strategy_with_tol, system_residual, PolynomialSystem};
use crate::regularization::TsallisParams;
use crate::solution::{Solution, SolutionSet, SolutionSource};

/// What happened at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaOutcome {
    Accepted,
    Duplicate,
    NotConverged,
    SmallFirstEntry,
    Negative,
    OffSimplex,
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaLog {
    pub index: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub outcome: LambdaOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticDiagnostics {
    pub n_rows: usize,
    pub n_cols: usize,
    pub degree: u32,
    pub null_dim: usize,
    pub sigma_max_sq: f64,
    pub lambda_star: f64,
    pub null_space_converged: bool,
    pub null_stages: Vec<NullStageLog>,
    pub selector_rows: usize,
    /// Rank kept by the pseudoinverse of `S_1 Z`.
    pub shift_rank: usize,
    pub lambdas: Vec<LambdaLog>,
    pub warnings: Vec<String>,
}

pub fn solve_stochastic(game: &Game, params: &TsallisParams, cfg: &SolverConfig) -> Result<SolutionSet> {
    Ok(solve_stochastic_with_diagnostics(game, params, cfg)?.0)
}

/// Always returns a (possibly empty) solution set; errors are reserved for
/// invalid input and caps.
pub fn solve_stochastic_with_diagnostics(
    game: &Game,
    params: &TsallisParams,
    cfg: &SolverConfig,
) -> Result<(SolutionSet, StochasticDiagnostics)> {
    cfg.validate()?;
    let system = build_ne_mvp(game, params)?;
    let m = build_macaulay(&system)?;
    let ns = null_space_stochastic(&m, &cfg.sigma_max, &cfg.null_space, derive_seed(cfg.seed, 0))?;
    let mut diag = StochasticDiagnostics {
        n_rows: m.n_rows(),
        n_cols: m.n_cols(),
        degree: m.degree(),
        null_dim: ns.basis.ncols(),
        sigma_max_sq: ns.sigma_max_sq,
        lambda_star: ns.lambda_star,
        null_space_converged: ns.converged,
        null_stages: ns.stages.clone(),
        selector_rows: 0,
        shift_rank: 0,
        lambdas: Vec::new(),
        warnings: system.warnings().to_vec(),
    };
    let mut set = SolutionSet::new(cfg.dedup_tol);
    if !ns.converged {
        diag.warnings.push("null-space iteration hit its cap".into());
    }
    let d = ns.basis.ncols();
    if d == 0 {
        diag.warnings.push("empty null space".into());
        return Ok((set, diag));
    }
    let z = ns.basis.as_ref();

    // Every eligible monomial: the extra rows average out noise in Z.
    let eligible = eligible_selector_count(m.ordering());
    if eligible < d {
        diag.warnings.push(format!("{eligible} selector rows for a {d}-dimensional null space"));
        return Ok((set, diag));
    }
    let selectors = selectors_with_count(m.ordering(), eligible, cfg.shift_variable)?;
    diag.selector_rows = selectors.len();
    let s1z = select_rows(z, &selectors.s1);
    let svz = select_rows(z, &selectors.svl);
    let (q, rank) = match pseudoinverse_svd(
        &s1z,
        &cfg.pinv_shift_1_z,
        cfg.dense_pinv_max,
        cfg.pinv_cutoff,
        derive_seed(cfg.seed, 1),
    ) {
        Ok(r) => r,
        Err(Error::ZeroPseudoinverse) => {
            diag.warnings.push("S_1 Z is zero".into());
            return Ok((set, diag));
        }
        Err(e) => return Err(e),
    };
    diag.shift_rank = rank;
    if rank < d {
        diag.warnings.push(format!("S_1 Z has rank {rank} < {d}"));
    }
    let t = &q * &svz;

    let tinv = f64::from(params.tau_inv);
    for j in 0..cfg.num_lams {
        let x = j as f64 / (cfg.num_lams - 1) as f64;
        let lambda = x.powf(1.0 / tinv);
        let (outcome, iterations) =
            scan_point(&t, z, lambda, j, &system, game, cfg, &mut set)?;
        diag.lambdas.push(LambdaLog {
            index: j,
            lambda,
            iterations,
            outcome,
        });
    }
    set.sort();
    Ok((set, diag))
}

#[allow(clippy::too_many_arguments)]
fn scan_point(
    t: &Mat<f64>,
    z: faer::MatRef<'_, f64>,
    lambda: f64,
    index: usize,
    system: &PolynomialSystem,
    game: &Game,
    cfg: &SolverConfig,
    set: &mut SolutionSet,
) -> Result<(LambdaOutcome, usize)> {
    let d = t.nrows();
    let shifted = Mat::from_fn(d, d, |i, j| t[(i, j)] - if i == j { lambda } else { 0.0 });
    let seed = derive_seed(cfg.seed, 2 + index as u64);
    let r = match pseudoinverse_svd(&shifted, &cfg.pinv_mat_lam, cfg.dense_pinv_max, cfg.pinv_cutoff, seed) {
        Ok((r, _)) => r,
        Err(Error::ZeroPseudoinverse) => return Ok((LambdaOutcome::NotConverged, 0)),
        Err(e) => return Err(e),
    };
    let (w, iterations, converged) = inverse_power_iterate(&r, &cfg.maxv, seed);
    if !converged {
        return Ok((LambdaOutcome::NotConverged, iterations));
    }
    let n_v = system.n_v();
    let psi: Vec<f64> = (0..=n_v)
        .map(|i| (0..d).map(|j| z[(i, j)] * w[j]).sum())
        .collect();
    if psi[0].abs() < 1e-8 {
        return Ok((LambdaOutcome::SmallFirstEntry, iterations));
    }
    let v: Vec<f64> = psi[1..].iter().map(|p| p / psi[0]).collect();
    let raw = match recover_strategy_with_tol(&v, system, cfg.neg_tol) {
        Ok(p) => p,
        Err(Error::NegativeVariable { .. }) => return Ok((LambdaOutcome::Negative, iterations)),
        Err(e) => return Err(e),
    };
    let deviation = simplex_deviation(&raw);
    if deviation > cfg.sum_to_1_tol {
        return Ok((LambdaOutcome::OffSimplex, iterations));
    }
    let residual = linalg::norm2(&system_residual(system, &v)?);
    if !(residual <= cfg.residual_tol) {
        return Ok((LambdaOutcome::Residual, iterations));
    }
    let profile = renormalize(raw);
    if set.contains(&profile) {
        return Ok((LambdaOutcome::Duplicate, iterations));
    }
    let sol = Solution::evaluate(
        game,
        system.params(),
        profile,
        v,
        residual,
        deviation,
        SolutionSource::Lambda { lambda, index },
    )?;
    set.insert(sol);
    Ok((LambdaOutcome::Accepted, iterations))
}

fn renormalize(profile: StrategyProfile) -> StrategyProfile {
    StrategyProfile::new(
        profile
            .into_strategies()
            .into_iter()
            .map(|s| {
                let total: f64 = s.iter().sum();
                s.into_iter().map(|x| x / total).collect()
            })
            .collect(),
    )
}

/// Power iteration `w <- R w / ||R w||` from a random unit start. Every
/// `skip` steps the iterate is compared, up to sign, with the one `skip`
/// steps earlier. Returns `(w, steps, converged)`.
pub fn inverse_power_iterate(r: &Mat<f64>, cfg: &StageConfig, seed: u64) -> (Vec<f64>, usize, bool) {
    let d = r.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut w);
    let mut anchor = w.clone();
    for step in 1..=cfg.iters {
        let mut next: Vec<f64> = (0..d).map(|i| (0..d).map(|j| r[(i, j)] * w[j]).sum()).collect();
        if normalize(&mut next) == 0.0 {
            return (next, step, false);
        }
        w = next;
        if step % cfg.skip == 0 {
            let (mut plus, mut minus) = (0.0, 0.0);
            for (a, b) in w.iter().zip(&anchor) {
                plus += (a + b) * (a + b);
                minus += (a - b) * (a - b);
            }
            if plus.min(minus).sqrt() < cfg.norm_tol {
                return (w, step, true);
            }
            anchor.clone_from(&w);
        }
    }
    (w, cfg.iters, false)
}

fn normalize(w: &mut [f64]) -> f64 {
    let n = linalg::norm2(w);
    if n > 0.0 {
        w.iter_mut().for_each(|x| *x /= n);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_finds_dominant_vector() {
        let r = linalg::from_row_major(2, 2, &[5.0, 0.0, 0.0, 1.0]);
        let mut cfg = SolverConfig::full_batch().maxv;
        cfg.norm_tol = 1e-10;
        let (w, _, ok) = inverse_power_iterate(&r, &cfg, 9);
        assert!(ok);
        assert!((w[0].abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn renormalize_sums_to_one() {
        let p = renormalize(StrategyProfile::new(vec![vec![0.2, 0.3], vec![1.0, 1.0]]));
        assert!((p.player(0)[0] - 0.4).abs() < 1e-12);
        assert_eq!(p.player(1), &[0.5, 0.5]);
    }
}
