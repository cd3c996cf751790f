//! Two-player games at `tau = 1`: the equilibrium conditions are linear, so
//! a single minimum-norm least-squares solve gives the profile directly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{derive_seed, random_game, Game, StrategyProfile};
use crate::linalg;
use crate::mvp::build_ne_mvp;
use crate::regularization::{exploitability, TsallisParams};

/// Relative singular-value cutoff of the least-squares solve.
pub const LS_RANK_CUTOFF: f64 = 1e-10;
/// Negative entries above this are rounding noise and become zero.
pub const LS_CLAMP: f64 = 1e-9;
/// Simplex tolerance for a valid solution.
pub const LS_VALID_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsResult {
    /// Solution of the linear system after clamping, grouped by player. Only
    /// a strategy profile when `valid`.
    pub profile: StrategyProfile,
    /// `||A v - b||`.
    pub residual_norm: f64,
    pub valid: bool,
    /// Exploitability in the original game; `None` when invalid.
    pub eps_ls: Option<f64>,
    /// Exploitability of the uniform profile.
    pub eps_uniform: f64,
}

pub fn solve_least_squares_2p(game: &Game, gamma_tilde: f64) -> Result<LsResult> {
    if game.num_players() != 2 {
        return Err(Error::InvalidArgument(format!(
            "least squares needs 2 players, got {}",
            game.num_players()
        )));
    }
    let params = TsallisParams::new(1, gamma_tilde)?;
    let system = build_ne_mvp(game, &params)?;
    let (rows, rhs) = system.as_linear_system()?;
    let n_v = system.n_v();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let a = linalg::from_row_major(rows.len(), n_v, &flat);
    let v: Vec<f64> = match linalg::pinv(a.as_ref(), LS_RANK_CUTOFF) {
        Ok((p, _)) => (0..n_v)
            .map(|i| (0..rhs.len()).map(|r| p[(i, r)] * rhs[r]).sum())
            .collect(),
        Err(Error::ZeroPseudoinverse) => vec![0.0; n_v],
        Err(e) => return Err(e),
    };
    let residual: Vec<f64> = rows
        .iter()
        .zip(&rhs)
        .map(|(row, b)| row.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() - b)
        .collect();
    let residual_norm = linalg::norm2(&residual);

    let clamped: Vec<f64> = v.iter().map(|&x| if x < 0.0 && x > -LS_CLAMP { 0.0 } else { x }).collect();
    let profile = StrategyProfile::from_flat(game.action_counts(), &clamped)?;
    let valid = profile.validate(game, LS_VALID_TOL).is_ok();
    let eps_ls = if valid { Some(exploitability(game, &profile)?.max) } else { None };
    let eps_uniform = exploitability(game, &StrategyProfile::uniform(game))?.max;
    Ok(LsResult {
        profile,
        residual_norm,
        valid,
        eps_ls,
        eps_uniform,
    })
}

/// One game of a batch run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsTrial {
    pub game_index: usize,
    pub seed: u64,
    pub valid: bool,
    pub residual: f64,
    pub eps_ls: Option<f64>,
    pub eps_uniform: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsBatchSummary {
    pub actions_per_player: usize,
    pub gamma_tilde: f64,
    pub success_rate: f64,
    pub trials: Vec<LsTrial>,
}

impl LsBatchSummary {
    /// Exploitabilities of the valid solutions.
    pub fn exploitability_samples_ls(&self) -> Vec<f64> {
        self.trials.iter().filter_map(|t| t.eps_ls).collect()
    }

    pub fn exploitability_samples_uniform(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.eps_uniform).collect()
    }

    /// `median(uniform) / median(ls)` over valid games; larger means the
    /// solve helps more.
    pub fn median_improvement(&self) -> Option<f64> {
        let ls = median(&self.exploitability_samples_ls())?;
        let uni = median(&self.exploitability_samples_uniform())?;
        (ls > 0.0).then(|| uni / ls)
    }

    /// `game_index,seed,valid,residual,eps_ls,eps_uniform`, blank `eps_ls`
    /// for invalid games.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["game_index", "seed", "valid", "residual", "eps_ls", "eps_uniform"])?;
        for t in &self.trials {
            out.write_record([
                t.game_index.to_string(),
                t.seed.to_string(),
                t.valid.to_string(),
                t.residual.to_string(),
                t.eps_ls.map(|e| e.to_string()).unwrap_or_default(),
                t.eps_uniform.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) })
}

/// Solves `num_games` random square games (payoffs normalized into
/// `[0.001, 1]`), game `i` drawn from `derive_seed(seed, i)`. Games are split
/// across threads; the result does not depend on the split.
pub fn ls_batch_experiment(
    num_games: usize,
    actions_per_player: usize,
    gamma_tilde: f64,
    seed: u64,
) -> Result<LsBatchSummary> {
    if num_games == 0 {
        return Err(Error::InvalidArgument("num_games must be at least 1".into()));
    }
    if actions_per_player < 1 {
        return Err(Error::InvalidArgument("need at least one action".into()));
    }
    TsallisParams::new(1, gamma_tilde)?;
    let run = |i: usize| -> Result<LsTrial> {
        let game_seed = derive_seed(seed, i as u64);
        let game = random_game(&[actions_per_player, actions_per_player], game_seed)?;
        let r = solve_least_squares_2p(&game, gamma_tilde)?;
        Ok(LsTrial {
            game_index: i,
            seed: game_seed,
            valid: r.valid,
            residual: r.residual_norm,
            eps_ls: r.eps_ls,
            eps_uniform: r.eps_uniform,
        })
    };
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(num_games);
    let chunk = num_games.div_ceil(threads);
    let parts: Vec<Result<Vec<LsTrial>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let run = &run;
                s.spawn(move || (t * chunk..((t + 1) * chunk).min(num_games)).map(run).collect())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut trials = Vec::with_capacity(num_games);
    for p in parts {
        trials.extend(p?);
    }
    let success_rate = trials.iter().filter(|t| t.valid).count() as f64 / num_games as f64;
    Ok(LsBatchSummary {
        actions_per_player,
        gamma_tilde,
        success_rate,
        trials,
    })
}
