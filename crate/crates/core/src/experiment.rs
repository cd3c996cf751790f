//! Experiment drivers and their reports.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{solve_exact, ExactTolerances};
use crate::game::{builtin_game, random_game, Game, StrategyProfile};
use crate::lstsq::{ls_batch_experiment, median, LsBatchSummary};
use crate::macaulay::count_rows_cols;
use crate::mvp::build_ne_mvp;
use crate::regularization::TsallisParams;
use crate::stochastic::{solve_stochastic, SolverConfig};

pub const REPORT_FORMAT_VERSION: u32 = 1;
/// Largest JS distance at which a recovered profile counts as a match.
pub const MATCH_RADIUS: f64 = 0.1;

/// Jensen-Shannon distance with natural logarithms: the square root of the
/// divergence, so it lies in `[0, sqrt(ln 2)]`.
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("lengths {} and {} differ", p.len(), q.len())));
    }
    let kl = |a: f64, m: f64| if a > 0.0 { a * (a / m).ln() } else { 0.0 };
    let mut div = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        div += 0.5 * (kl(a, m) + kl(b, m));
    }
    Ok(div.max(0.0).sqrt())
}

/// Mean over players of the per-player JS distance.
pub fn profile_js(a: &StrategyProfile, b: &StrategyProfile) -> Result<f64> {
    if a.num_players() != b.num_players() || a.num_players() == 0 {
        return Err(Error::Shape("profiles have different player counts".into()));
    }
    let mut total = 0.0;
    for (x, y) in a.strategies().iter().zip(b.strategies()) {
        total += jensen_shannon(x, y)?;
    }
    Ok(total / a.num_players() as f64)
}

/// Greedy matching: repeatedly pairs the closest remaining (found, truth)
/// couple while it is within `radius`. Returns the matched distances.
pub fn greedy_match(found: &[StrategyProfile], truth: &[StrategyProfile], radius: f64) -> Result<Vec<f64>> {
    let mut pairs = Vec::new();
    for (i, f) in found.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            pairs.push((profile_js(f, t)?, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut used_f, mut used_t) = (vec![false; found.len()], vec![false; truth.len()]);
    let mut out = Vec::new();
    for (d, i, j) in pairs {
        if d > radius {
            break;
        }
        if !used_f[i] && !used_t[j] {
            used_f[i] = true;
            used_t[j] = true;
            out.push(d);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Game name or parameter cell.
    pub group: String,
    pub seed: u64,
    pub success: bool,
    /// Mean JS distance of matched pairs, if any matched.
    #[serde(default)]
    pub js: Option<f64>,
    #[serde(default)]
    pub found: Option<usize>,
    #[serde(default)]
    pub residual: Option<f64>,
    #[serde(default)]
    pub exploitability: Option<f64>,
    #[serde(default)]
    pub baseline_exploitability: Option<f64>,
    pub runtime_secs: f64,
}

/// `None` stands for undefined (no trials, or no trial with a JS value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub trials: usize,
    pub success_rate: Option<f64>,
    pub mean_js: Option<f64>,
    /// Sum of per-trial runtimes.
    pub runtime_secs: f64,
}

impl Aggregates {
    pub fn from_trials(trials: &[TrialRecord]) -> Self {
        let n = trials.len();
        let js: Vec<f64> = trials.iter().filter_map(|t| t.js).collect();
        Self {
            trials: n,
            success_rate: (n > 0).then(|| trials.iter().filter(|t| t.success).count() as f64 / n as f64),
            mean_js: (!js.is_empty()).then(|| js.iter().sum::<f64>() / js.len() as f64),
            runtime_secs: trials.iter().map(|t| t.runtime_secs).sum(),
        }
    }

    fn agrees_with(&self, other: &Self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        let opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => close(x, y),
            _ => false,
        };
        self.trials == other.trials
            && opt(self.success_rate, other.success_rate)
            && opt(self.mean_js, other.mean_js)
            && close(self.runtime_secs, other.runtime_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub experiment: String,
    /// Distance convention used for `js` fields.
    pub js_convention: String,
    pub config: serde_json::Value,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Aggregates,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: serde_json::Value, trials: Vec<TrialRecord>) -> Self {
        let aggregates = Aggregates::from_trials(&trials);
        Self {
            format_version: REPORT_FORMAT_VERSION,
            experiment: experiment.to_string(),
            js_convention: "Jensen-Shannon distance, natural log, mean over players".into(),
            config,
            trials,
            aggregates,
        }
    }

    /// Aggregates restricted to one group.
    pub fn group_aggregates(&self, group: &str) -> Aggregates {
        let rows: Vec<TrialRecord> = self.trials.iter().filter(|t| t.group == group).cloned().collect();
        Aggregates::from_trials(&rows)
    }

    /// Groups in first-appearance order.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.trials {
            if !out.contains(&t.group) {
                out.push(t.group.clone());
            }
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a report and checks the stored aggregates against the trials.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(s)?;
        if report.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::Report(format!("unsupported format version {}", report.format_version)));
        }
        if !report.aggregates.agrees_with(&Aggregates::from_trials(&report.trials)) {
            return Err(Error::Report("aggregates do not match the trial records".into()));
        }
        Ok(report)
    }

    pub fn write_trials_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "group",
            "seed",
            "success",
            "js",
            "found",
            "residual",
            "exploitability",
            "baseline_exploitability",
            "runtime_secs",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for t in &self.trials {
            out.write_record([
                t.group.clone(),
                t.seed.to_string(),
                t.success.to_string(),
                opt(t.js),
                t.found.map(|x| x.to_string()).unwrap_or_default(),
                opt(t.residual),
                opt(t.exploitability),
                opt(t.baseline_exploitability),
                t.runtime_secs.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Ground truth from the dense solver, then one stochastic solve per seed. A
/// trial succeeds when it returns exactly as many profiles as the ground
/// truth and each matches a distinct true profile within [`MATCH_RADIUS`].
pub fn run_recovery_experiment(
    game_name: &str,
    params: &TsallisParams,
    cfg: &SolverConfig,
    seeds: &[u64],
) -> Result<ExperimentReport> {
    let game = builtin_game(game_name)?;
    run_recovery_on(&game, game_name, params, cfg, seeds)
}

pub fn run_recovery_on(
    game: &Game,
    label: &str,
    params: &TsallisParams,
    cfg: &SolverConfig,
    seeds: &[u64],
) -> Result<ExperimentReport> {
    let config = serde_json::json!({
        "game": label,
        "tau_inv": params.tau_inv,
        "gamma_tilde": params.gamma_tilde,
        "solver": cfg,
        "seeds": seeds,
    });
    if seeds.is_empty() {
        return Ok(ExperimentReport::new("recovery", config, Vec::new()));
    }
    let truth = solve_exact(game, params, &ExactTolerances::default())?.profiles();
    let mut trials = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let start = Instant::now();
        let found = solve_stochastic(game, params, &cfg.clone().with_seed(seed))?.profiles();
        let runtime_secs = start.elapsed().as_secs_f64();
        let matched = greedy_match(&found, &truth, MATCH_RADIUS)?;
        let success = found.len() == truth.len() && matched.len() == truth.len();
        trials.push(TrialRecord {
            group: label.to_string(),
            seed,
            success,
            js: (!matched.is_empty()).then(|| matched.iter().sum::<f64>() / matched.len() as f64),
            found: Some(found.len()),
            residual: None,
            exploitability: None,
            baseline_exploitability: None,
            runtime_secs,
        });
    }
    Ok(ExperimentReport::new("recovery", config, trials))
}

/// Grid of the batch least-squares experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstsqExperimentConfig {
    pub action_counts: Vec<usize>,
    pub gamma_tildes: Vec<f64>,
    pub num_games: usize,
    pub seed: u64,
}

impl Default for LstsqExperimentConfig {
    fn default() -> Self {
        Self {
            action_counts: vec![2, 3, 5, 10],
            gamma_tildes: vec![1.0, 0.5, 0.25],
            num_games: 10_000,
            seed: 0,
        }
    }
}

/// One cell per (actions, gamma_tilde); trial groups are `m=<actions>,gt=<gamma_tilde>`.
pub fn run_lstsq_experiment(cfg: &LstsqExperimentConfig) -> Result<(ExperimentReport, Vec<LsBatchSummary>)> {
    let mut trials = Vec::new();
    let mut cells = Vec::new();
    for &m in &cfg.action_counts {
        for &gt in &cfg.gamma_tildes {
            let start = Instant::now();
            let cell = ls_batch_experiment(cfg.num_games, m, gt, cfg.seed)?;
            let per_game = start.elapsed().as_secs_f64() / cfg.num_games as f64;
            let group = format!("m={m},gt={gt}");
            trials.extend(cell.trials.iter().map(|t| TrialRecord {
                group: group.clone(),
                seed: t.seed,
                success: t.valid,
                js: None,
                found: None,
                residual: Some(t.residual),
                exploitability: t.eps_ls,
                baseline_exploitability: Some(t.eps_uniform),
                runtime_secs: per_game,
            }));
            cells.push(cell);
        }
    }
    let report = ExperimentReport::new("lstsq", serde_json::to_value(cfg)?, trials);
    Ok((report, cells))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub action_counts: Vec<usize>,
    pub tau_inv: u32,
    pub n_rows: u128,
    pub n_cols: u128,
    /// Least-squares slope of `ln n_cols` against `ln tau_inv` over the
    /// `tau_inv` values of this action-count tuple.
    pub slope: Option<f64>,
}

/// Row and column counts of the Macaulay matrix (computed, not built) for
/// every action-count tuple and `tau_inv`.
pub fn macaulay_growth_table(action_counts: &[Vec<usize>], tau_invs: &[u32]) -> Result<Vec<GrowthRow>> {
    let mut rows = Vec::new();
    for counts in action_counts {
        let game = random_game(counts, 0)?;
        let mut block = Vec::new();
        for &t in tau_invs {
            let system = build_ne_mvp(&game, &TsallisParams::new(t, 1.0)?)?;
            let (n_rows, n_cols) = count_rows_cols(&system)?;
            block.push(GrowthRow {
                action_counts: counts.clone(),
                tau_inv: t,
                n_rows,
                n_cols,
                slope: None,
            });
        }
        let pts: Vec<(f64, f64)> = block
            .iter()
            .map(|r| (f64::from(r.tau_inv).ln(), (r.n_cols as f64).ln()))
            .collect();
        let slope = log_log_slope(&pts);
        for r in &mut block {
            r.slope = slope;
        }
        rows.extend(block);
    }
    Ok(rows)
}

fn log_log_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `actions,tau_inv,n_rows,n_cols,slope` with actions joined by `x`.
pub fn write_growth_csv<W: Write>(rows: &[GrowthRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["actions", "tau_inv", "n_rows", "n_cols", "slope"])?;
    for r in rows {
        let label: Vec<String> = r.action_counts.iter().map(|c| c.to_string()).collect();
        out.write_record([
            label.join("x"),
            r.tau_inv.to_string(),
            r.n_rows.to_string(),
            r.n_cols.to_string(),
            r.slope.map(|s| format!("{s:.4}")).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Median of `uniform / ls` exploitability ratios for a cell.
pub fn median_ratio(cell: &LsBatchSummary) -> Option<f64> {
    let ratios: Vec<f64> = cell
        .trials
        .iter()
        .filter_map(|t| t.eps_ls.filter(|e| *e > 0.0).map(|e| t.eps_uniform / e))
        .collect();
    median(&ratios)
}
