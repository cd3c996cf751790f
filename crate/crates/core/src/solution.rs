//! Recovered equilibria with their quality measures.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{Game, StrategyProfile};
use crate::regularization::{exploitability, regularized_exploitability, TsallisParams};

/// Default dedup threshold on the max-over-players total-variation distance.
pub const DEDUP_TOL: f64 = 1e-3;

/// Which solver step produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolutionSource {
    /// Real eigenvalue of the dense shift matrix.
    Exact { eigenvalue: f64 },
    /// Grid point of the stochastic eigenvalue scan.
    Lambda { lambda: f64, index: usize },
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub profile: StrategyProfile,
    /// Root in the substituted variables `v = x^tau`.
    pub v: Vec<f64>,
    pub residual_norm: f64,
    /// Max-over-players exploitability in the original game.
    pub exploitability: f64,
    /// Max-over-players exploitability in the regularized game.
    pub regularized_exploitability: f64,
    /// Largest `|sum x_i - 1|` before renormalization.
    pub simplex_deviation: f64,
    pub source: SolutionSource,
}

impl Solution {
    /// Fills in the exploitabilities for `profile`.
    pub fn evaluate(
        game: &Game,
        params: &TsallisParams,
        profile: StrategyProfile,
        v: Vec<f64>,
        residual_norm: f64,
        simplex_deviation: f64,
        source: SolutionSource,
    ) -> Result<Self> {
        let exploitability = exploitability(game, &profile)?.max;
        let regularized_exploitability = regularized_exploitability(game, &profile, params)?.max;
        Ok(Self {
            profile,
            v,
            residual_norm,
            exploitability,
            regularized_exploitability,
            simplex_deviation,
            source,
        })
    }
}

/// Max over players of the total-variation distance between two profiles.
pub fn profile_distance(a: &StrategyProfile, b: &StrategyProfile) -> f64 {
    a.strategies()
        .iter()
        .zip(b.strategies())
        .map(|(x, y)| 0.5 * x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Pairwise-distinct solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    solutions: Vec<Solution>,
    dedup_tol: f64,
}

#[derive(Serialize)]
struct SolutionJson<'a> {
    profile: &'a StrategyProfile,
    residual: f64,
    exploitability_original_game: f64,
    exploitability_regularized_game: f64,
}

impl Default for SolutionSet {
    fn default() -> Self {
        Self::new(DEDUP_TOL)
    }
}

impl SolutionSet {
    pub fn new(dedup_tol: f64) -> Self {
        Self {
            solutions: Vec::new(),
            dedup_tol,
        }
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn solutions(&self) -> &[Solution] {
        &self.solutions
    }

    pub fn dedup_tol(&self) -> f64 {
        self.dedup_tol
    }

    pub fn contains(&self, profile: &StrategyProfile) -> bool {
        self.solutions
            .iter()
            .any(|s| profile_distance(&s.profile, profile) < self.dedup_tol)
    }

    /// Adds `sol` unless an existing solution lies within the dedup threshold.
    pub fn insert(&mut self, sol: Solution) -> bool {
        if self.contains(&sol.profile) {
            return false;
        }
        self.solutions.push(sol);
        true
    }

    /// Orders solutions lexicographically by their flattened profile.
    pub fn sort(&mut self) {
        self.solutions.sort_by(|a, b| {
            let (fa, fb) = (a.profile.flatten(), b.profile.flatten());
            fa.iter()
                .zip(&fb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
    }

    pub fn profiles(&self) -> Vec<StrategyProfile> {
        self.solutions.iter().map(|s| s.profile.clone()).collect()
    }

    /// `[{profile, residual, exploitability_original_game, exploitability_regularized_game}]`.
    pub fn to_json_string(&self) -> Result<String> {
        let view: Vec<SolutionJson> = self
            .solutions
            .iter()
            .map(|s| SolutionJson {
                profile: &s.profile,
                residual: s.residual_norm,
                exploitability_original_game: s.exploitability,
                exploitability_regularized_game: s.regularized_exploitability,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&view)?)
    }
}
