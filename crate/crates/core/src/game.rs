//! Normal-form games: payoff tensors, mixed strategy profiles, expected
//! utilities and gradients, payoff normalization and the builtin games.
//!
//! Payoff tensors are stored flat in row-major order, so the last player's
//! action index varies fastest. Every player's tensor is indexed by the full
//! joint action `(a_1, ..., a_N)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default simplex tolerance for exact contexts.
pub const SIMPLEX_TOL: f64 = 1e-8;

/// Payoff range targeted by [`normalize_payoffs`].
pub const PAYOFF_LO: f64 = 0.001;
pub const PAYOFF_HI: f64 = 1.0;

/// A finite normal-form game with one dense payoff tensor per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameJson", into = "GameJson")]
pub struct Game {
    action_counts: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
    strides: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GameJson {
    num_players: usize,
    action_counts: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
}

impl TryFrom<GameJson> for Game {
    type Error = Error;

    fn try_from(raw: GameJson) -> Result<Self> {
        if raw.num_players != raw.action_counts.len() {
            return Err(Error::Shape(format!(
                "num_players = {} but {} action counts given",
                raw.num_players,
                raw.action_counts.len()
            )));
        }
        Game::new(raw.action_counts, raw.payoffs)
    }
}

impl From<Game> for GameJson {
    fn from(game: Game) -> Self {
        GameJson {
            num_players: game.num_players(),
            action_counts: game.action_counts,
            payoffs: game.payoffs,
        }
    }
}

impl Game {
    /// Builds a game from per-player flat payoff tensors.
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        if action_counts.is_empty() {
            return Err(Error::Shape("a game needs at least one player".into()));
        }
        if action_counts.contains(&0) {
            return Err(Error::Shape("every player needs at least one action".into()));
        }
        if payoffs.len() != action_counts.len() {
            return Err(Error::Shape(format!(
                "{} players but {} payoff tensors",
                action_counts.len(),
                payoffs.len()
            )));
        }
        let joint: usize = action_counts.iter().product();
        for (i, tensor) in payoffs.iter().enumerate() {
            if tensor.len() != joint {
                return Err(Error::Shape(format!(
                    "payoff tensor of player {i} has {} entries, expected {joint}",
                    tensor.len()
                )));
            }
            if tensor.iter().any(|u| !u.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "payoff tensor of player {i} has a non-finite entry"
                )));
            }
        }
        let mut strides = vec![1; action_counts.len()];
        for i in (0..action_counts.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * action_counts[i + 1];
        }
        Ok(Self {
            action_counts,
            payoffs,
            strides,
        })
    }

    /// Two-player game from row-major payoff matrices `U1[a1][a2]`, `U2[a1][a2]`.
    pub fn bimatrix(u1: &[Vec<f64>], u2: &[Vec<f64>]) -> Result<Self> {
        let rows = u1.len();
        let cols = u1.first().map_or(0, Vec::len);
        if u2.len() != rows || u1.iter().chain(u2).any(|r| r.len() != cols) {
            return Err(Error::Shape("bimatrix payoffs must share one rectangular shape".into()));
        }
        let flat = |u: &[Vec<f64>]| u.iter().flatten().copied().collect::<Vec<_>>();
        Self::new(vec![rows, cols], vec![flat(u1), flat(u2)])
    }

    pub fn num_players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.action_counts[player]
    }

    /// Number of joint actions, `prod |A_i|`.
    pub fn num_joint_actions(&self) -> usize {
        self.payoffs[0].len()
    }

    /// Total number of actions across players, `sum |A_i|`.
    pub fn total_actions(&self) -> usize {
        self.action_counts.iter().sum()
    }

    pub fn payoff_tensor(&self, player: usize) -> &[f64] {
        &self.payoffs[player]
    }

    pub fn payoff_tensors(&self) -> &[Vec<f64>] {
        &self.payoffs
    }

    /// Payoff of `player` at the joint action `actions`.
    pub fn payoff(&self, player: usize, actions: &[usize]) -> f64 {
        self.payoffs[player][self.flat_index(actions)]
    }

    pub fn flat_index(&self, actions: &[usize]) -> usize {
        actions.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    /// Decodes a flat joint-action index into per-player actions.
    pub fn joint_action(&self, mut flat: usize, out: &mut [usize]) {
        for (slot, &s) in out.iter_mut().zip(&self.strides) {
            *slot = flat / s;
            flat %= s;
        }
    }

    /// Iterates over `(flat_index, joint_action)` in storage order.
    pub fn joint_actions(&self) -> impl Iterator<Item = (usize, Vec<usize>)> + '_ {
        (0..self.num_joint_actions()).map(move |flat| {
            let mut a = vec![0; self.num_players()];
            self.joint_action(flat, &mut a);
            (flat, a)
        })
    }

    pub fn global_min_max(&self) -> (f64, f64) {
        self.payoffs
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| (lo.min(u), hi.max(u)))
    }

    /// Adds `offset` to every entry of one player's tensor.
    pub fn with_offset(&self, player: usize, offset: f64) -> Self {
        let mut out = self.clone();
        out.payoffs[player].iter_mut().for_each(|u| *u += offset);
        out
    }

    pub fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.num_players() {
            return Err(Error::PlayerIndex {
                index: player,
                players: self.num_players(),
            });
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One mixed strategy per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StrategyProfile {
    strategies: Vec<Vec<f64>>,
}

impl StrategyProfile {
    /// Wraps raw per-player vectors. Use [`StrategyProfile::validate`] to
    /// check simplex membership.
    pub fn new(strategies: Vec<Vec<f64>>) -> Self {
        Self { strategies }
    }

    pub fn uniform(game: &Game) -> Self {
        Self::new(
            game.action_counts()
                .iter()
                .map(|&m| vec![1.0 / m as f64; m])
                .collect(),
        )
    }

    /// Point mass on `actions[i]` for each player.
    pub fn pure(game: &Game, actions: &[usize]) -> Result<Self> {
        if actions.len() != game.num_players() {
            return Err(Error::Shape("one action per player required".into()));
        }
        let mut strategies = Vec::with_capacity(actions.len());
        for (i, (&a, &m)) in actions.iter().zip(game.action_counts()).enumerate() {
            if a >= m {
                return Err(Error::InvalidArgument(format!(
                    "action {a} out of range for player {i}"
                )));
            }
            let mut s = vec![0.0; m];
            s[a] = 1.0;
            strategies.push(s);
        }
        Ok(Self::new(strategies))
    }

    /// Splits a flat vector (player-major) into a profile.
    pub fn from_flat(action_counts: &[usize], flat: &[f64]) -> Result<Self> {
        let total: usize = action_counts.iter().sum();
        if flat.len() != total {
            return Err(Error::Shape(format!(
                "flat profile has {} entries, expected {total}",
                flat.len()
            )));
        }
        let mut out = Vec::with_capacity(action_counts.len());
        let mut offset = 0;
        for &m in action_counts {
            out.push(flat[offset..offset + m].to_vec());
            offset += m;
        }
        Ok(Self::new(out))
    }

    pub fn num_players(&self) -> usize {
        self.strategies.len()
    }

    pub fn player(&self, i: usize) -> &[f64] {
        &self.strategies[i]
    }

    pub fn strategies(&self) -> &[Vec<f64>] {
        &self.strategies
    }

    pub fn into_strategies(self) -> Vec<Vec<f64>> {
        self.strategies
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.strategies.iter().flatten().copied().collect()
    }

    /// Checks the shape against `game`.
    pub fn check_shape(&self, game: &Game) -> Result<()> {
        if self.strategies.len() != game.num_players() {
            return Err(Error::Shape(format!(
                "profile has {} players, game has {}",
                self.strategies.len(),
                game.num_players()
            )));
        }
        for (i, (s, &m)) in self.strategies.iter().zip(game.action_counts()).enumerate() {
            if s.len() != m {
                return Err(Error::Shape(format!(
                    "player {i} strategy has {} entries, expected {m}",
                    s.len()
                )));
            }
        }
        Ok(())
    }

    /// Checks shape plus `x >= -tol` and `|sum x - 1| <= tol` for every player.
    pub fn validate(&self, game: &Game, tol: f64) -> Result<()> {
        self.check_shape(game)?;
        for (i, s) in self.strategies.iter().enumerate() {
            check_simplex(s, tol).map_err(|reason| Error::OffSimplex { player: i, reason })?;
        }
        Ok(())
    }

    pub fn is_strictly_interior(&self) -> bool {
        self.strategies.iter().flatten().all(|&x| x > 0.0)
    }
}

pub(crate) fn check_simplex(x: &[f64], tol: f64) -> std::result::Result<(), String> {
    if x.is_empty() {
        return Err("empty strategy".into());
    }
    if let Some(v) = x.iter().find(|v| !(**v >= -tol)) {
        return Err(format!("entry {v} below -{tol}"));
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(format!("entries sum to {sum}"));
    }
    Ok(())
}

/// Expected utility `sum_a u_i(a) prod_j x_{j,a_j}` of `player`.
pub fn expected_utility(game: &Game, profile: &StrategyProfile, player: usize) -> Result<f64> {
    game.check_player(player)?;
    profile.check_shape(game)?;
    let grad = contract_gradient(game, profile.strategies(), player);
    Ok(grad.iter().zip(profile.player(player)).map(|(g, x)| g * x).sum())
}

/// Gradient of `player`'s expected utility with respect to its own strategy:
/// the payoff tensor contracted with every opponent strategy.
pub fn gradient(game: &Game, profile: &StrategyProfile, player: usize) -> Result<Vec<f64>> {
    game.check_player(player)?;
    profile.check_shape(game)?;
    Ok(contract_gradient(game, profile.strategies(), player))
}

/// Contraction without shape checks. `strategies` may be arbitrary real
/// vectors (the contraction is multilinear), which the polynomial residual
/// checks rely on.
pub(crate) fn contract_gradient(game: &Game, strategies: &[Vec<f64>], player: usize) -> Vec<f64> {
    let n = game.num_players();
    let mut grad = vec![0.0; game.num_actions(player)];
    let tensor = game.payoff_tensor(player);
    let mut actions = vec![0usize; n];
    for (flat, &u) in tensor.iter().enumerate() {
        game.joint_action(flat, &mut actions);
        let mut w = u;
        for (j, &a) in actions.iter().enumerate() {
            if j != player {
                w *= strategies[j][a];
            }
        }
        grad[actions[player]] += w;
    }
    grad
}

/// Result of [`normalize_payoffs`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGame {
    pub game: Game,
    /// Set when every payoff was equal; all entries are then mapped to `hi`.
    pub degenerate: bool,
}

/// Affine rescale applied jointly to all players so that the global minimum
/// maps to `lo` and the global maximum to `hi`.
pub fn normalize_payoffs(game: &Game, lo: f64, hi: f64) -> Result<NormalizedGame> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    let (min, max) = game.global_min_max();
    let mut out = game.clone();
    if !(max > min) {
        out.payoffs.iter_mut().flatten().for_each(|u| *u = hi);
        return Ok(NormalizedGame {
            game: out,
            degenerate: true,
        });
    }
    let scale = (hi - lo) / (max - min);
    out.payoffs
        .iter_mut()
        .flatten()
        .for_each(|u| *u = lo + (*u - min) * scale);
    Ok(NormalizedGame {
        game: out,
        degenerate: false,
    })
}

/// Chicken; action 0 is "swerve", action 1 "go straight".
pub fn make_chicken() -> Game {
    Game::bimatrix(
        &[vec![0.7527, 0.505], vec![1.0, 0.01]],
        &[vec![0.7527, 1.0], vec![0.505, 0.01]],
    )
    .expect("static payoffs")
}

/// Bach or Stravinsky. Player 2's tensor is the usual mirror of player 1's
/// (it prefers the second concert).
pub fn make_bach_stravinsky() -> Game {
    Game::bimatrix(
        &[vec![1.0, 0.01], vec![0.01, 0.67]],
        &[vec![0.67, 0.01], vec![0.01, 1.0]],
    )
    .expect("static payoffs")
}

/// Stag hunt; action 0 hunts the stag.
pub fn make_stag_hunt() -> Game {
    Game::bimatrix(
        &[vec![1.0, 0.01], vec![0.67, 0.67]],
        &[vec![1.0, 0.67], vec![0.01, 0.67]],
    )
    .expect("static payoffs")
}

/// I.i.d. uniform `[0, 1]` payoffs followed by [`normalize_payoffs`] onto
/// `[0.001, 1]`. Deterministic in `seed`.
pub fn random_game(action_counts: &[usize], seed: u64) -> Result<Game> {
    let joint: usize = action_counts.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let payoffs = (0..action_counts.len())
        .map(|_| (0..joint).map(|_| rng.random::<f64>()).collect())
        .collect();
    let raw = Game::new(action_counts.to_vec(), payoffs)?;
    Ok(normalize_payoffs(&raw, PAYOFF_LO, PAYOFF_HI)?.game)
}

/// Names accepted by [`builtin_game`].
pub const BUILTIN_GAMES: [&str; 3] = ["chicken", "bach_stravinsky", "stag_hunt"];

pub fn builtin_game(name: &str) -> Result<Game> {
    match name.to_ascii_lowercase().replace('-', "_").as_str() {
        "chicken" => Ok(make_chicken()),
        "bach_stravinsky" | "bos" | "battle_of_sexes" => Ok(make_bach_stravinsky()),
        "stag_hunt" => Ok(make_stag_hunt()),
        _ => Err(Error::UnknownGame(name.to_string())),
    }
}

/// Regularization used for the reference equilibria of each builtin game:
/// `(tau_inv, gamma_tilde)`.
pub fn builtin_params(name: &str) -> Result<(u32, f64)> {
    match name.to_ascii_lowercase().replace('-', "_").as_str() {
        "chicken" => Ok((3, 0.25)),
        "bach_stravinsky" | "bos" | "battle_of_sexes" | "stag_hunt" => Ok((3, 1.0)),
        _ => Err(Error::UnknownGame(name.to_string())),
    }
}

/// SplitMix64 step; used to derive independent per-trial and per-stage seeds.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
