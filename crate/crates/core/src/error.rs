use thiserror::Error;

/// Errors raised across the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("player index {index} out of range for a {players}-player game")]
    PlayerIndex { index: usize, players: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("strategy for player {player} is off the simplex: {reason}")]
    OffSimplex { player: usize, reason: String },

    #[error("strategy entry {value} of player {player} is not strictly positive")]
    NonPositiveEntry { player: usize, value: f64 },

    #[error("gradient entry {value} of player {player} is not strictly positive (payoffs must lie in (0, 1])")]
    NonPositiveGradient { player: usize, value: f64 },

    #[error("negative substituted variable v[{index}] = {value}")]
    NegativeVariable { index: usize, value: f64 },

    #[error("size cap exceeded: {what} needs {needed}, cap is {cap}")]
    CapExceeded { what: &'static str, needed: u128, cap: u128 },

    #[error("dense memory budget exceeded ({entries} entries > {cap}); use the stochastic solver")]
    DenseBudget { entries: u128, cap: u128 },

    #[error("not enough eligible shift monomials: {eligible} available, null space has dimension {needed}")]
    NotEnoughSelectors { eligible: usize, needed: usize },

    #[error("rank condition failed: rank(S1 Z) = {rank}, dim(Z) = {dim}")]
    RankDeficient { rank: usize, dim: usize },

    #[error("all singular values fall below the pseudoinverse cutoff")]
    ZeroPseudoinverse,

    #[error("matrix has full column rank; null space is empty")]
    FullRank,

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("unknown game `{0}`")]
    UnknownGame(String),

    #[error("report inconsistency: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Config(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
