//! Approximate Nash equilibria of normal-form games through polynomial
//! system solving.
//!
//! Adding a Tsallis entropy bonus to every player's utility turns the
//! equilibrium conditions into a system of polynomial equations in
//! `v = x^tau`. The roots are read off the null space of a Macaulay matrix,
//! either with dense linear algebra ([`solve_exact`]) or with mini-batch
//! iterative methods ([`solve_stochastic`]). Two-player games at `tau = 1`
//! reduce to a linear least-squares problem ([`solve_least_squares_2p`]).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exact;
pub mod experiment;
pub mod game;
pub mod linalg;
pub mod lstsq;
pub mod macaulay;
pub mod mvp;
pub mod polynomial;
pub mod regularization;
pub mod solution;
pub mod stochastic;

pub use error::{Error, Result};
pub use exact::{solve_exact, solve_exact_with_diagnostics, ExactTolerances};
pub use game::{
    builtin_game, builtin_params, derive_seed, expected_utility, gradient, make_bach_stravinsky, make_chicken, make_stag_hunt,
    normalize_payoffs, random_game, Game, NormalizedGame, StrategyProfile,
};
pub use macaulay::{build_macaulay, build_shift_selectors, count_rows_cols, macaulay_degree_bound, MacaulayMatrix, ShiftSelectors};
pub use mvp::{build_ne_mvp, recover_strategy, system_residual, PolynomialSystem};
pub use polynomial::{eval_poly, monomial_basis, shift_poly, vandermonde_vector, Monomial, MonomialOrdering, Polynomial};
pub use regularization::{
    exploitability, exploitability_bound, gumbel_br_check, project_tangent, tau_for_target_epsilon,
    tsallis_best_response, tsallis_entropy, tsallis_gradient, Exploitability, ExploitabilityBound, TsallisParams,
};
pub use solution::{Solution, SolutionSet, SolutionSource};
pub use stochastic::{solve_stochastic, solve_stochastic_with_diagnostics, ConfigFile, SolverConfig, StageConfig, StochasticDiagnostics};
pub use lstsq::{ls_batch_experiment, solve_least_squares_2p, LsBatchSummary, LsResult};
pub use experiment::{jensen_shannon, macaulay_growth_table, run_lstsq_experiment, run_recovery_experiment, ExperimentReport};
