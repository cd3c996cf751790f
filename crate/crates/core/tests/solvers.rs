use polynash_core::exact::{null_space_dense, shift_blocks, solve_gevp};
use polynash_core::solution::profile_distance;
use polynash_core::stochastic::null_space_stochastic;
use polynash_core::*;

fn builtin(name: &str) -> (Game, TsallisParams) {
    let (t, g) = builtin_params(name).unwrap();
    (builtin_game(name).unwrap(), TsallisParams::new(t, g).unwrap())
}

#[test]
fn full_batch_matches_exact_on_builtins() {
    for name in ["chicken", "bach_stravinsky", "stag_hunt"] {
        let (game, params) = builtin(name);
        let exact = solve_exact(&game, &params, &ExactTolerances::default()).unwrap();
        let cfg = SolverConfig::full_batch();
        let (found, diag) = solve_stochastic_with_diagnostics(&game, &params, &cfg).unwrap();
        assert_eq!(found.len(), exact.len(), "{name}: {:?}", diag.warnings);
        for s in found.solutions() {
            assert!(
                exact.solutions().iter().any(|e| profile_distance(&e.profile, &s.profile) < 0.05),
                "{name}: unmatched {:?}",
                s.profile
            );
            assert!(s.v.iter().all(|&x| x >= -cfg.neg_tol));
            assert!(s.simplex_deviation <= cfg.sum_to_1_tol);
            assert!(s.residual_norm <= cfg.residual_tol);
        }
    }
}

#[test]
fn exact_solutions_are_regularized_equilibria() {
    for name in ["chicken", "bach_stravinsky", "stag_hunt"] {
        let (game, params) = builtin(name);
        let tol = ExactTolerances::default();
        let set = solve_exact(&game, &params, &tol).unwrap();
        for s in set.solutions() {
            assert!(s.residual_norm < tol.residual_tol);
            // Regularized exploitability is controlled by the residual.
            assert!(s.regularized_exploitability <= std::f64::consts::SQRT_2 * tol.residual_tol, "{name}");
        }
    }
}

#[test]
fn eigenvalues_do_not_depend_on_extra_rows() {
    let (game, params) = builtin("chicken");
    let system = build_ne_mvp(&game, &params).unwrap();
    let m = build_macaulay(&system).unwrap();
    let ns = null_space_dense(&m, 1e-8, 50_000_000).unwrap();
    let spectrum = |extra: usize| {
        let b = shift_blocks(ns.basis.as_ref(), m.ordering(), 0, extra, 1e-8).unwrap();
        let eig = solve_gevp(b.svz.as_ref(), b.s1z.as_ref(), 1e-8).unwrap();
        let mut real: Vec<f64> = eig.values.iter().filter(|c| c.im.abs() < 1e-8).map(|c| c.re).collect();
        real.sort_by(f64::total_cmp);
        real
    };
    let (a, b) = (spectrum(16), spectrum(64));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-8, "{x} vs {y}");
    }
}

#[test]
fn stochastic_solve_is_deterministic() {
    let (game, params) = builtin("stag_hunt");
    let cfg = SolverConfig::batch_100().with_seed(4);
    let a = solve_stochastic_with_diagnostics(&game, &params, &cfg).unwrap();
    let b = solve_stochastic_with_diagnostics(&game, &params, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mini_batch_null_space_angle() {
    let (game, params) = builtin("chicken");
    let system = build_ne_mvp(&game, &params).unwrap();
    let m = build_macaulay(&system).unwrap();
    let dense = null_space_dense(&m, 1e-8, 50_000_000).unwrap();
    let mut cfg = SolverConfig::batch_100();
    for stage in [&mut cfg.sigma_max, &mut cfg.null_space] {
        stage.batch_size = 200;
    }
    let ns = null_space_stochastic(&m, &cfg.sigma_max, &cfg.null_space, 17).unwrap();
    assert_eq!(ns.basis.ncols(), dense.dim());
    // Largest principal angle between the subspaces.
    let overlap = dense.basis.transpose() * &ns.basis;
    let s = linalg::svd(overlap.as_ref()).unwrap().s;
    let min_cos = s.iter().copied().fold(1.0, f64::min).min(1.0);
    let angle = min_cos.acos();
    println!("batch 200 of {}: largest principal angle {angle:.3e} rad", m.n_rows());
    assert!(angle < 0.15);
}

#[test]
fn invalid_inputs_are_errors_not_empty_sets() {
    let (game, params) = builtin("chicken");
    let mut cfg = SolverConfig::full_batch();
    cfg.num_lams = 1;
    assert!(solve_stochastic(&game, &params, &cfg).is_err());
    assert!(TsallisParams::new(0, 1.0).is_err());
    let three = random_game(&[2, 2, 2], 3).unwrap();
    assert!(solve_least_squares_2p(&three, 1.0).is_err());
}
