//! Randomized invariants across the pipeline.

use polynash_core::experiment::{profile_js, Aggregates, ExperimentReport, TrialRecord};
use polynash_core::macaulay::{build_macaulay_at, build_shift_selectors};
use polynash_core::mvp::recover_strategy;
use polynash_core::polynomial::count_monomials;
use polynash_core::regularization::{best_response_from_gradient, regularized_exploitability};
use polynash_core::*;
use proptest::prelude::*;

fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, m).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn profile_for(counts: Vec<usize>) -> impl Strategy<Value = StrategyProfile> {
    counts
        .into_iter()
        .map(simplex)
        .collect::<Vec<_>>()
        .prop_map(StrategyProfile::new)
}

fn game_and_profile(players: std::ops::RangeInclusive<usize>, actions: std::ops::RangeInclusive<usize>)
    -> impl Strategy<Value = (Game, StrategyProfile)> {
    (prop::collection::vec(actions, players), any::<u64>()).prop_flat_map(|(counts, seed)| {
        let game = random_game(&counts, seed).unwrap();
        profile_for(counts).prop_map(move |p| (game.clone(), p))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_sums_to_zero_and_is_idempotent(v in prop::collection::vec(-10.0f64..10.0, 1..10)) {
        let p = project_tangent(&v).unwrap();
        prop_assert!(p.iter().sum::<f64>().abs() < 1e-12);
        let pp = project_tangent(&p).unwrap();
        for (a, b) in p.iter().zip(&pp) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exploitability_is_nonnegative((game, profile) in game_and_profile(2..=3, 2..=4)) {
        let e = exploitability(&game, &profile).unwrap();
        prop_assert!(e.per_player.iter().all(|&x| x >= -1e-12));
    }

    #[test]
    fn gradient_matches_finite_differences((game, profile) in game_and_profile(3..=3, 2..=2), player in 0usize..3) {
        let grad = gradient(&game, &profile, player).unwrap();
        for a in 0..2 {
            let h = 1e-6;
            let mut s = profile.strategies().to_vec();
            s[player][a] += h;
            let up = expected_utility(&game, &StrategyProfile::new(s.clone()), player).unwrap();
            s[player][a] -= 2.0 * h;
            let down = expected_utility(&game, &StrategyProfile::new(s), player).unwrap();
            let fd = (up - down) / (2.0 * h);
            prop_assert!((fd - grad[a]).abs() <= 1e-5 * grad[a].abs().max(1.0));
        }
    }

    #[test]
    fn best_response_is_interior((game, profile) in game_and_profile(2..=3, 2..=4), tau_inv in 1u32..8) {
        for i in 0..game.num_players() {
            let br = tsallis_best_response(&game, &profile, i, 1.0 / f64::from(tau_inv)).unwrap();
            prop_assert!(br.iter().all(|&x| x > 0.0 && x < 1.0));
            prop_assert!((br.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn regularized_gradient_vanishes_at_best_response(grad in prop::collection::vec(0.01f64..1.0, 2..6), tau_inv in 1u32..6) {
        let tau = 1.0 / f64::from(tau_inv);
        let br = best_response_from_gradient(&grad, tau).unwrap();
        let gamma: f64 = grad.iter().map(|g| g.powf(1.0 / tau)).sum::<f64>().powf(tau);
        let rg = regularization::regularized_gradient(&grad, &br, tau, gamma);
        for r in rg {
            prop_assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn loose_bound_holds((game, profile) in game_and_profile(2..=3, 2..=3), tau_inv in 1u32..6) {
        let b = exploitability_bound(&game, &profile, &TsallisParams::new(tau_inv, 1.0).unwrap()).unwrap();
        let e = exploitability(&game, &profile).unwrap();
        for (x, y) in e.per_player.iter().zip(&b.loose) {
            prop_assert!(*x <= y + 1e-9);
        }
        for (t, l) in b.tight.iter().zip(&b.loose) {
            prop_assert!(*t <= l + 1e-9);
        }
    }

    #[test]
    fn basis_count_and_round_trip(n_v in 1usize..=6, d in 0u32..=6) {
        let basis = monomial_basis(n_v, d).unwrap();
        prop_assert_eq!(basis.len() as u128, count_monomials(n_v, d).unwrap());
        for (i, m) in basis.monomials().iter().enumerate() {
            prop_assert_eq!(basis.index_of(m), Some(i));
        }
    }

    #[test]
    fn vandermonde_shift_property(v in prop::collection::vec(-2.0f64..2.0, 3), l in 0usize..3) {
        let ordering = monomial_basis(3, 5).unwrap();
        let psi = vandermonde_vector(&v, &ordering).unwrap();
        let eligible = polynash_core::macaulay::eligible_selector_count(&ordering);
        let sel = build_shift_selectors(&ordering, eligible, l, 0).unwrap();
        for (&a, &b) in sel.s1.iter().zip(&sel.svl) {
            prop_assert!((psi[b] - v[l] * psi[a]).abs() <= 1e-14 * psi[b].abs());
        }
    }

    #[test]
    fn mvp_shape_and_residual_oracle(
        (game, profile) in game_and_profile(2..=3, 2..=3),
        tau_inv in 1u32..4,
        gamma_tilde in 0.25f64..=1.0,
    ) {
        let params = TsallisParams::new(tau_inv, gamma_tilde).unwrap();
        let system = build_ne_mvp(&game, &params).unwrap();
        let n = game.num_players();
        prop_assert_eq!(system.num_equations(), game.total_actions());
        let expected_degree = ((n as u32 - 1) * tau_inv).max(tau_inv).max(1);
        prop_assert_eq!(system.max_degree(), expected_degree);
        // v = x^tau recovers the profile and the residual rows are projected
        // regularized gradients.
        let tau = params.tau();
        let v: Vec<f64> = profile.flatten().iter().map(|x| x.powf(tau)).collect();
        let back = recover_strategy(&v, &system).unwrap();
        let res = system_residual(&system, &v).unwrap();
        let mut row = 0;
        for i in 0..n {
            let rg = regularization::tsallis_gradient(&game, &back, i, &params).unwrap();
            let proj = project_tangent(&rg).unwrap();
            let m = game.num_actions(i);
            for p in proj.iter().take(m - 1) {
                prop_assert!((res[row] - p).abs() < 1e-10);
                row += 1;
            }
            prop_assert!(res[row].abs() < 1e-10);
            row += 1;
        }
    }

    #[test]
    fn macaulay_counts_match_built_matrix(counts in prop::collection::vec(2usize..=3, 2..=2), tau_inv in 1u32..=2, seed in any::<u64>()) {
        let game = random_game(&counts, seed).unwrap();
        let system = build_ne_mvp(&game, &TsallisParams::new(tau_inv, 1.0).unwrap()).unwrap();
        let (rows, cols) = count_rows_cols(&system).unwrap();
        let m = build_macaulay(&system).unwrap();
        prop_assert_eq!((m.n_rows() as u128, m.n_cols() as u128), (rows, cols));
        let seed_terms = system.polys().iter().map(|p| p.num_terms()).max().unwrap();
        prop_assert_eq!(m.max_row_nnz(), seed_terms);
        let small = build_macaulay_at(&system, system.max_degree(), u128::MAX).unwrap();
        prop_assert_eq!(small.n_rows(), system.num_equations());
    }

    #[test]
    fn least_squares_on_two_action_games(seed in any::<u64>()) {
        let game = random_game(&[2, 2], seed).unwrap();
        let ls = solve_least_squares_2p(&game, 1.0).unwrap();
        prop_assert!(ls.valid);
        prop_assert!(ls.residual_norm <= 1e-8);
        let params = TsallisParams::new(1, 1.0).unwrap();
        let reg = regularized_exploitability(&game, &ls.profile, &params).unwrap();
        prop_assert!(reg.max <= 1e-8);
        let exact = solve_exact(&game, &params, &ExactTolerances::default()).unwrap();
        prop_assert_eq!(exact.len(), 1);
        for (a, b) in exact.solutions()[0].profile.flatten().iter().zip(ls.profile.flatten()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn js_is_bounded_and_symmetric(p in simplex(4), q in simplex(4)) {
        let d = jensen_shannon(&p, &q).unwrap();
        prop_assert!(d >= 0.0 && d <= 2f64.ln().sqrt() + 1e-12);
        prop_assert!((d - jensen_shannon(&q, &p).unwrap()).abs() < 1e-15);
        prop_assert!(jensen_shannon(&p, &p).unwrap() < 1e-7);
        let a = StrategyProfile::new(vec![p.clone(), q.clone()]);
        prop_assert!(profile_js(&a, &a).unwrap() < 1e-7);
    }

    #[test]
    fn report_round_trip(rows in prop::collection::vec((any::<bool>(), prop::option::of(0.0f64..0.8), 0.0f64..10.0), 0..20)) {
        let trials: Vec<TrialRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (success, js, secs))| TrialRecord {
                group: "g".into(),
                seed: i as u64,
                success,
                js,
                found: None,
                residual: None,
                exploitability: None,
                baseline_exploitability: None,
                runtime_secs: secs,
            })
            .collect();
        let report = ExperimentReport::new("prop", serde_json::json!({"k": 1}), trials.clone());
        let back = ExperimentReport::from_json_str(&report.to_json_string().unwrap()).unwrap();
        prop_assert_eq!(&back.trials, &report.trials);
        let recomputed = Aggregates::from_trials(&back.trials);
        prop_assert_eq!(recomputed.trials, report.aggregates.trials);
        prop_assert_eq!(recomputed.success_rate, report.aggregates.success_rate);
    }
}

#[test]
fn gumbel_distance_shrinks_with_samples() {
    let g = make_chicken();
    let u = StrategyProfile::uniform(&g);
    for player in 0..2 {
        let few = gumbel_br_check(&g, &u, player, 1.0 / 3.0, 10_000, 11).unwrap();
        let many = gumbel_br_check(&g, &u, player, 1.0 / 3.0, 1_000_000, 12).unwrap();
        assert!(many < few, "player {player}: {many} vs {few}");
    }
}
