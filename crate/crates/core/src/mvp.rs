//! The polynomial system whose nonnegative real roots are the equilibria of
//! the Tsallis-regularized game, written in `v = x^tau`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{Game, StrategyProfile};
use crate::polynomial::{eval_poly, Monomial, Polynomial};
use crate::regularization::TsallisParams;

/// Default tolerance below zero for roots read back as strategies.
pub const NEG_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialSystem {
    polys: Vec<Polynomial>,
    degrees: Vec<u32>,
    action_counts: Vec<usize>,
    offsets: Vec<usize>,
    params: TsallisParams,
    #[serde(skip)]
    warnings: Vec<String>,
}

impl PolynomialSystem {
    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    pub fn num_equations(&self) -> usize {
        self.polys.len()
    }

    /// Number of variables, `sum |A_i|`.
    pub fn n_v(&self) -> usize {
        self.action_counts.iter().sum()
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn params(&self) -> &TsallisParams {
        &self.params
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    /// Flat variable index of `v_{player, action}`.
    pub fn var_index(&self, player: usize, action: usize) -> usize {
        self.offsets[player] + action
    }

    /// `(player, action)` owning a flat variable index.
    pub fn var_owner(&self, index: usize) -> (usize, usize) {
        let player = self.offsets.partition_point(|&o| o <= index) - 1;
        (player, index - self.offsets[player])
    }

    /// Advisory notes raised while building (weak regularization, payoffs
    /// outside `(0, 1]`, even `tau_inv`).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.polys)?)
    }

    /// Rewrites a system of degree at most one as `A v = b`, with `A` row-major.
    pub fn as_linear_system(&self) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if self.max_degree() > 1 {
            return Err(Error::InvalidArgument(format!(
                "system has degree {}, not linear",
                self.max_degree()
            )));
        }
        let n_v = self.n_v();
        let mut a = vec![vec![0.0; n_v]; self.polys.len()];
        let mut b = vec![0.0; self.polys.len()];
        for (e, p) in self.polys.iter().enumerate() {
            for (c, m) in p.terms() {
                match m.exponents().iter().position(|&x| x > 0) {
                    Some(k) => a[e][k] += c,
                    None => b[e] -= c,
                }
            }
        }
        Ok((a, b))
    }
}

/// For each player `i` with `m` actions, emits the first `m - 1` rows of
/// `(I - 11^T / m) (U_i . v_{-i}^{tau_inv} - gamma_tilde m v_i)` followed by
/// `sum_a v_{i,a}^{tau_inv} - 1`. The last gradient row is dropped because
/// the projected rows sum to zero.
pub fn build_ne_mvp(game: &Game, params: &TsallisParams) -> Result<PolynomialSystem> {
    params.validate()?;
    let counts = game.action_counts().to_vec();
    let n_v: usize = counts.iter().sum();
    let mut offsets = Vec::with_capacity(counts.len());
    let mut acc = 0;
    for &m in &counts {
        offsets.push(acc);
        acc += m;
    }
    let tinv = params.tau_inv;

    let mut warnings = Vec::new();
    if params.gamma_tilde < 1.0 {
        warnings.push(format!(
            "gamma_tilde = {} < 1: equilibria are not guaranteed to be interior",
            params.gamma_tilde
        ));
    }
    let (lo, hi) = game.global_min_max();
    if !(lo > 0.0 && hi <= 1.0) {
        warnings.push(format!("payoffs span [{lo}, {hi}], outside (0, 1]"));
    }
    if tinv.is_multiple_of(2) {
        warnings.push("even tau_inv admits sign-flipped roots; they are filtered later".into());
    }

    // Monomial v_{-i}^{tau_inv} for every joint action, per player.
    let mut actions = vec![0usize; counts.len()];
    let mut polys = Vec::new();
    for (i, &m) in counts.iter().enumerate() {
        let weight = params.gamma(m);
        let inv_m = 1.0 / m as f64;
        let tensor = game.payoff_tensor(i);
        for row in 0..m.saturating_sub(1) {
            let mut terms = Vec::with_capacity(tensor.len() + m);
            for (flat, &u) in tensor.iter().enumerate() {
                game.joint_action(flat, &mut actions);
                let coeff = u * (if actions[i] == row { 1.0 } else { 0.0 } - inv_m);
                let mut e = vec![0u32; n_v];
                for (j, &a) in actions.iter().enumerate() {
                    if j != i {
                        e[offsets[j] + a] += tinv;
                    }
                }
                terms.push((coeff, Monomial(e)));
            }
            for k in 0..m {
                let proj = if k == row { 1.0 } else { 0.0 } - inv_m;
                terms.push((-weight * proj, Monomial::var(n_v, offsets[i] + k)));
            }
            polys.push(Polynomial::from_terms(n_v, terms)?);
        }
        let mut terms: Vec<_> = (0..m)
            .map(|k| (1.0, Monomial::var_pow(n_v, offsets[i] + k, tinv)))
            .collect();
        terms.push((-1.0, Monomial::one(n_v)));
        polys.push(Polynomial::from_terms(n_v, terms)?);
    }
    let degrees = polys.iter().map(Polynomial::degree).collect();
    Ok(PolynomialSystem {
        polys,
        degrees,
        action_counts: counts,
        offsets,
        params: *params,
        warnings,
    })
}

/// `x = v^tau_inv`, grouped by player and not renormalized. Entries in
/// `(-NEG_TOL, 0)` are clamped to zero; more negative entries are rejected.
pub fn recover_strategy(v: &[f64], system: &PolynomialSystem) -> Result<StrategyProfile> {
    recover_strategy_with_tol(v, system, NEG_TOL)
}

pub fn recover_strategy_with_tol(
    v: &[f64],
    system: &PolynomialSystem,
    neg_tol: f64,
) -> Result<StrategyProfile> {
    check_len(v, system)?;
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(**x > -neg_tol)) {
        return Err(Error::NegativeVariable { index, value });
    }
    let tinv = system.params.tau_inv as i32;
    let x: Vec<f64> = v.iter().map(|&vi| vi.max(0.0).powi(tinv)).collect();
    StrategyProfile::from_flat(&system.action_counts, &x)
}

/// Every equation evaluated at `v`.
pub fn system_residual(system: &PolynomialSystem, v: &[f64]) -> Result<Vec<f64>> {
    check_len(v, system)?;
    system.polys.iter().map(|p| eval_poly(p, v)).collect()
}

fn check_len(v: &[f64], system: &PolynomialSystem) -> Result<()> {
    if v.len() != system.n_v() {
        return Err(Error::Shape(format!(
            "point has {} coordinates, system has {} variables",
            v.len(),
            system.n_v()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{contract_gradient, make_chicken, random_game};
    use crate::regularization::project_tangent;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chicken_shape() {
        let p = TsallisParams::new(3, 0.25).unwrap();
        let s = build_ne_mvp(&make_chicken(), &p).unwrap();
        assert_eq!(s.num_equations(), 4);
        assert_eq!(s.n_v(), 4);
        assert_eq!(s.degrees(), &[3, 3, 3, 3]);
        assert!(s.polys().iter().all(|q| q.num_terms() <= 4));
        assert!(!s.warnings().is_empty());
    }

    #[test]
    fn counts_and_degrees_across_shapes() {
        for counts in [vec![2, 2], vec![3, 2], vec![2, 2, 2], vec![3, 3, 2], vec![2, 3, 3]] {
            let g = random_game(&counts, 5).unwrap();
            for tinv in [1, 2, 3] {
                let s = build_ne_mvp(&g, &TsallisParams::new(tinv, 1.0).unwrap()).unwrap();
                let n = counts.len() as u32;
                assert_eq!(s.num_equations(), counts.iter().sum::<usize>());
                let mut e = 0;
                for &m in &counts {
                    for _ in 0..m - 1 {
                        assert_eq!(s.degrees()[e], ((n - 1) * tinv).max(1));
                        e += 1;
                    }
                    assert_eq!(s.degrees()[e], tinv);
                    e += 1;
                }
            }
        }
    }

    #[test]
    fn two_player_tau_one_is_linear() {
        let g = random_game(&[3, 4], 9).unwrap();
        let s = build_ne_mvp(&g, &TsallisParams::new(1, 1.0).unwrap()).unwrap();
        assert_eq!(s.max_degree(), 1);
        let (a, b) = s.as_linear_system().unwrap();
        assert_eq!((a.len(), b.len()), (7, 7));
        let cubic = build_ne_mvp(&g, &TsallisParams::new(3, 1.0).unwrap()).unwrap();
        assert!(cubic.as_linear_system().is_err());
    }

    #[test]
    fn recover_examples() {
        let g = make_chicken();
        let s1 = build_ne_mvp(&g, &TsallisParams::new(1, 1.0).unwrap()).unwrap();
        let v = [0.1, 0.9, 0.3, 0.7];
        assert_eq!(recover_strategy(&v, &s1).unwrap().flatten(), v.to_vec());

        let s3 = build_ne_mvp(&g, &TsallisParams::new(3, 1.0).unwrap()).unwrap();
        let c = 0.5f64.cbrt();
        let x = recover_strategy(&[c; 4], &s3).unwrap();
        assert!(x.flatten().iter().all(|xi| (xi - 0.5).abs() < 1e-15));
        assert!(matches!(
            recover_strategy(&[c, c, -0.01, c], &s3),
            Err(Error::NegativeVariable { index: 2, .. })
        ));
        let clamped = recover_strategy(&[1.0, -1e-8, c, c], &s3).unwrap();
        assert_eq!(clamped.player(0)[1], 0.0);
    }

    #[test]
    fn residual_at_origin_and_var_map() {
        let g = random_game(&[2, 3], 1).unwrap();
        let s = build_ne_mvp(&g, &TsallisParams::new(3, 0.5).unwrap()).unwrap();
        let r = system_residual(&s, &[0.0; 5]).unwrap();
        assert_eq!(r[1], -1.0);
        assert_eq!(r[4], -1.0);
        assert!(system_residual(&s, &[0.0; 4]).is_err());
        assert_eq!(s.var_index(1, 2), 4);
        assert_eq!(s.var_owner(4), (1, 2));
        assert_eq!(s.var_owner(1), (0, 1));
    }

    // Independent path: contract the payoff tensor with x = v^tau_inv, subtract
    // the entropy term in v, project.
    fn oracle(game: &Game, params: &TsallisParams, v: &[f64]) -> Vec<f64> {
        let counts = game.action_counts();
        let vs = StrategyProfile::from_flat(counts, v).unwrap();
        let xs: Vec<Vec<f64>> = vs
            .strategies()
            .iter()
            .map(|s| s.iter().map(|x| x.powi(params.tau_inv as i32)).collect())
            .collect();
        let mut out = Vec::new();
        for (i, &m) in counts.iter().enumerate() {
            let g = contract_gradient(game, &xs, i);
            let raw: Vec<f64> = g
                .iter()
                .zip(vs.player(i))
                .map(|(gi, vi)| gi - params.gamma(m) * vi)
                .collect();
            out.extend_from_slice(&project_tangent(&raw).unwrap()[..m - 1]);
            out.push(xs[i].iter().sum::<f64>() - 1.0);
        }
        out
    }

    #[test]
    fn residual_matches_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (seed, counts) in [vec![2, 2], vec![3, 2], vec![2, 2, 2], vec![2, 3, 2]].into_iter().enumerate() {
            let g = random_game(&counts, seed as u64).unwrap();
            for tinv in [1, 3] {
                let p = TsallisParams::new(tinv, 0.7).unwrap();
                let s = build_ne_mvp(&g, &p).unwrap();
                for _ in 0..20 {
                    let v: Vec<f64> = (0..s.n_v()).map(|_| rng.random_range(-1.0..1.5)).collect();
                    let a = system_residual(&s, &v).unwrap();
                    let b = oracle(&g, &p, &v);
                    for (x, y) in a.iter().zip(&b) {
                        assert!((x - y).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn dropped_row_is_minus_sum_of_kept() {
        let g = random_game(&[3, 3], 2).unwrap();
        let p = TsallisParams::new(1, 1.0).unwrap();
        let s = build_ne_mvp(&g, &p).unwrap();
        let v = [0.2, 0.5, 0.3, 0.1, 0.6, 0.3];
        let vs = StrategyProfile::from_flat(&[3, 3], &v).unwrap();
        let gr = contract_gradient(&g, vs.strategies(), 0);
        let raw: Vec<f64> = gr.iter().zip(&v[..3]).map(|(a, b)| a - 3.0 * b).collect();
        let full = project_tangent(&raw).unwrap();
        let r = system_residual(&s, &v).unwrap();
        assert!((full[2] + r[0] + r[1]).abs() < 1e-14);
    }
}
