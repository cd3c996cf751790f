//! Tsallis-entropy regularization, best responses and exploitability.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{check_simplex, expected_utility, gradient, Game, StrategyProfile, SIMPLEX_TOL};

/// Regularization strength. The per-player weight is `gamma_tilde * |A_i|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsallisParams {
    pub tau_inv: u32,
    pub gamma_tilde: f64,
}

impl TsallisParams {
    pub fn new(tau_inv: u32, gamma_tilde: f64) -> Result<Self> {
        let p = Self { tau_inv, gamma_tilde };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_inv < 1 {
            return Err(Error::InvalidArgument("tau_inv must be at least 1".into()));
        }
        if !(self.gamma_tilde > 0.0 && self.gamma_tilde <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma_tilde must lie in (0, 1], got {}",
                self.gamma_tilde
            )));
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.tau_inv as f64
    }

    /// Entropy weight for a player with `num_actions` actions.
    pub fn gamma(&self, num_actions: usize) -> f64 {
        self.gamma_tilde * num_actions as f64
    }
}

/// Projection onto the tangent space of the simplex: `g - mean(g)`.
pub fn project_tangent(g: &[f64]) -> Result<Vec<f64>> {
    if g.is_empty() {
        return Err(Error::InvalidArgument("cannot project an empty vector".into()));
    }
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    Ok(g.iter().map(|v| v - mean).collect())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1], got {tau}")));
    }
    Ok(())
}

/// `gamma / (tau + 1) * (1 - sum x^(tau + 1))`.
pub fn tsallis_entropy(x: &[f64], tau: f64, gamma: f64) -> Result<f64> {
    check_tau(tau)?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    check_simplex(x, SIMPLEX_TOL).map_err(|reason| Error::OffSimplex { player: 0, reason })?;
    Ok(entropy_unchecked(x, tau, gamma))
}

fn entropy_unchecked(x: &[f64], tau: f64, gamma: f64) -> f64 {
    let s: f64 = x.iter().map(|&v| v.max(0.0).powf(tau + 1.0)).sum();
    gamma / (tau + 1.0) * (1.0 - s)
}

/// Gradient of the regularized utility, `grad - gamma * x^tau`, with
/// `gamma = gamma_tilde * |A_i|`.
pub fn tsallis_gradient(
    game: &Game,
    profile: &StrategyProfile,
    player: usize,
    params: &TsallisParams,
) -> Result<Vec<f64>> {
    params.validate()?;
    let grad = gradient(game, profile, player)?;
    let x = profile.player(player);
    if let Some(&v) = x.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositiveEntry { player, value: v });
    }
    Ok(regularized_gradient(&grad, x, params.tau(), params.gamma(x.len())))
}

/// `grad - gamma * x^tau` for an explicit weight.
pub fn regularized_gradient(grad: &[f64], x: &[f64], tau: f64, gamma: f64) -> Vec<f64> {
    grad.iter()
        .zip(x)
        .map(|(g, xi)| g - gamma * xi.powf(tau))
        .collect()
}

/// Closed-form regularized best response `grad^(1/tau) / sum grad^(1/tau)`.
pub fn tsallis_best_response(
    game: &Game,
    profile: &StrategyProfile,
    player: usize,
    tau: f64,
) -> Result<Vec<f64>> {
    let grad = gradient(game, profile, player)?;
    best_response_from_gradient(&grad, tau).map_err(|e| match e {
        Error::NonPositiveGradient { value, .. } => Error::NonPositiveGradient { player, value },
        other => other,
    })
}

pub fn best_response_from_gradient(grad: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    if grad.is_empty() {
        return Err(Error::InvalidArgument("empty gradient".into()));
    }
    if let Some(&v) = grad.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositiveGradient { player: 0, value: v });
    }
    // Work in log space so large 1/tau does not overflow or underflow.
    let logs: Vec<f64> = grad.iter().map(|g| g.ln() / tau).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / z).collect())
}

/// Exact maximizer of `<grad, y> + H^tau(y)` over the simplex for a fixed
/// weight `gamma`. The maximizer is `((grad - c)_+ / gamma)^(1/tau)`; the
/// offset `c` is found by bisection.
pub fn regularized_best_response(grad: &[f64], tau: f64, gamma: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    if grad.is_empty() || !(gamma > 0.0) {
        return Err(Error::InvalidArgument("need a non-empty gradient and gamma > 0".into()));
    }
    let top = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass = |c: f64| -> f64 {
        grad.iter()
            .map(|g| ((g - c).max(0.0) / gamma).powf(1.0 / tau))
            .sum()
    };
    // mass(top - gamma) >= 1 and mass(top) = 0; mass is non-increasing in c.
    let (mut lo, mut hi) = (top - gamma, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * (1.0 + top.abs()) {
            break;
        }
    }
    let y: Vec<f64> = grad
        .iter()
        .map(|g| ((g - lo).max(0.0) / gamma).powf(1.0 / tau))
        .collect();
    let s: f64 = y.iter().sum();
    Ok(y.into_iter().map(|v| v / s).collect())
}

/// Per-player unilateral gain plus its maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exploitability {
    pub per_player: Vec<f64>,
    pub max: f64,
}

impl Exploitability {
    fn from_vec(per_player: Vec<f64>) -> Self {
        let max = per_player.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { per_player, max }
    }
}

/// `eps_i = max(grad_i) - u_i` for every player.
pub fn exploitability(game: &Game, profile: &StrategyProfile) -> Result<Exploitability> {
    profile.check_shape(game)?;
    let mut out = Vec::with_capacity(game.num_players());
    for i in 0..game.num_players() {
        let grad = gradient(game, profile, i)?;
        let u = expected_utility(game, profile, i)?;
        let best = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push(best - u);
    }
    Ok(Exploitability::from_vec(out))
}

/// Exploitability in the regularized game with weight `gamma_tilde * |A_i|`:
/// `max_y [<grad, y> + H(y)] - [u_i + H(x_i)]`.
pub fn regularized_exploitability(
    game: &Game,
    profile: &StrategyProfile,
    params: &TsallisParams,
) -> Result<Exploitability> {
    params.validate()?;
    profile.check_shape(game)?;
    let tau = params.tau();
    let mut out = Vec::with_capacity(game.num_players());
    for i in 0..game.num_players() {
        let x = profile.player(i);
        let gamma = params.gamma(x.len());
        let grad = gradient(game, profile, i)?;
        let y = regularized_best_response(&grad, tau, gamma)?;
        let value = |z: &[f64]| -> f64 {
            z.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>() + entropy_unchecked(z, tau, gamma)
        };
        out.push((value(&y) - value(x)).max(0.0));
    }
    Ok(Exploitability::from_vec(out))
}

/// Upper bounds on exploitability for an interior profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploitabilityBound {
    pub tight: Vec<f64>,
    pub loose: Vec<f64>,
    pub max_tight: f64,
    pub max_loose: f64,
}

/// Bounds from the regularized game with weight `gamma = |A_i|`, which keeps
/// every regularized best response interior for payoffs in `(0, 1]`. Only
/// `params.tau_inv` is used.
///
/// Per player, with `r = sqrt(2) * ||proj(grad - gamma x^tau)||`:
/// - tight: `H(x_i) + tau * H(y_i) + r` with `y_i` the regularized best response;
/// - loose: `tau * |A_i| ln |A_i| + r`.
pub fn exploitability_bound(
    game: &Game,
    profile: &StrategyProfile,
    params: &TsallisParams,
) -> Result<ExploitabilityBound> {
    params.validate()?;
    profile.check_shape(game)?;
    let tau = params.tau();
    let (mut tight, mut loose) = (Vec::new(), Vec::new());
    for i in 0..game.num_players() {
        let x = profile.player(i);
        if let Some(&v) = x.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::NonPositiveEntry { player: i, value: v });
        }
        let m = x.len() as f64;
        let gamma = m;
        let grad = gradient(game, profile, i)?;
        let residual = std::f64::consts::SQRT_2
            * norm2(&project_tangent(&regularized_gradient(&grad, x, tau, gamma))?);
        let y = regularized_best_response(&grad, tau, gamma)?;
        tight.push(entropy_unchecked(x, tau, gamma) + tau * entropy_unchecked(&y, tau, gamma) + residual);
        loose.push(tau * m * m.ln() + residual);
    }
    let fmax = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ExploitabilityBound {
        max_tight: fmax(&tight),
        max_loose: fmax(&loose),
        tight,
        loose,
    })
}

/// Largest `tau` for which the entropy term `|A|(1 - |A|^-tau)` of the bound
/// stays below `epsilon`: `1 - log_|A| (|A| - epsilon)`.
pub fn tau_for_target_epsilon(num_actions: usize, epsilon: f64) -> Result<f64> {
    let m = num_actions as f64;
    if num_actions < 2 {
        return Err(Error::InvalidArgument("need at least two actions".into()));
    }
    if !(0.0..m).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in [0, {num_actions}), got {epsilon}"
        )));
    }
    Ok(1.0 - (m - epsilon).ln() / m.ln())
}

/// Monte-Carlo check that `argmax_l (tau * g_l + ln grad_l)` with Gumbel
/// noise `g` is distributed as the closed-form best response. Returns the
/// total-variation distance between the empirical and exact distributions.
pub fn gumbel_br_check(
    game: &Game,
    profile: &StrategyProfile,
    player: usize,
    tau: f64,
    num_samples: usize,
    seed: u64,
) -> Result<f64> {
    let grad = gradient(game, profile, player)?;
    gumbel_check_gradient(&grad, tau, num_samples, seed)
}

pub fn gumbel_check_gradient(grad: &[f64], tau: f64, num_samples: usize, seed: u64) -> Result<f64> {
    if num_samples == 0 {
        return Err(Error::InvalidArgument("num_samples must be at least 1".into()));
    }
    let br = best_response_from_gradient(grad, tau)?;
    let logs: Vec<f64> = grad.iter().map(|g| g.ln()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; grad.len()];
    for _ in 0..num_samples {
        let mut best = (0, f64::NEG_INFINITY);
        for (l, lg) in logs.iter().enumerate() {
            let u: f64 = rng.sample(Open01);
            let score = tau * -(-u.ln()).ln() + lg;
            if score > best.1 {
                best = (l, score);
            }
        }
        counts[best.0] += 1;
    }
    let n = num_samples as f64;
    Ok(0.5
        * counts
            .iter()
            .zip(&br)
            .map(|(&c, p)| (c as f64 / n - p).abs())
            .sum::<f64>())
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{make_chicken, random_game};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_tangent(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(project_tangent(&[1.0, 0.0]).unwrap(), vec![0.5, -0.5]);
        assert!(project_tangent(&[]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(tsallis_entropy(&[0.0, 1.0, 0.0], 0.3, 2.0).unwrap(), 0.0);
        assert!(close(tsallis_entropy(&[0.5, 0.5], 1.0, 2.0).unwrap(), 0.5, 1e-15));
        assert!(tsallis_entropy(&[0.7, 0.7], 1.0, 2.0).is_err());
        for m in [2usize, 3] {
            let u = tsallis_entropy(&vec![1.0 / m as f64; m], 0.5, 1.0).unwrap();
            let steps = 40;
            for a in 0..=steps {
                for b in 0..=(steps - a) {
                    let mut x = vec![a as f64 / steps as f64, b as f64 / steps as f64];
                    if m == 2 {
                        if a + b != steps {
                            continue;
                        }
                    } else {
                        x.push(1.0 - x[0] - x[1]);
                    }
                    assert!(tsallis_entropy(&x, 0.5, 1.0).unwrap() <= u + 1e-12);
                }
            }
        }
    }

    #[test]
    fn tsallis_gradient_constant_game() {
        let g = Game::new(vec![3, 2], vec![vec![0.4; 6], vec![0.4; 6]]).unwrap();
        let x = StrategyProfile::uniform(&g);
        let p = TsallisParams::new(1, 1.0).unwrap();
        for v in tsallis_gradient(&g, &x, 0, &p).unwrap() {
            assert!(close(v, -0.6, 1e-15));
        }
        let pure = StrategyProfile::new(vec![vec![1.0, 0.0, 0.0], vec![0.5, 0.5]]);
        assert!(matches!(
            tsallis_gradient(&g, &pure, 0, &p),
            Err(Error::NonPositiveEntry { .. })
        ));
    }

    #[test]
    fn gradient_vanishes_at_best_response_with_norm_weight() {
        let grad = [0.3, 0.8, 0.55];
        for tau in [1.0, 1.0 / 3.0, 0.2] {
            let br = best_response_from_gradient(&grad, tau).unwrap();
            let gamma = grad.iter().map(|g: &f64| g.powf(1.0 / tau)).sum::<f64>().powf(tau);
            for v in regularized_gradient(&grad, &br, tau, gamma) {
                assert!(v.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tsallis_gradient_matches_finite_differences() {
        for seed in 0..10 {
            let g = random_game(&[2, 2], seed).unwrap();
            let x = StrategyProfile::new(vec![vec![0.3, 0.7], vec![0.6, 0.4]]);
            let p = TsallisParams::new(3, 0.5).unwrap();
            let tg = tsallis_gradient(&g, &x, 0, &p).unwrap();
            let f = |x0: Vec<f64>| {
                let prof = StrategyProfile::new(vec![x0.clone(), x.player(1).to_vec()]);
                expected_utility(&g, &prof, 0).unwrap() + entropy_unchecked(&x0, p.tau(), p.gamma(2))
            };
            let h = 1e-6;
            for l in 0..2 {
                let mut up = x.player(0).to_vec();
                let mut dn = up.clone();
                up[l] += h;
                dn[l] -= h;
                let fd = (f(up) - f(dn)) / (2.0 * h);
                assert!((fd - tg[l]).abs() <= 1e-5 * tg[l].abs().max(1.0));
            }
        }
    }

    #[test]
    fn best_response_examples() {
        let br = best_response_from_gradient(&[0.62885, 0.505], 1.0).unwrap();
        assert!(close(br[0], 0.5546148, 1e-6));
        assert!(close(br[0] + br[1], 1.0, 1e-15));
        let uni = best_response_from_gradient(&[0.4; 4], 0.25).unwrap();
        assert!(uni.iter().all(|v| close(*v, 0.25, 1e-15)));
        let sharp = best_response_from_gradient(&[0.5, 0.6, 0.55], 1.0 / 9.0).unwrap();
        assert!(sharp[1] > sharp[2] && sharp[2] > sharp[0]);
        assert!(matches!(
            best_response_from_gradient(&[0.5, 0.0], 1.0),
            Err(Error::NonPositiveGradient { .. })
        ));
        let g = make_chicken();
        let x = StrategyProfile::uniform(&g);
        let br = tsallis_best_response(&g, &x, 0, 1.0).unwrap();
        assert!(close(br[0], 0.5546148, 1e-6));
    }

    #[test]
    fn regularized_best_response_matches_closed_form_when_interior() {
        let grad = [0.62885, 0.505];
        let tau = 1.0 / 3.0;
        let gamma = grad.iter().map(|g: &f64| g.powf(3.0)).sum::<f64>().powf(tau);
        let a = regularized_best_response(&grad, tau, gamma).unwrap();
        let b = best_response_from_gradient(&grad, tau).unwrap();
        assert!(close(a[0], b[0], 1e-12));
        // A weak regularizer pushes the response to the boundary.
        let edge = regularized_best_response(&[1.0, 0.1], 1.0, 0.5).unwrap();
        assert_eq!(edge, vec![1.0, 0.0]);
    }

    #[test]
    fn exploitability_examples() {
        let g = make_chicken();
        let x = StrategyProfile::uniform(&g);
        let e = exploitability(&g, &x).unwrap();
        assert!(close(e.per_player[0], 0.061925, 1e-12));
        assert_eq!(e.max, e.per_player[0].max(e.per_player[1]));
        let shifted = exploitability(&g.with_offset(0, 3.0), &x).unwrap();
        assert!(close(shifted.per_player[0], e.per_player[0], 1e-12));
        // Both players swerving is not an equilibrium; straight vs swerve is.
        let ne = StrategyProfile::pure(&g, &[1, 0]).unwrap();
        assert_eq!(exploitability(&g, &ne).unwrap().max, 0.0);
    }

    #[test]
    fn bound_examples() {
        assert!(close(tau_for_target_epsilon(2, 1.0).unwrap(), 1.0, 1e-15));
        assert!(close(tau_for_target_epsilon(2, 0.0).unwrap(), 0.0, 1e-15));
        assert!(close(tau_for_target_epsilon(3, 0.5).unwrap(), 0.165956, 1e-6));
        assert!(tau_for_target_epsilon(2, 2.0).is_err());
        for m in 2..8 {
            let m = m as f64;
            for k in 1..=10 {
                let tau = k as f64 / 10.0;
                assert!(m * (1.0 - m.powf(-tau)) <= m * m.ln() * tau + 1e-15);
            }
        }
        let g = make_chicken();
        let p = TsallisParams::new(3, 1.0).unwrap();
        let x = StrategyProfile::uniform(&g);
        let b = exploitability_bound(&g, &x, &p).unwrap();
        let e = exploitability(&g, &x).unwrap();
        for i in 0..2 {
            assert!(e.per_player[i] <= b.loose[i]);
            assert!(e.per_player[i] <= b.tight[i]);
        }
        let pure = StrategyProfile::pure(&g, &[0, 0]).unwrap();
        assert!(exploitability_bound(&g, &pure, &p).is_err());
    }

    #[test]
    fn gumbel_examples() {
        let tv = gumbel_check_gradient(&[0.5, 0.5, 0.5], 0.5, 200_000, 1).unwrap();
        assert!(tv < 0.01);
        assert!(gumbel_check_gradient(&[0.5], 1.5, 10, 1).is_err());
        assert!(gumbel_check_gradient(&[0.5], 1.0, 0, 1).is_err());
    }
}
