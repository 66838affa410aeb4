//! The asymptotic allocation objective L(λ) = (1/S) Σ_s σ²(s)/Σ_a λ(s,a),
//! its gradient and smoothness constant, a certified Frank-Wolfe solver over
//! Λ_η̲, the mixing-regularized objective and its spectral-norm proxy, and a
//! Monte-Carlo estimator of the finite-budget loss.

use crate::error::{Error, Result};
use crate::mdp::{chain_from_policy, slem_of, MdpModel, StationaryPolicy};
use crate::polytope::{lambda_to_policy, linear_min_oracle, StateActionDist};
use crate::rng::{rng_from, SeedableStream};
use crate::scalar::Real;
use crate::sim::policy_step;
use crate::stats::ell_n;

/// Objective value from state marginals alone (the loss only depends on them).
pub fn loss_marginals<F: Real>(sigma2: &[F], marginals: &[F]) -> Result<F> {
    let s_n = sigma2.len();
    let mut total = F::zero();
    for (s, (&var, &m)) in sigma2.iter().zip(marginals).enumerate() {
        if !(m > F::zero()) {
            return Err(Error::ZeroMarginal { state: s });
        }
        total = total + var / m;
    }
    Ok(total / F::of(s_n as f64))
}

/// L(λ) = (1/S) Σ_s σ²(s)/Σ_a λ(s,a).
pub fn loss_lambda<F: Real>(mdp: &MdpModel<F>, lam: &StateActionDist<F>) -> Result<F> {
    loss_marginals(mdp.sigma2(), &lam.marginals())
}

/// Gradient table ∂L/∂λ(s,a) = −(1/S)·σ²(s)/(Σ_b λ(s,b))², identical across
/// the actions of a state.
pub fn grad_loss<F: Real>(mdp: &MdpModel<F>, lam: &StateActionDist<F>) -> Result<Vec<Vec<F>>> {
    grad_from_marginals(mdp.sigma2(), &lam.marginals(), mdp.num_actions())
}

fn grad_from_marginals<F: Real>(
    sigma2: &[F],
    marginals: &[F],
    num_actions: usize,
) -> Result<Vec<Vec<F>>> {
    let s_n = sigma2.len();
    let scale = F::one() / F::of(s_n as f64);
    sigma2
        .iter()
        .zip(marginals)
        .enumerate()
        .map(|(s, (&var, &m))| {
            if !(m > F::zero()) {
                return Err(Error::ZeroMarginal { state: s });
            }
            Ok(vec![-scale * var / (m * m); num_actions])
        })
        .collect()
}

/// Smoothness constant bound on Λ_η̲: (A/S) Σ_s σ²(s)/(2η̲)³.
pub fn smoothness_bound<F: Real>(mdp: &MdpModel<F>, eta_floor: F) -> F {
    assert!(eta_floor > F::zero(), "eta_floor must be positive");
    let total: F = mdp.sigma2().iter().copied().sum();
    let floor2 = F::of(2.0) * eta_floor;
    F::of(mdp.num_actions() as f64) / F::of(mdp.num_states() as f64) * total
        / (floor2 * floor2 * floor2)
}

/// Step-size policy for the Frank-Wolfe iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// γ_k = 2/(k+2)
    Harmonic,
    /// exact minimization along the segment (bisection on the derivative)
    LineSearch,
}

#[derive(Debug, Clone, Copy)]
pub struct FwOptions {
    pub step_rule: StepRule,
    /// away steps give linear convergence on this polytope; without them the
    /// tiny optimal marginals of badly-conditioned instances make the plain
    /// method crawl
    pub away_steps: bool,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions { step_rule: StepRule::LineSearch, away_steps: true }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult<F> {
    pub lam_star: StateActionDist<F>,
    pub value: F,
    /// certified duality gap ⟨∇L(λ), λ − ψ⟩ at the returned iterate
    pub fw_gap: F,
    pub iterations: usize,
    pub policy: StationaryPolicy<F>,
    /// false when the iteration budget ran out before the gap target
    pub converged: bool,
}

impl<F: Real> SolveResult<F> {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "lam": self.lam_star.to_json()["lam"],
            "value": self.value.to_f64_lossy(),
            "fw_gap": self.fw_gap.to_f64_lossy(),
            "iterations": self.iterations,
            "policy": self.policy.to_json()["probs"],
            "converged": self.converged,
        })
    }
}

/// Minimizes L over Λ_η̲ with Frank-Wolfe, default configuration (away steps
/// plus exact line search).
pub fn fw_solve<F: Real>(
    mdp: &MdpModel<F>,
    eta_floor: F,
    tol: F,
    max_iters: usize,
) -> Result<SolveResult<F>> {
    fw_solve_with(mdp, eta_floor, tol, max_iters, FwOptions::default())
}

pub fn fw_solve_with<F: Real>(
    mdp: &MdpModel<F>,
    eta_floor: F,
    tol: F,
    max_iters: usize,
    options: FwOptions,
) -> Result<SolveResult<F>> {
    let s_n = mdp.num_states();
    let a_n = mdp.num_actions();
    let sigma2 = mdp.sigma2().to_vec();
    let dim = s_n * a_n;

    let oracle = |grad_flat: &[F]| -> Result<Vec<F>> {
        let table: Vec<Vec<F>> = (0..s_n)
            .map(|s| grad_flat[s * a_n..(s + 1) * a_n].to_vec())
            .collect();
        Ok(linear_min_oracle(mdp, &table, eta_floor)?.as_flat())
    };
    let marginals_of = |x: &[F]| -> Vec<F> {
        (0..s_n)
            .map(|s| x[s * a_n..(s + 1) * a_n].iter().copied().sum())
            .collect()
    };
    let grad_flat_of = |x: &[F]| -> Result<Vec<F>> {
        let g = grad_from_marginals(&sigma2, &marginals_of(x), a_n)?;
        Ok(g.into_iter().flatten().collect())
    };
    let dot = |a: &[F], b: &[F]| -> F { a.iter().zip(b).map(|(&x, &y)| x * y).sum() };

    // start from a vertex of the polytope so away-step bookkeeping is exact
    let x0 = oracle(&vec![F::zero(); dim])?;
    let mut x = x0.clone();
    // active vertex set with convex weights (used only for away steps)
    let mut active: Vec<(Vec<F>, F)> = vec![(x0, F::one())];

    let same_vertex = |a: &[F], b: &[F]| -> bool {
        a.iter().zip(b).all(|(&p, &q)| (p - q).abs() < F::of(1e-9))
    };

    let mut iterations = 0;
    let mut fw_gap;
    let mut converged = false;
    loop {
        let g = grad_flat_of(&x)?;
        let fw_vertex = oracle(&g)?;
        fw_gap = dot(&g, &x) - dot(&g, &fw_vertex);
        if fw_gap <= tol {
            converged = true;
            break;
        }
        if iterations >= max_iters {
            break;
        }

        // choose between the forward and the away direction
        let mut use_away = false;
        let mut away_idx = 0;
        if options.away_steps {
            if let Some((idx, _)) = active
                .iter()
                .enumerate()
                .map(|(i, (v, _))| (i, dot(&g, v)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            {
                let v_a = &active[idx].0;
                let fw_descent = fw_gap;
                let away_descent = dot(&g, v_a) - dot(&g, &x);
                if away_descent > fw_descent && active[idx].1 < F::one() {
                    use_away = true;
                    away_idx = idx;
                }
            }
        }

        let (direction, gamma_max): (Vec<F>, F) = if use_away {
            let alpha = active[away_idx].1;
            let d: Vec<F> = x
                .iter()
                .zip(&active[away_idx].0)
                .map(|(&xi, &vi)| xi - vi)
                .collect();
            (d, alpha / (F::one() - alpha))
        } else {
            let d: Vec<F> = fw_vertex.iter().zip(&x).map(|(&vi, &xi)| vi - xi).collect();
            (d, F::one())
        };

        let gamma = match options.step_rule {
            StepRule::Harmonic => {
                (F::of(2.0) / F::of((iterations + 2) as f64)).min(gamma_max)
            }
            StepRule::LineSearch => {
                line_search(&sigma2, &marginals_of(&x), &marginals_of(&direction), gamma_max)
            }
        };

        for (xi, di) in x.iter_mut().zip(&direction) {
            *xi = (*xi + gamma * *di).max(F::zero());
        }
        // renormalize drift from rounding
        let total: F = x.iter().copied().sum();
        for xi in x.iter_mut() {
            *xi = *xi / total;
        }

        if options.away_steps {
            if use_away {
                let scale = F::one() + gamma;
                for (_, w) in active.iter_mut() {
                    *w = *w * scale;
                }
                active[away_idx].1 = active[away_idx].1 - gamma;
            } else {
                let scale = F::one() - gamma;
                for (_, w) in active.iter_mut() {
                    *w = *w * scale;
                }
                match active.iter_mut().find(|(v, _)| same_vertex(v, &fw_vertex)) {
                    Some((_, w)) => *w = *w + gamma,
                    None => active.push((fw_vertex.clone(), gamma)),
                }
            }
            active.retain(|(_, w)| *w > F::of(1e-14));
            let mass: F = active.iter().map(|(_, w)| *w).sum();
            for (_, w) in active.iter_mut() {
                *w = *w / mass;
            }
        }
        iterations += 1;
    }

    let lam_star = StateActionDist::from_flat(&x, s_n, a_n)?;
    let value = loss_lambda(mdp, &lam_star)?;
    let policy = lambda_to_policy(&lam_star, true)?;
    Ok(SolveResult { lam_star, value, fw_gap, iterations, policy, converged })
}

/// Exact line search along marginals m + γ·d for the loss: bisection on the
/// directional derivative, which is increasing in γ by convexity.
fn line_search<F: Real>(sigma2: &[F], m: &[F], d: &[F], gamma_max: F) -> F {
    let phi_prime = |gamma: F| -> F {
        let s_n = F::of(sigma2.len() as f64);
        let mut total = F::zero();
        for ((&var, &mi), &di) in sigma2.iter().zip(m).zip(d) {
            let cur = mi + gamma * di;
            total = total - var * di / (cur * cur);
        }
        total / s_n
    };
    if phi_prime(gamma_max) <= F::zero() {
        return gamma_max;
    }
    let mut lo = F::zero();
    let mut hi = gamma_max;
    for _ in 0..100 {
        let mid = (lo + hi) * F::of(0.5);
        if phi_prime(mid) < F::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * F::of(0.5)
}

/// The mixing-regularized loss of a policy and its spectral-norm proxy.
#[derive(Debug, Clone, Copy)]
pub struct RegularizedLoss<F> {
    /// asymptotic loss L(π, η_π)
    pub base: F,
    /// L + ℓ_n(π): the exact regularized objective
    pub exact: F,
    /// L + ρ_n/(1 − ‖·‖): the convex proxy; +∞ when the norm reaches 1
    pub proxy: F,
    pub slem_norm: F,
    pub norm_at_one: bool,
}

/// Evaluates the regularized loss L(π,η_π) + ℓ_n(π) and its proxy with
/// ρ_n = S/n. A spectral norm at 1 (non-mixing chain) makes the proxy +∞,
/// reported through the flag rather than an error so callers can compare
/// policies anyway.
pub fn loss_regularized<F: Real>(
    mdp: &MdpModel<F>,
    pi: &StationaryPolicy<F>,
    n: u64,
) -> Result<RegularizedLoss<F>> {
    let analysis = chain_from_policy(mdp, pi)?;
    let base = loss_marginals(mdp.sigma2(), &analysis.eta)?;
    // a vanishing spectral gap sends the finite-time correction to infinity;
    // report that rather than failing so policies stay comparable
    let exact = match ell_n(mdp, pi, n, None) {
        Ok(l) => base + l,
        Err(Error::GapTooSmall(_)) => F::infinity(),
        Err(e) => return Err(e),
    };
    let norm = slem_of(&analysis.kernel, &analysis.eta)?;
    let rho = F::of(mdp.num_states() as f64) / F::of(n as f64);
    let norm_at_one = norm >= F::one() - F::of(1e-12);
    let proxy = if norm_at_one {
        F::infinity()
    } else {
        base + rho / (F::one() - norm)
    };
    Ok(RegularizedLoss { base, exact, proxy, slem_norm: norm, norm_at_one })
}

/// Monte-Carlo estimate of the finite-budget loss
/// L_n(π) = (1/S) Σ_s σ²(s) E[n/T_{π,n}(s)], with every counter starting at 1
/// so the expectation is always finite. Returns (mean, standard error).
pub fn finite_loss_mc<F: Real>(
    mdp: &MdpModel<F>,
    pi: &StationaryPolicy<F>,
    n: u64,
    runs: usize,
    seed: u64,
) -> (F, F) {
    assert!(runs >= 1, "need at least one run");
    assert!(n >= 1, "need a positive budget");
    let s_n = mdp.num_states();
    let stream = SeedableStream::new(seed);
    let mut values = Vec::with_capacity(runs);
    for r in 0..runs {
        let mut rng = rng_from(stream.derive(&[0x10C, r as u64]));
        let mut counts = vec![1u64; s_n];
        let mut s = (rng.random_range(0..s_n as u64)) as usize;
        for _ in 1..n {
            let (_, next) = policy_step(mdp, pi, s, &mut rng);
            s = next;
            counts[s] += 1;
        }
        let mut loss = F::zero();
        for (&var, &t) in mdp.sigma2().iter().zip(&counts) {
            loss = loss + var * F::of(n as f64) / F::of(t as f64);
        }
        values.push(loss / F::of(s_n as f64));
    }
    let mean: F = values.iter().copied().sum::<F>() / F::of(runs as f64);
    let var: F = values
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<F>()
        / F::of(runs as f64);
    let stderr = (var / F::of(runs as f64)).sqrt();
    (mean, stderr)
}

use rand::Rng;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{garnet_generate, three_state_mdp, three_state_selfloop_policy, MdpModel,
                     ObsMode};
    use crate::polytope::policy_to_lambda;
    use crate::rng::rng_from;
    use std::time::Instant;

    fn swap_mdp() -> MdpModel<f64> {
        let trans = vec![
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
        ];
        MdpModel::new(trans, vec![1.0, 1.0], vec![0.0, 0.0], 2.0, ObsMode::Gaussian).unwrap()
    }

    #[test]
    fn loss_matches_hand_evaluations() {
        assert!((loss_marginals(&[1.0f64, 1.0], &[0.5, 0.5]).unwrap() - 2.0).abs() < 1e-15);
        let v = loss_marginals(
            &[1.0f64, 0.001, 1.0],
            &[5.0 / 11.0, 1.0 / 11.0, 5.0 / 11.0],
        )
        .unwrap();
        assert!((v - (2.2 + 0.011 + 2.2) / 3.0).abs() < 1e-12);
        assert!((v - 1.4703).abs() < 1e-3);
        // homogeneity in the variances
        let scaled =
            loss_marginals(&[3.0f64, 0.003, 3.0], &[5.0 / 11.0, 1.0 / 11.0, 5.0 / 11.0]).unwrap();
        assert!((scaled - 3.0 * v).abs() < 1e-12);
        assert!(loss_marginals(&[1.0f64], &[0.0]).is_err());
    }

    #[test]
    fn gradient_matches_example_and_is_constant_per_state() {
        let mdp = swap_mdp();
        let lam = StateActionDist::uniform(2, 2);
        let g = grad_loss(&mdp, &lam).unwrap();
        for s in 0..2 {
            assert!((g[s][0] - -2.0).abs() < 1e-12);
            assert_eq!(g[s][0], g[s][1]);
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = rng_from(17);
        let mdp = garnet_generate::<f64>(4, 3, 2, 0.05, 5.0, false, 42).unwrap();
        for _ in 0..50 {
            // random interior distribution (not necessarily in Λ; the loss
            // and gradient are defined for any positive marginals)
            let mut flat: Vec<f64> = (0..12).map(|_| 0.05 + rng.random::<f64>()).collect();
            let total: f64 = flat.iter().sum();
            flat.iter_mut().for_each(|v| *v /= total);
            let lam = StateActionDist::from_flat(&flat, 4, 3).unwrap();
            let g = grad_loss(&mdp, &lam).unwrap();
            let h = 1e-6;
            for s in 0..4 {
                for a in 0..3 {
                    let mut up = flat.clone();
                    up[s * 3 + a] += h;
                    let mut down = flat.clone();
                    down[s * 3 + a] -= h;
                    let f = |v: &[f64]| {
                        let marg: Vec<f64> =
                            (0..4).map(|i| v[i * 3..(i + 1) * 3].iter().sum()).collect();
                        loss_marginals(mdp.sigma2(), &marg).unwrap()
                    };
                    let fd = (f(&up) - f(&down)) / (2.0 * h);
                    let rel = (g[s][a] - fd).abs() / g[s][a].abs().max(1.0);
                    assert!(rel < 1e-6, "({s},{a}): {} vs {fd}", g[s][a]);
                }
            }
        }
    }

    #[test]
    fn smoothness_bound_dominates_sampled_hessian_eigenvalues() {
        let mdp = garnet_generate::<f64>(4, 3, 2, 0.05, 5.0, false, 43).unwrap();
        let floor = 0.01;
        let bound = smoothness_bound(&mdp, floor);
        assert!((smoothness_bound(&mdp, 2.0 * floor) - bound / 8.0).abs() < 1e-9 * bound);
        let mut rng = rng_from(3);
        for _ in 0..100 {
            // marginals respecting the floor; the Hessian is block diagonal
            // per state with one nonzero eigenvalue (2/S)σ²A/m³ per block
            let mut m: Vec<f64> = (0..4).map(|_| 2.0 * floor + rng.random::<f64>()).collect();
            let total: f64 = m.iter().sum();
            let scale = (1.0 - 8.0 * floor) / (total - 8.0 * floor);
            // rescale the excess above the floor so the sum is 1
            m.iter_mut().for_each(|v| *v = 2.0 * floor + (*v - 2.0 * floor) * scale);
            let max_eig = mdp
                .sigma2()
                .iter()
                .zip(&m)
                .map(|(&var, &mi)| 2.0 * var * 3.0 / (4.0 * mi * mi * mi))
                .fold(0.0f64, f64::max);
            assert!(bound >= max_eig, "{bound} < {max_eig}");
        }
    }

    #[test]
    fn solver_finds_the_symmetric_optimum() {
        let mdp = swap_mdp();
        let result = fw_solve(&mdp, 0.001, 1e-8, 10_000).unwrap();
        assert!(result.converged);
        assert!((result.value - 2.0).abs() < 1e-7);
        let marginals = result.lam_star.marginals();
        assert!((marginals[0] - 0.5).abs() < 1e-7);
        assert!(result.fw_gap <= 1e-8);
    }

    #[test]
    fn solver_matches_the_analytic_three_state_optimum() {
        // minimizing 1/m1 + ε/m2 + 1/m3 over the simplex gives
        // m2 = √ε/(2+√ε) and m1 = m3 = 1/(2+√ε)
        let eps = 0.001f64;
        let mdp = three_state_mdp(eps);
        let start = Instant::now();
        let result = fw_solve(&mdp, 0.001, 1e-6, 50_000).unwrap();
        let elapsed = start.elapsed();
        assert!(result.converged, "gap {}", result.fw_gap);
        let marginals = result.lam_star.marginals();
        let root = eps.sqrt();
        let want_mid = root / (2.0 + root);
        let want_end = 1.0 / (2.0 + root);
        assert!((marginals[1] - want_mid).abs() < 1e-3, "{marginals:?}");
        assert!((marginals[0] - want_end).abs() < 1e-3);
        assert!((marginals[0] - marginals[2]).abs() < 1e-3);
        assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    }

    #[test]
    fn huge_tolerance_returns_the_start_point() {
        let mdp = swap_mdp();
        let result = fw_solve(&mdp, 0.01, 1e9, 10_000).unwrap();
        assert_eq!(result.iterations, 0);
        assert!(result.converged);
    }

    #[test]
    fn harmonic_steps_also_converge_on_easy_instances() {
        let mdp = swap_mdp();
        let opts = FwOptions { step_rule: StepRule::Harmonic, away_steps: false };
        let result = fw_solve_with(&mdp, 0.001, 1e-5, 100_000, opts).unwrap();
        assert!((result.value - 2.0).abs() < 1e-4);
    }

    #[test]
    fn iteration_budget_returns_best_effort_iterate() {
        let mdp = three_state_mdp(0.001f64);
        let result = fw_solve(&mdp, 0.001, 1e-12, 3).unwrap();
        assert!(!result.converged);
        assert_eq!(result.iterations, 3);
        assert!(result.fw_gap > 1e-12);
        assert!(result.value.is_finite());
    }

    #[test]
    fn objective_is_convex_along_random_segments() {
        let mdp = garnet_generate::<f64>(4, 2, 3, 0.05, 5.0, false, 44).unwrap();
        let mut rng = rng_from(9);
        for trial in 0..100 {
            let random_policy = |rng: &mut rand_chacha::ChaCha8Rng| {
                let rows: Vec<Vec<f64>> = (0..4)
                    .map(|_| {
                        let raw: Vec<f64> = (0..2).map(|_| 0.05 + rng.random::<f64>()).collect();
                        let t: f64 = raw.iter().sum();
                        raw.into_iter().map(|x| x / t).collect()
                    })
                    .collect();
                StationaryPolicy::new(rows).unwrap()
            };
            let l1 = policy_to_lambda(&mdp, &random_policy(&mut rng)).unwrap();
            let l2 = policy_to_lambda(&mdp, &random_policy(&mut rng)).unwrap();
            let t = rng.random::<f64>();
            let mid = l1.blend(&l2, t);
            let lhs = loss_lambda(&mdp, &mid).unwrap();
            let rhs = (1.0 - t) * loss_lambda(&mdp, &l1).unwrap()
                + t * loss_lambda(&mdp, &l2).unwrap();
            assert!(lhs <= rhs + 1e-10, "trial {trial}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn gap_certificate_bounds_the_remaining_improvement() {
        for seed in [50u64, 51, 52] {
            let mdp = garnet_generate::<f64>(5, 3, 2, 0.01, 10.0, false, seed).unwrap();
            let coarse = fw_solve(&mdp, 0.001, 1e-4, 50_000).unwrap();
            let fine = fw_solve(&mdp, 0.001, 1e-5, 50_000).unwrap();
            assert!(
                coarse.value - fine.value <= coarse.fw_gap + 1e-12,
                "seed {seed}: improved by {} with certified gap {}",
                coarse.value - fine.value,
                coarse.fw_gap
            );
        }
    }

    #[test]
    fn regularized_loss_punishes_slow_mixing() {
        let mdp = three_state_mdp(0.001f64);
        let slow = three_state_selfloop_policy(0.97);
        let fast = StationaryPolicy::uniform(3, 2);
        let n = 1000;
        let slow_reg = loss_regularized(&mdp, &slow, n).unwrap();
        let fast_reg = loss_regularized(&mdp, &fast, n).unwrap();
        assert!(!slow_reg.norm_at_one);
        assert!(slow_reg.proxy > slow_reg.base + 10.0 * 3.0 / n as f64);
        assert!(slow_reg.slem_norm > fast_reg.slem_norm);
        assert!(slow_reg.exact > slow_reg.base);
        // a fully-mixing kernel has norm 0 and proxy exactly L + S/n
        let trans = vec![
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        ];
        let mixing =
            MdpModel::new(trans, vec![1.0f64, 1.0], vec![0.0, 0.0], 2.0, ObsMode::Gaussian).unwrap();
        let reg = loss_regularized(&mixing, &StationaryPolicy::uniform(2, 2), 100).unwrap();
        assert!(reg.slem_norm < 1e-8);
        assert!((reg.proxy - (reg.base + 2.0 / 100.0)).abs() < 1e-8);
    }

    #[test]
    fn non_mixing_policy_reports_infinite_proxy() {
        let mdp = swap_mdp();
        // both actions swap: the chain is periodic, norm 1
        let reg = loss_regularized(&mdp, &StationaryPolicy::uniform(2, 2), 100);
        let reg = reg.unwrap();
        assert!(reg.norm_at_one);
        assert!(reg.proxy.is_infinite());
    }

    #[test]
    fn monte_carlo_loss_matches_deterministic_cases() {
        // single state: T = n exactly, so the loss is σ² for every run
        let trans = vec![vec![vec![1.0]]];
        let single =
            MdpModel::new(trans, vec![2.5f64], vec![0.0], 4.0, ObsMode::Gaussian).unwrap();
        let (mean, stderr) =
            finite_loss_mc(&single, &StationaryPolicy::uniform(1, 1), 100, 10, 0);
        assert!((mean - 2.5).abs() < 1e-12);
        assert_eq!(stderr, 0.0);
        // deterministic alternation: counts split evenly
        let mdp = swap_mdp();
        let (mean, _) = finite_loss_mc(&mdp, &StationaryPolicy::uniform(2, 2), 1000, 20, 1);
        assert!((mean - 2.0).abs() < 0.01, "got {mean}");
    }

    #[test]
    fn monte_carlo_loss_approaches_the_asymptotic_value() {
        let mdp = three_state_mdp(0.5f64);
        let pi = three_state_selfloop_policy(0.6);
        let lam = policy_to_lambda(&mdp, &pi).unwrap();
        let asymptotic = loss_lambda(&mdp, &lam).unwrap();
        let (l2, _) = finite_loss_mc(&mdp, &pi, 100, 200, 7);
        let (l4, _) = finite_loss_mc(&mdp, &pi, 10_000, 200, 7);
        assert!((l4 - asymptotic).abs() < (l2 - asymptotic).abs());
        assert!((l4 - asymptotic).abs() / asymptotic < 0.05, "{l4} vs {asymptotic}");
    }

    #[test]
    fn mixing_regularization_direction_is_right_on_the_hard_instance() {
        // over the family of self-loop policies, pick the proxy minimizer and
        // compare its finite-time loss to the asymptotic optimum's policy
        let mdp = three_state_mdp(0.001f64);
        let solve = fw_solve(&mdp, 0.001, 1e-6, 50_000).unwrap();
        let n = 500;
        let mut best_q = 0.5;
        let mut best_proxy = f64::INFINITY;
        for i in 0..50 {
            let q = 0.5 + 0.49 * (i as f64) / 49.0;
            let reg = loss_regularized(&mdp, &three_state_selfloop_policy(q), n).unwrap();
            if reg.proxy < best_proxy {
                best_proxy = reg.proxy;
                best_q = q;
            }
        }
        let (loss_reg, _) =
            finite_loss_mc(&mdp, &three_state_selfloop_policy(best_q), n, 100, 11);
        let (loss_star, _) = finite_loss_mc(&mdp, &solve.policy, n, 100, 11);
        assert!(
            loss_reg <= loss_star * 1.05,
            "regularized {loss_reg} vs asymptotic-optimal {loss_star}"
        );
    }
}
