//! Minimal trajectory machinery shared by the Monte-Carlo loss estimator and
//! the episodic learner.

use crate::mdp::{MdpModel, StationaryPolicy};
use crate::scalar::Real;
use rand::Rng;

/// Samples an index proportionally to the given nonnegative weights.
pub fn sample_index<F: Real>(weights: &[F], rng: &mut impl Rng) -> usize {
    let total: F = weights.iter().copied().sum();
    let mut u = F::of(rng.random::<f64>()) * total;
    for (i, &w) in weights.iter().enumerate() {
        u = u - w;
        if u <= F::zero() {
            return i;
        }
    }
    weights.len() - 1
}

/// One environment step under a stationary policy: samples an action and the
/// successor state.
pub fn policy_step<F: Real>(
    mdp: &MdpModel<F>,
    pi: &StationaryPolicy<F>,
    s: usize,
    rng: &mut impl Rng,
) -> (usize, usize) {
    let a = sample_index(pi.row(s), rng);
    let next = sample_index(mdp.transition_row(s, a), rng);
    (a, next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{three_state_mdp, three_state_selfloop_policy};
    use crate::rng::rng_from;

    #[test]
    fn index_sampling_matches_weights() {
        let mut rng = rng_from(1);
        let weights = [0.2f64, 0.5, 0.3];
        let mut counts = [0u64; 3];
        let n = 100_000;
        for _ in 0..n {
            counts[sample_index(&weights, &mut rng)] += 1;
        }
        for (c, w) in counts.iter().zip(weights) {
            let freq = *c as f64 / n as f64;
            assert!((freq - w).abs() < 0.01, "{freq} vs {w}");
        }
    }

    #[test]
    fn long_walk_visits_match_stationary_distribution() {
        let mdp = three_state_mdp(0.001f64);
        let pi = three_state_selfloop_policy(0.9);
        let mut rng = rng_from(2);
        let mut s = 0;
        let mut counts = [0u64; 3];
        let n = 400_000;
        for _ in 0..n {
            let (_, next) = policy_step(&mdp, &pi, s, &mut rng);
            s = next;
            counts[s] += 1;
        }
        for (c, want) in counts.iter().zip([5.0 / 11.0, 1.0 / 11.0, 5.0 / 11.0]) {
            let freq = *c as f64 / n as f64;
            assert!((freq - want).abs() < 0.01, "{freq} vs {want}");
        }
    }
}
