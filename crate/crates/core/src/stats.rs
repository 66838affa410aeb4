//! Observation sampling, running mean/variance estimation, confidence widths,
//! concentration bounds and the empirical loss metrics.

use crate::error::{Error, Result};
use crate::mdp::{chain_from_policy, check_ergodic_assumption, pseudo_spectral_gap, MdpModel,
                 ObsMode, StationaryPolicy};
use crate::scalar::Real;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Running per-state mean/variance estimates over a trajectory.
#[derive(Debug, Clone)]
pub struct EstimatorState<F> {
    counts: Vec<u64>,
    sum_x: Vec<F>,
    sum_x2: Vec<F>,
    /// global time (total number of observations absorbed)
    t: u64,
    /// number of times the variance estimate was clamped at zero
    clamp_events: u64,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Real> EstimatorState<F> {
    pub fn new(num_states: usize) -> Self {
        EstimatorState {
            counts: vec![0; num_states],
            sum_x: vec![F::zero(); num_states],
            sum_x2: vec![F::zero(); num_states],
            t: 0,
            clamp_events: 0,
            _marker: std::marker::PhantomData,
        }
    }

    pub fn num_states(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, s: usize) -> u64 {
        self.counts[s]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn min_count(&self) -> u64 {
        self.counts.iter().copied().min().unwrap_or(0)
    }

    /// Absorbs one observation at state `s`.
    pub fn update(&mut self, s: usize, x: F) {
        assert!(s < self.counts.len(), "state id out of range");
        self.counts[s] += 1;
        self.sum_x[s] = self.sum_x[s] + x;
        self.sum_x2[s] = self.sum_x2[s] + x * x;
        self.t += 1;
        let m = self.mean_hat(s);
        if self.sum_x2[s] / F::of(self.counts[s] as f64) - m * m < F::zero() {
            self.clamp_events += 1;
        }
    }

    /// Empirical mean; zero before the first observation (callers use the
    /// observation-model default for prediction in that case).
    pub fn mean_hat(&self, s: usize) -> F {
        if self.counts[s] == 0 {
            F::zero()
        } else {
            self.sum_x[s] / F::of(self.counts[s] as f64)
        }
    }

    /// Empirical (biased, 1/T) variance, clamped at zero against rounding.
    pub fn var_hat(&self, s: usize) -> F {
        if self.counts[s] == 0 {
            return F::zero();
        }
        let t = F::of(self.counts[s] as f64);
        let m = self.sum_x[s] / t;
        (self.sum_x2[s] / t - m * m).max(F::zero())
    }

    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }
}

/// Per-state observation distributions plus the default predictions used
/// before a state has been visited.
#[derive(Debug, Clone)]
pub struct ObservationModel<F> {
    means: Vec<F>,
    sigma2: Vec<F>,
    range: F,
    mode: ObsMode,
    /// default mean prediction for unvisited states
    pub mu_inf: F,
    /// default variance prediction for unvisited states
    pub var_default: F,
}

impl<F: Real> ObservationModel<F> {
    /// Defaults as used in the experiments: mu_inf = 3 σ_max and
    /// var_default = σ²_max.
    pub fn from_mdp(mdp: &MdpModel<F>) -> Self {
        let var_max = mdp.sigma2_max();
        ObservationModel {
            means: mdp.mu().to_vec(),
            sigma2: mdp.sigma2().to_vec(),
            range: mdp.range(),
            mode: mdp.obs_mode(),
            mu_inf: F::of(3.0) * var_max.sqrt(),
            var_default: var_max,
        }
    }

    pub fn sample(&self, s: usize, rng: &mut impl Rng) -> F {
        let mu = self.means[s];
        let sd = self.sigma2[s].sqrt();
        match self.mode {
            ObsMode::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                mu + sd * F::of(z)
            }
            ObsMode::Bounded => {
                // two-point distribution at mu ± sd, clipped into [0, R]
                let x = if rng.random::<bool>() { mu + sd } else { mu - sd };
                x.max(F::zero()).min(self.range)
            }
        }
    }

    /// Mean prediction: empirical mean when visited, mu_inf otherwise.
    pub fn predict_mean(&self, est: &EstimatorState<F>, s: usize) -> F {
        if est.count(s) == 0 {
            self.mu_inf
        } else {
            est.mean_hat(s)
        }
    }

    /// Variance prediction: empirical variance when visited, var_default
    /// otherwise.
    pub fn predict_var(&self, est: &EstimatorState<F>, s: usize) -> F {
        if est.count(s) == 0 {
            self.var_default
        } else {
            est.var_hat(s)
        }
    }

    pub fn true_means(&self) -> &[F] {
        &self.means
    }
}

/// Which confidence-width formula to use.
#[derive(Debug, Clone, Copy)]
pub enum AlphaRule<F> {
    /// 5R²√(ln(4St/δ)/T_s)
    Theoretical { delta: F, range: F },
    /// 0.2 σ²_max √(ln(4St²)/T_s), the width used in the experiments
    Experimental { sigma2_max: F },
}

/// Confidence width for the variance estimate at one state.
pub fn alpha_width<F: Real>(
    rule: AlphaRule<F>,
    num_states: usize,
    t: u64,
    t_s: u64,
) -> Result<F> {
    if t_s == 0 {
        return Err(Error::DegenerateCount { state: usize::MAX });
    }
    let s = F::of(num_states as f64);
    let t_f = F::of(t.max(1) as f64);
    let count = F::of(t_s as f64);
    let four = F::of(4.0);
    Ok(match rule {
        AlphaRule::Theoretical { delta, range } => {
            let log_term = (four * s * t_f / delta).ln().max(F::zero());
            F::of(5.0) * range * range * (log_term / count).sqrt()
        }
        AlphaRule::Experimental { sigma2_max } => {
            let log_term = (four * s * t_f * t_f).ln().max(F::zero());
            F::of(0.2) * sigma2_max * (log_term / count).sqrt()
        }
    })
}

/// Empirical estimation loss over repeated runs:
/// LOSS = (1/(S·R)) Σ_s Σ_r (μ̂^(r)(s) − μ(s))², plus its n-normalized form.
pub fn loss_empirical<F: Real>(runs: &[Vec<F>], mu: &[F], n: u64) -> (F, F) {
    assert!(!runs.is_empty(), "need at least one run");
    let s = mu.len();
    let mut total = F::zero();
    for run in runs {
        assert_eq!(run.len(), s, "run length mismatch");
        for (est, truth) in run.iter().zip(mu) {
            let d = *est - *truth;
            total = total + d * d;
        }
    }
    let loss = total / F::of((s * runs.len()) as f64);
    (loss, F::of(n as f64) * loss)
}

/// Competitive ratio of a normalized loss against the asymptotic optimum:
/// n·LOSS / L(λ*) − 1.
pub fn competitive_ratio<F: Real>(normalized_loss: F, l_star: F) -> Result<F> {
    if !(l_star > F::zero()) {
        return Err(Error::NonPositiveOptimum(l_star.to_f64_lossy()));
    }
    Ok(normalized_loss / l_star - F::one())
}

/// Deviation width for empirical visit frequencies of a reversible ergodic
/// chain: √(8η(1−η)·B/(γn)) + 20B/(γn) with B = ln((1/δ)√(2/η_min)).
pub fn epsilon_pi<F: Real>(eta_s: F, eta_min: F, gap: F, n: u64, delta: F) -> F {
    let b = ((F::one() / delta) * (F::of(2.0) / eta_min).sqrt()).ln().max(F::zero());
    epsilon_pi_log(eta_s, b, gap, n)
}

/// Same width with the log factor B supplied directly (callers with huge
/// 1/δ values compute B in log space to avoid overflow).
pub fn epsilon_pi_log<F: Real>(eta_s: F, log_factor: F, gap: F, n: u64) -> F {
    let b = log_factor.max(F::zero());
    let gn = gap * F::of(n as f64);
    (F::of(8.0) * eta_s * (F::one() - eta_s) * b / gn).sqrt() + F::of(20.0) * b / gn
}

/// Gap between the finite-time loss of a policy and its asymptotic value:
/// (1/(S√η_min·nγ)) Σ_s (σ²(s)/η(s)²)(1 + 2ε(s,n,δ)/η(s)), at the
/// confidence level δ = S·A^S/n² (handled in log space).
pub fn ell_n<F: Real>(
    mdp: &MdpModel<F>,
    pi: &StationaryPolicy<F>,
    n: u64,
    eta_min_hint: Option<F>,
) -> Result<F> {
    let analysis = chain_from_policy(mdp, pi)?;
    let gap = analysis.gap;
    if gap.to_f64_lossy() < 1e-12 {
        return Err(Error::GapTooSmall(gap.to_f64_lossy()));
    }
    let s = mdp.num_states();
    let a = mdp.num_actions();
    let eta_min = match eta_min_hint {
        Some(v) => v,
        None => check_ergodic_assumption(mdp, 32, 0).min_eta,
    };
    if !(eta_min > F::zero()) {
        return Err(Error::ZeroStationaryMass { state: 0 });
    }
    // B = ln((1/δ)√(2/η_min)) with 1/δ = n²/(S·A^S); keep it in log space
    let n_f = F::of(n as f64);
    let log_inv_delta = F::of(2.0) * n_f.ln()
        - F::of(s as f64).ln()
        - F::of(s as f64) * F::of(a as f64).ln();
    let b = (log_inv_delta + F::of(0.5) * (F::of(2.0) / eta_min).ln()).max(F::zero());
    let mut total = F::zero();
    for (si, &var) in mdp.sigma2().iter().enumerate() {
        let eta_s = analysis.eta[si];
        let eps = epsilon_pi_log(eta_s, b, gap, n);
        total = total + var / (eta_s * eta_s) * (F::one() + F::of(2.0) * eps / eta_s);
    }
    Ok(total / (F::of(s as f64) * eta_min.sqrt() * n_f * gap))
}

/// Mixing bound M(τ,δ) = √(2B/(γτ)) + 20B/(γτ), B = ln((S·A^S/δ)√(1/η̲)).
pub fn mixing_bound_m<F: Real>(
    tau: u64,
    delta: F,
    num_states: usize,
    num_actions: usize,
    eta_floor: F,
    gap_min: F,
) -> F {
    assert!(tau >= 1, "episode length must be at least 1");
    let b = mixing_log_factor(delta, num_states, num_actions, eta_floor);
    let gt = gap_min * F::of(tau as f64);
    (F::of(2.0) * b / gt).sqrt() + F::of(20.0) * b / gt
}

fn mixing_log_factor<F: Real>(
    delta: F,
    num_states: usize,
    num_actions: usize,
    eta_floor: F,
) -> F {
    // ln((S·A^S/δ)·√(1/η̲)) in log space
    let s = F::of(num_states as f64);
    let a = F::of(num_actions as f64);
    (s.ln() + s * a.ln() - delta.ln() + F::of(0.5) * (F::one() / eta_floor).ln()).max(F::zero())
}

/// First episode index k whose length τ_k makes M(τ_k, δ) ≤ η̲, for a given
/// episode-length function.
pub fn k_delta<F: Real>(
    mut tau_of_k: impl FnMut(usize) -> u64,
    delta: F,
    num_states: usize,
    num_actions: usize,
    eta_floor: F,
    gap_min: F,
    k_max: usize,
) -> Option<usize> {
    (1..=k_max).find(|&k| {
        mixing_bound_m(tau_of_k(k), delta, num_states, num_actions, eta_floor, gap_min)
            <= eta_floor
    })
}

/// Upper bound on the residual loss term from never-visited states,
/// E(π,n) ≤ (n/S)·Σ_s(μ_∞−μ(s))²·√(2/η_min)·exp(−nγ_ps(η_min−1/n)²/(8(1+1/(nγ_ps))+40(η_max−1/n))).
pub fn no_visit_bound<F: Real>(
    mdp: &MdpModel<F>,
    pi: &StationaryPolicy<F>,
    n: u64,
) -> Result<F> {
    let analysis = chain_from_policy(mdp, pi)?;
    let eta_min = analysis.eta_min();
    let eta_max = analysis.eta.iter().fold(F::zero(), |m, &v| m.max(v));
    let n_f = F::of(n as f64);
    if !(n_f > F::one() / eta_min) {
        return Err(Error::BudgetTooSmall {
            n: n as usize,
            threshold: (F::one() / eta_min).to_f64_lossy(),
        });
    }
    let gap_ps = pseudo_spectral_gap(&analysis.kernel, &analysis.eta, 8)?;
    if gap_ps.to_f64_lossy() < 1e-12 {
        return Err(Error::GapTooSmall(gap_ps.to_f64_lossy()));
    }
    let obs = ObservationModel::from_mdp(mdp);
    let s = F::of(mdp.num_states() as f64);
    let sq_err: F = mdp
        .mu()
        .iter()
        .map(|&m| (obs.mu_inf - m) * (obs.mu_inf - m))
        .sum();
    let margin = eta_min - F::one() / n_f;
    let denom = F::of(8.0) * (F::one() + F::one() / (n_f * gap_ps))
        + F::of(40.0) * (eta_max - F::one() / n_f);
    let expo = (-n_f * gap_ps * margin * margin / denom).exp();
    Ok(n_f / s * sq_err * (F::of(2.0) / eta_min).sqrt() * expo)
}
