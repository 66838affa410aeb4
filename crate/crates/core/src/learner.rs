//! The episodic Frank-Wolfe learner: each episode solves a linear problem on
//! the stationary polytope against an optimistic loss gradient, executes the
//! corresponding stationary policy, and folds the episode's visit frequencies
//! into a tracked state-action distribution.

use crate::error::{Error, Result};
use crate::fmh::{delta_schedule, p1_solve, p2_project, P1Config, P1Objective, SlackGeometry};
use crate::mdp::{chain_from_policy, MdpModel, StationaryPolicy};
use crate::polytope::{lambda_to_policy, linear_min_oracle, StateActionDist};
use crate::rng::{rng_from, SeedableStream};
use crate::scalar::Real;
use crate::sim::policy_step;
use crate::solver::{fw_solve, loss_marginals};
use crate::stats::{alpha_width, AlphaRule, EstimatorState, ObservationModel};
use rand::Rng;
use std::io::Write;

/// First-episode length: either fixed, or "run the uniform policy until every
/// state has been sampled at least once".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tau1 {
    Fixed(u64),
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// t_k = τ₁(k−1)³ + 1
    Theory,
    /// t_1 = 1, t_k = τ₁ + (k−1)³ for k ≥ 2
    Experimental,
    /// t_k = τ₁(k−1)^m + 1
    PowerM(u32),
}

#[derive(Debug, Clone, Copy)]
pub struct EpisodeSchedule {
    pub tau_1: Tau1,
    pub mode: ScheduleMode,
}

impl EpisodeSchedule {
    pub fn theory(tau_1: u64) -> Self {
        EpisodeSchedule { tau_1: Tau1::Fixed(tau_1), mode: ScheduleMode::Theory }
    }

    pub fn experimental() -> Self {
        EpisodeSchedule { tau_1: Tau1::Adaptive, mode: ScheduleMode::Experimental }
    }

    pub fn power(m: u32, tau_1: u64) -> Self {
        EpisodeSchedule { tau_1: Tau1::Fixed(tau_1), mode: ScheduleMode::PowerM(m) }
    }

    /// Start time t_k of episode k (1-based, t_1 = 1), given the realized
    /// length of the first episode.
    pub fn start_time(&self, k: usize, tau_1: u64) -> u64 {
        assert!(k >= 1);
        let km1 = (k - 1) as u64;
        match self.mode {
            ScheduleMode::Theory => tau_1 * km1.pow(3) + 1,
            ScheduleMode::Experimental => {
                if k == 1 {
                    1
                } else {
                    tau_1 + km1.pow(3)
                }
            }
            ScheduleMode::PowerM(m) => tau_1 * km1.pow(m) + 1,
        }
    }

    /// Planned length τ_k = t_{k+1} − t_k of episode k.
    pub fn episode_length(&self, k: usize, tau_1: u64) -> u64 {
        self.start_time(k + 1, tau_1) - self.start_time(k, tau_1)
    }

    /// Tracking weight β_k = τ_k/(t_{k+1} − 1): the recursion with these
    /// weights reproduces the running global visit frequency exactly.
    pub fn beta(&self, k: usize, tau_1: u64) -> f64 {
        self.episode_length(k, tau_1) as f64 / (self.start_time(k + 1, tau_1) - 1) as f64
    }
}

/// How the "every state sampled at least once" convention is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// one fictitious unit-weight observation per state at the model's
    /// default prediction, before the first episode
    Fictitious,
    /// the first episode runs the uniform policy until all states are visited
    AdaptiveFirstEpisode,
}

#[derive(Debug, Clone, Copy)]
pub enum Budget {
    Episodes(usize),
    Steps(u64),
}

#[derive(Debug, Clone)]
pub struct LearnerOptions<F> {
    pub schedule: EpisodeSchedule,
    pub eta_floor: F,
    pub alpha: AlphaRule<F>,
    pub budget: Budget,
    pub init: InitMode,
    pub seed: u64,
}

impl<F: Real> LearnerOptions<F> {
    /// The experiment defaults: adaptive first episode, experimental schedule
    /// and confidence widths, marginal floor 0.001.
    pub fn defaults(mdp: &MdpModel<F>, budget: Budget, seed: u64) -> Self {
        LearnerOptions {
            schedule: EpisodeSchedule::experimental(),
            eta_floor: F::of(1e-3),
            alpha: AlphaRule::Experimental { sigma2_max: mdp.sigma2_max() },
            budget,
            init: InitMode::AdaptiveFirstEpisode,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceRow<F> {
    pub episode: usize,
    /// global time at the end of the episode
    pub t: u64,
    /// true asymptotic loss of the tracked distribution
    pub loss: F,
    pub regret_vs_lstar: F,
    pub slem_executed: F,
    pub min_marginal: F,
    /// whether the mixing post-processing replaced the episode's policy
    pub fmh_applied: bool,
}

#[derive(Debug, Clone)]
pub struct LearnerTrace<F> {
    pub rows: Vec<TraceRow<F>>,
    pub lam_tilde: StateActionDist<F>,
    pub estimator: EstimatorState<F>,
    pub l_star: F,
    pub total_steps: u64,
    /// largest gap observed between the recursive tracking update and the
    /// visit frequencies recomputed from raw counts
    pub bookkeeping_error: F,
}

impl<F: Real> LearnerTrace<F> {
    pub fn final_loss(&self) -> F {
        self.rows.last().map(|r| r.loss).unwrap_or(F::infinity())
    }

    pub fn mean_estimates(&self) -> Vec<F> {
        (0..self.lam_tilde.num_states())
            .map(|s| self.estimator.mean_hat(s))
            .collect()
    }

    pub fn average_slem(&self) -> F {
        if self.rows.is_empty() {
            return F::nan();
        }
        let total: F = self.rows.iter().map(|r| r.slem_executed).sum();
        total / F::of(self.rows.len() as f64)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "episode",
            "t",
            "loss_L_of_lambda_tilde",
            "regret_vs_Lstar",
            "slem_executed",
            "min_marginal",
        ])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for r in &self.rows {
            w.write_record([
                r.episode.to_string(),
                r.t.to_string(),
                format!("{}", r.loss.to_f64_lossy()),
                format!("{}", r.regret_vs_lstar.to_f64_lossy()),
                format!("{}", r.slem_executed.to_f64_lossy()),
                format!("{}", r.min_marginal.to_f64_lossy()),
            ])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loss gradient with the variance estimate inflated by the confidence width:
/// ∇L̂⁺(λ)(s,a) = −(1/S)(σ̂²(s) + α(t,s))/(Σ_b λ(s,b))². More uncertain states
/// get more negative entries and therefore higher priority in the linear
/// minimization.
pub fn optimistic_gradient<F: Real>(
    est: &EstimatorState<F>,
    lam: &StateActionDist<F>,
    rule: AlphaRule<F>,
) -> Result<Vec<Vec<F>>> {
    let s_n = lam.num_states();
    let a_n = lam.num_actions();
    let marginals = lam.marginals();
    let scale = F::one() / F::of(s_n as f64);
    let mut grad = vec![vec![F::zero(); a_n]; s_n];
    for s in 0..s_n {
        if !(marginals[s] > F::zero()) {
            return Err(Error::ZeroMarginal { state: s });
        }
        if est.count(s) == 0 {
            return Err(Error::ZeroCount { state: s });
        }
        let alpha = alpha_width(rule, s_n, est.time().max(1), est.count(s))?;
        let value = -scale * (est.var_hat(s) + alpha) / (marginals[s] * marginals[s]);
        for a in 0..a_n {
            grad[s][a] = value;
        }
    }
    Ok(grad)
}

enum PolicySource<F> {
    Optimistic { fmh: bool },
    Uniform,
    Fixed(StationaryPolicy<F>),
}

const ADAPTIVE_CAP: u64 = 1_000_000;

/// The online learner: per episode, minimize the optimistic gradient over the
/// restricted polytope, execute the extracted policy, and track the global
/// visit frequencies.
pub fn fw_ame_run<F: Real>(
    mdp: &MdpModel<F>,
    options: &LearnerOptions<F>,
) -> Result<LearnerTrace<F>> {
    run_core(mdp, options, PolicySource::Optimistic { fmh: false })
}

/// The learner with each episode's policy post-processed by the mixing
/// surrogate (norm objective, per-state slack from `delta_schedule`). When
/// the post-processing fails the unmodified policy is executed and the trace
/// row is marked.
pub fn fw_ame_fmh_run<F: Real>(
    mdp: &MdpModel<F>,
    options: &LearnerOptions<F>,
) -> Result<LearnerTrace<F>> {
    run_core(mdp, options, PolicySource::Optimistic { fmh: true })
}

/// Executes the uniform policy with the same estimator and trace plumbing.
pub fn uniform_baseline_run<F: Real>(
    mdp: &MdpModel<F>,
    options: &LearnerOptions<F>,
) -> Result<LearnerTrace<F>> {
    run_core(mdp, options, PolicySource::Uniform)
}

/// Executes a fixed stationary policy with the same plumbing.
pub fn fixed_policy_run<F: Real>(
    mdp: &MdpModel<F>,
    pi: &StationaryPolicy<F>,
    options: &LearnerOptions<F>,
) -> Result<LearnerTrace<F>> {
    run_core(mdp, options, PolicySource::Fixed(pi.clone()))
}

/// One episode's mixing post-processing: improve the flow of the given policy
/// under per-state slacks that total τ^{-1/2}, then project back to a policy.
pub fn fmh_sdp_post<F: Real>(
    mdp: &MdpModel<F>,
    pi_hat: &StationaryPolicy<F>,
    var_hat: &[F],
    tau: u64,
) -> Result<StationaryPolicy<F>> {
    // vertex policies often induce reducible chains; a small uniform blend
    // restores a unique stationary distribution to improve from
    let analysis = match chain_from_policy(mdp, pi_hat) {
        Ok(a) => a,
        Err(Error::NotIrreducible { .. }) | Err(Error::ZeroStationaryMass { .. }) => {
            let a_n = mdp.num_actions();
            let kappa = F::of(0.1);
            let w = kappa / F::of(a_n as f64);
            let blended = StationaryPolicy::new(
                (0..mdp.num_states())
                    .map(|s| {
                        pi_hat
                            .row(s)
                            .iter()
                            .map(|&p| (F::one() - kappa) * p + w)
                            .collect()
                    })
                    .collect(),
            )?;
            chain_from_policy(mdp, &blended)?
        }
        Err(e) => return Err(e),
    };
    let deltas = delta_schedule(var_hat, tau)?;
    let eta_min = analysis.eta_min();
    if !(eta_min > F::zero()) {
        return Err(Error::ZeroStationaryMass { state: 0 });
    }
    let config = P1Config {
        objective: P1Objective::NormOnly,
        slack: SlackGeometry::Box(deltas),
        eta_floor: eta_min * F::of(0.5),
        tol: F::of(1e-9),
        max_iters: 400,
    };
    let p1 = p1_solve(mdp, &analysis.eta, &config, Some(&analysis.kernel))?;
    let (policy, _) = p2_project(mdp, &p1.flow.eta());
    Ok(policy)
}

fn run_core<F: Real>(
    mdp: &MdpModel<F>,
    options: &LearnerOptions<F>,
    source: PolicySource<F>,
) -> Result<LearnerTrace<F>> {
    let s_n = mdp.num_states();
    let a_n = mdp.num_actions();
    let obs = ObservationModel::from_mdp(mdp);
    let stream = SeedableStream::new(options.seed);
    let mut rng = rng_from(stream.derive(&[0x1EA12, 1]));

    let l_star = fw_solve(mdp, options.eta_floor, F::of(1e-6), 100_000)?.value;

    let mut est = EstimatorState::<F>::new(s_n);
    if options.init == InitMode::Fictitious {
        for s in 0..s_n {
            est.update(s, obs.predict_mean(&est, s));
        }
    }

    let (max_episodes, max_steps) = match options.budget {
        Budget::Episodes(k) => (k, u64::MAX),
        Budget::Steps(n) => (usize::MAX, n),
    };

    let uniform = StationaryPolicy::uniform(s_n, a_n);
    let mut lam_flat = vec![F::one() / F::of((s_n * a_n) as f64); s_n * a_n];
    let mut raw_counts = vec![0u64; s_n * a_n];
    let mut total_steps = 0u64;
    let mut state = rng.random_range(0..s_n);
    let mut realized_tau_1 = match options.schedule.tau_1 {
        Tau1::Fixed(t) => t.max(1),
        Tau1::Adaptive => 1,
    };
    let mut rows = Vec::new();
    let mut bookkeeping_error = F::zero();
    let mut episode = 0usize;

    while episode < max_episodes && total_steps < max_steps {
        episode += 1;
        let adaptive_first = episode == 1
            && options.init == InitMode::AdaptiveFirstEpisode
            && matches!(source, PolicySource::Optimistic { .. } | PolicySource::Uniform);

        let (policy, fmh_applied) = if adaptive_first {
            (uniform.clone(), false)
        } else {
            match &source {
                PolicySource::Uniform => (uniform.clone(), false),
                PolicySource::Fixed(pi) => (pi.clone(), false),
                PolicySource::Optimistic { fmh } => {
                    let lam = StateActionDist::from_flat(&lam_flat, s_n, a_n)?;
                    // unvisited pairs leave zero marginals in the tracked
                    // frequencies; a vanishing uniform blend keeps the
                    // gradient defined while preserving the priority order
                    let eps = F::one() / F::of((total_steps + 1) as f64);
                    let lam_grad = lam.blend(&StateActionDist::uniform(s_n, a_n), eps);
                    let grad = optimistic_gradient(&est, &lam_grad, options.alpha)?;
                    let psi_plus = linear_min_oracle(mdp, &grad, options.eta_floor)?;
                    let pi_hat = lambda_to_policy(&psi_plus, true)?;
                    if *fmh {
                        let var_hat: Vec<F> = (0..s_n).map(|s| obs.predict_var(&est, s)).collect();
                        let tau = options
                            .schedule
                            .episode_length(episode, realized_tau_1)
                            .max(1);
                        // execute the post-processed policy only when it
                        // actually mixes faster than the vertex policy
                        let base_slem = chain_from_policy(mdp, &pi_hat)
                            .map(|a| a.slem)
                            .unwrap_or(F::one());
                        match fmh_sdp_post(mdp, &pi_hat, &var_hat, tau) {
                            Ok(pi_mix) => match chain_from_policy(mdp, &pi_mix) {
                                Ok(c) if c.slem < base_slem => (pi_mix, true),
                                _ => (pi_hat, false),
                            },
                            Err(_) => (pi_hat, false),
                        }
                    } else {
                        (pi_hat, false)
                    }
                }
            }
        };

        // execute the episode
        let mut episode_counts = vec![0u64; s_n * a_n];
        let mut steps_this_episode = 0u64;
        if adaptive_first {
            while (est.min_count() == 0 || steps_this_episode == 0)
                && total_steps < max_steps
                && steps_this_episode < ADAPTIVE_CAP
            {
                let (a, next) = policy_step(mdp, &policy, state, &mut rng);
                est.update(state, obs.sample(state, &mut rng));
                episode_counts[state * a_n + a] += 1;
                state = next;
                steps_this_episode += 1;
                total_steps += 1;
            }
            realized_tau_1 = steps_this_episode.max(1);
        } else {
            let planned = options.schedule.episode_length(episode, realized_tau_1);
            let budget_left = max_steps - total_steps;
            let run_for = planned.min(budget_left);
            for _ in 0..run_for {
                let (a, next) = policy_step(mdp, &policy, state, &mut rng);
                est.update(state, obs.sample(state, &mut rng));
                episode_counts[state * a_n + a] += 1;
                state = next;
                steps_this_episode += 1;
            }
            total_steps += steps_this_episode;
        }
        if steps_this_episode == 0 {
            break;
        }

        // tracking update: with β_k = τ_k / (total steps so far) the recursion
        // keeps λ̃ equal to the global empirical visit frequency
        let beta = F::of(steps_this_episode as f64) / F::of(total_steps as f64);
        let tau_f = F::of(steps_this_episode as f64);
        for (i, &c) in episode_counts.iter().enumerate() {
            let psi = F::of(c as f64) / tau_f;
            lam_flat[i] = beta * psi + (F::one() - beta) * lam_flat[i];
            raw_counts[i] += c;
        }
        for (i, &c) in raw_counts.iter().enumerate() {
            let empirical = F::of(c as f64) / F::of(total_steps as f64);
            bookkeeping_error = bookkeeping_error.max((lam_flat[i] - empirical).abs());
        }

        let marginals: Vec<F> = (0..s_n)
            .map(|s| lam_flat[s * a_n..(s + 1) * a_n].iter().copied().sum())
            .collect();
        let loss = loss_marginals(mdp.sigma2(), &marginals).unwrap_or(F::infinity());
        let slem_executed = match chain_from_policy(mdp, &policy) {
            Ok(a) => a.slem,
            // a reducible executed chain does not mix at all
            Err(_) => F::one(),
        };
        rows.push(TraceRow {
            episode,
            t: total_steps,
            loss,
            regret_vs_lstar: loss - l_star,
            slem_executed,
            min_marginal: marginals.iter().copied().fold(F::infinity(), F::min),
            fmh_applied,
        });
    }

    Ok(LearnerTrace {
        rows,
        lam_tilde: StateActionDist::from_flat(&lam_flat, s_n, a_n)?,
        estimator: est,
        l_star,
        total_steps,
        bookkeeping_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{garnet_generate, three_state_mdp, MdpModel, ObsMode};
    use crate::solver::grad_loss;
    use crate::stats::{competitive_ratio, loss_empirical};

    #[test]
    fn theory_schedule_matches_hand_arithmetic() {
        let sched = EpisodeSchedule::theory(10);
        assert_eq!(sched.start_time(1, 10), 1);
        assert_eq!(sched.start_time(2, 10), 11);
        assert_eq!(sched.episode_length(2, 10), 70);
        assert!((sched.beta(2, 10) - 7.0 / 8.0).abs() < 1e-15);
        // the cubic power schedule coincides with theory mode
        let p3 = EpisodeSchedule::power(3, 10);
        for k in 1..50 {
            assert_eq!(p3.start_time(k, 10), sched.start_time(k, 10));
        }
        let exp = EpisodeSchedule::experimental();
        assert_eq!(exp.start_time(1, 7), 1);
        assert_eq!(exp.start_time(2, 7), 8);
        assert_eq!(exp.episode_length(1, 7), 7);
        assert_eq!(exp.episode_length(3, 7), 19);
    }

    #[test]
    fn theory_mode_tracking_weights_stay_within_the_inverse_episode_band() {
        let sched = EpisodeSchedule::theory(1);
        for k in 1..=10_000usize {
            let beta = sched.beta(k, 1);
            let kf = k as f64;
            assert!(beta >= 1.0 / kf - 1e-15, "k={k} beta={beta}");
            assert!(beta <= 3.0 / kf + 1e-15, "k={k} beta={beta}");
        }
        // and at a larger first-episode length too
        let sched = EpisodeSchedule::theory(25);
        for k in 1..=10_000usize {
            let beta = sched.beta(k, 25);
            let kf = k as f64;
            assert!(beta >= 1.0 / kf - 1e-15 && beta <= 3.0 / kf + 1e-15);
        }
    }

    #[test]
    fn optimism_off_recovers_the_plain_gradient() {
        let mdp = three_state_mdp(0.5f64);
        let mut est = EstimatorState::new(3);
        // feed observations whose empirical variance matches the model
        for s in 0..3 {
            let sd = mdp.sigma2()[s].sqrt();
            est.update(s, sd);
            est.update(s, -sd);
        }
        let lam = StateActionDist::uniform(3, 2);
        let rule = AlphaRule::Experimental { sigma2_max: 0.0 };
        let got = optimistic_gradient(&est, &lam, rule).unwrap();
        let want = grad_loss(&mdp, &lam).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                assert!((got[s][a] - want[s][a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wider_confidence_lowers_a_state_gradient() {
        let mdp = three_state_mdp(0.5f64);
        let mut est = EstimatorState::new(3);
        for s in 0..3 {
            est.update(s, 0.0);
            est.update(s, 1.0);
        }
        // give state 1 fewer samples so its width is larger
        est.update(0, 0.5);
        est.update(2, 0.5);
        let lam = StateActionDist::uniform(3, 2);
        let rule = AlphaRule::Experimental { sigma2_max: mdp.sigma2_max() };
        let got = optimistic_gradient(&est, &lam, rule).unwrap();
        let small = AlphaRule::Experimental { sigma2_max: 0.0 };
        let base = optimistic_gradient(&est, &lam, small).unwrap();
        for s in 0..3 {
            assert!(got[s][0] < base[s][0], "optimism must lower the gradient");
        }
    }

    #[test]
    fn two_state_gradient_matches_hand_evaluation() {
        let mut est = EstimatorState::new(2);
        est.update(0, 1.0);
        est.update(0, -1.0);
        est.update(1, 2.0);
        est.update(1, 0.0);
        // t=4, counts=2 each, σ̂² = 1 at both states
        let lam = StateActionDist::from_flat(&[0.3, 0.1, 0.2, 0.4], 2, 2).unwrap();
        let rule = AlphaRule::Experimental { sigma2_max: 2.0 };
        let got = optimistic_gradient(&est, &lam, rule).unwrap();
        let alpha = 0.2 * 2.0 * ((4.0f64 * 2.0 * 16.0).ln() / 2.0).sqrt();
        let want0 = -0.5 * (1.0 + alpha) / (0.4f64 * 0.4);
        let want1 = -0.5 * (1.0 + alpha) / (0.6f64 * 0.6);
        assert!((got[0][0] - want0).abs() < 1e-12, "{} vs {}", got[0][0], want0);
        assert!((got[0][1] - want0).abs() < 1e-12);
        assert!((got[1][1] - want1).abs() < 1e-12);
    }

    #[test]
    fn zero_structures_are_rejected() {
        let mut est = EstimatorState::<f64>::new(2);
        est.update(0, 1.0);
        let lam = StateActionDist::uniform(2, 2);
        let rule = AlphaRule::Experimental { sigma2_max: 1.0 };
        assert!(matches!(
            optimistic_gradient(&est, &lam, rule),
            Err(Error::ZeroCount { state: 1 })
        ));
        est.update(1, 1.0);
        let degenerate = StateActionDist::from_flat(&[0.5, 0.5, 0.0, 0.0], 2, 2).unwrap();
        assert!(matches!(
            optimistic_gradient(&est, &degenerate, rule),
            Err(Error::ZeroMarginal { state: 1 })
        ));
    }

    #[test]
    fn single_state_learner_is_degenerate_and_exact() {
        let trans = vec![vec![vec![1.0f64]]];
        let mdp =
            MdpModel::new(trans, vec![1.0], vec![0.0], 4.0, ObsMode::Gaussian).unwrap();
        let options = LearnerOptions::defaults(&mdp, Budget::Steps(200), 7);
        let trace = fw_ame_run(&mdp, &options).unwrap();
        assert_eq!(trace.lam_tilde.as_flat(), vec![1.0]);
        for row in &trace.rows {
            assert!(row.regret_vs_lstar.abs() < 1e-12);
        }
        // identical to the uniform baseline on one state and one action
        let base = uniform_baseline_run(&mdp, &options).unwrap();
        assert_eq!(trace.total_steps, base.total_steps);
        assert!((trace.final_loss() - base.final_loss()).abs() < 1e-12);
    }

    #[test]
    fn tracked_distribution_equals_global_visit_frequency() {
        let mdp = garnet_generate::<f64>(5, 3, 2, 0.01, 10.0, false, 11).unwrap();
        let options = LearnerOptions::defaults(&mdp, Budget::Steps(3_000), 3);
        let trace = fw_ame_run(&mdp, &options).unwrap();
        assert!(trace.bookkeeping_error <= 1e-12, "{}", trace.bookkeeping_error);
        assert!(trace.estimator.min_count() >= 1);
        // the sum of counts matches the executed horizon
        assert_eq!(trace.estimator.time(), trace.total_steps);
        // theory mode with a fixed first episode keeps the same invariant
        let options = LearnerOptions {
            schedule: EpisodeSchedule::theory(10),
            ..LearnerOptions::defaults(&mdp, Budget::Steps(2_000), 5)
        };
        let trace = fw_ame_run(&mdp, &options).unwrap();
        assert!(trace.bookkeeping_error <= 1e-12);
    }

    #[test]
    fn learner_beats_uniform_on_heterogeneous_variances() {
        let mdp = garnet_generate::<f64>(5, 3, 2, 0.01, 10.0, false, 42).unwrap();
        let n = 1000;
        let mut fw_ratios = Vec::new();
        let mut unif_ratios = Vec::new();
        for run in 0..12u64 {
            let options = LearnerOptions::defaults(&mdp, Budget::Steps(n), 100 + run);
            let fw = fw_ame_run(&mdp, &options).unwrap();
            let unif = uniform_baseline_run(&mdp, &options).unwrap();
            for (trace, out) in [(fw, &mut fw_ratios), (unif, &mut unif_ratios)] {
                let (_, n_loss) = loss_empirical(&[trace.mean_estimates()], mdp.mu(), n);
                out.push(competitive_ratio(n_loss, trace.l_star).unwrap());
            }
        }
        let fw_mean: f64 = fw_ratios.iter().sum::<f64>() / fw_ratios.len() as f64;
        let unif_mean: f64 = unif_ratios.iter().sum::<f64>() / unif_ratios.len() as f64;
        assert!(
            fw_mean < unif_mean,
            "learner ratio {fw_mean} vs uniform ratio {unif_mean}"
        );
    }

    #[test]
    fn mixing_post_processing_vanishes_with_tiny_slack() {
        let mdp = garnet_generate::<f64>(4, 2, 2, 0.5, 2.0, true, 9).unwrap();
        let pi = StationaryPolicy::uniform(4, 2);
        let var = vec![1.0f64, 2.0, 0.5, 1.5];
        // slacks total τ^{-1/2}: a huge τ pins the flow to the original chain
        let posted = fmh_sdp_post(&mdp, &pi, &var, 100_000_000).unwrap();
        let eta0 = chain_from_policy(&mdp, &pi).unwrap().eta;
        let eta1 = chain_from_policy(&mdp, &posted).unwrap().eta;
        for (a, b) in eta0.iter().zip(&eta1) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn fmh_variant_runs_and_marks_processed_episodes() {
        let mdp = garnet_generate::<f64>(5, 3, 3, 0.01, 10.0, true, 17).unwrap();
        let options = LearnerOptions::defaults(&mdp, Budget::Steps(1_500), 23);
        let trace = fw_ame_fmh_run(&mdp, &options).unwrap();
        assert!(trace.bookkeeping_error <= 1e-12);
        // the first adaptive episode is uniform; later episodes go through
        // the post-processing
        assert!(!trace.rows[0].fmh_applied);
        assert!(trace.rows.iter().skip(1).any(|r| r.fmh_applied));
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("episode,t,loss_L_of_lambda_tilde"));
        assert_eq!(text.lines().count(), trace.rows.len() + 1);
    }

    #[test]
    fn fictitious_initialization_guarantees_counts_from_the_start() {
        let mdp = three_state_mdp(0.5f64);
        let options = LearnerOptions {
            init: InitMode::Fictitious,
            schedule: EpisodeSchedule::theory(10),
            ..LearnerOptions::defaults(&mdp, Budget::Episodes(4), 2)
        };
        let trace = fw_ame_run(&mdp, &options).unwrap();
        assert!(trace.estimator.min_count() >= 1);
        assert_eq!(trace.rows.len(), 4);
        // fictitious samples sit outside the executed horizon
        assert_eq!(trace.estimator.time(), trace.total_steps + 3);
    }
}
