//! MDP and Markov-chain data model: transition kernels, stationary
//! distributions, spectral quantities (SLEM, spectral gap, pseudo-spectral
//! gap), ergodicity checks and Garnet generation.

use crate::error::{Error, Result};
use crate::linalg::{
    self, jacobi_eigenvalues, recurrent_classes, solve_least_squares, spectral_norm, Matrix,
};
use crate::rng::{rng_from, SeedableStream};
use crate::scalar::Real;
use rand::Rng;
use serde::{Deserialize, Serialize};

const ROW_SUM_TOL: f64 = 1e-12;

/// How per-state observations are distributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObsMode {
    /// Observations supported in [0, R]; variances must satisfy σ² ≤ R²/4.
    Bounded,
    /// Gaussian observations; R acts as a scale parameter for the
    /// confidence widths instead of a support bound.
    Gaussian,
}

/// A finite MDP with per-state observation means/variances instead of rewards.
#[derive(Debug, Clone)]
pub struct MdpModel<F> {
    num_states: usize,
    num_actions: usize,
    /// transitions[s][a][s']
    trans: Vec<Vec<Vec<F>>>,
    /// adjacency: true iff some action moves s -> s' with positive probability
    adjacency: Vec<Vec<bool>>,
    sigma2: Vec<F>,
    mu: Vec<F>,
    range: F,
    obs_mode: ObsMode,
    seed: Option<u64>,
    warnings: Vec<String>,
}

impl<F: Real> MdpModel<F> {
    pub fn new(
        trans: Vec<Vec<Vec<F>>>,
        sigma2: Vec<F>,
        mu: Vec<F>,
        range: F,
        obs_mode: ObsMode,
    ) -> Result<Self> {
        let s = trans.len();
        if s == 0 {
            return Err(Error::InvalidModel("no states".into()));
        }
        let a = trans[0].len();
        if a == 0 {
            return Err(Error::InvalidModel("no actions".into()));
        }
        if sigma2.len() != s || mu.len() != s {
            return Err(Error::InvalidModel("sigma2/mu length mismatch".into()));
        }
        if !(range > F::zero()) {
            return Err(Error::InvalidModel("range R must be positive".into()));
        }
        let tol = F::of(ROW_SUM_TOL);
        for (si, rows) in trans.iter().enumerate() {
            if rows.len() != a {
                return Err(Error::InvalidModel(format!("state {si}: ragged action set")));
            }
            for (ai, row) in rows.iter().enumerate() {
                if row.len() != s {
                    return Err(Error::InvalidModel(format!("p[{si}][{ai}] wrong length")));
                }
                if row.iter().any(|&x| x < F::zero()) {
                    return Err(Error::InvalidModel(format!("p[{si}][{ai}] has negative entry")));
                }
                let sum: F = row.iter().copied().sum();
                if (sum - F::one()).abs() > tol {
                    return Err(Error::InvalidModel(format!(
                        "p[{si}][{ai}] sums to {sum}, not 1"
                    )));
                }
            }
        }
        if sigma2.iter().any(|&v| v < F::zero()) {
            return Err(Error::InvalidModel("negative variance".into()));
        }
        let mut warnings = Vec::new();
        let cap = range * range / F::of(4.0);
        for (si, &v) in sigma2.iter().enumerate() {
            if v > cap + F::of(1e-12) {
                match obs_mode {
                    ObsMode::Bounded => {
                        return Err(Error::InvalidModel(format!(
                            "sigma2[{si}] = {v} exceeds R^2/4 = {cap} for bounded observations"
                        )))
                    }
                    ObsMode::Gaussian => warnings.push(format!(
                        "sigma2[{si}] = {v} exceeds R^2/4 = {cap}; R treated as a scale only"
                    )),
                }
            }
        }
        let adjacency = derive_adjacency(&trans);
        Ok(MdpModel {
            num_states: s,
            num_actions: a,
            trans,
            adjacency,
            sigma2,
            mu,
            range,
            obs_mode,
            seed: None,
            warnings,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// p(s'|s,a)
    pub fn p(&self, s: usize, a: usize, s_next: usize) -> F {
        self.trans[s][a][s_next]
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[F] {
        &self.trans[s][a]
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    pub fn sigma2(&self) -> &[F] {
        &self.sigma2
    }

    pub fn mu(&self) -> &[F] {
        &self.mu
    }

    pub fn range(&self) -> F {
        self.range
    }

    pub fn sigma2_max(&self) -> F {
        self.sigma2.iter().fold(F::zero(), |m, &v| m.max(v))
    }

    pub fn obs_mode(&self) -> ObsMode {
        self.obs_mode
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(MdpWire {
            s: self.num_states,
            a: self.num_actions,
            p: self
                .trans
                .iter()
                .map(|rows| {
                    rows.iter()
                        .map(|r| r.iter().map(|&x| x.to_f64_lossy()).collect())
                        .collect()
                })
                .collect(),
            sigma2: self.sigma2.iter().map(|&x| x.to_f64_lossy()).collect(),
            mu: self.mu.iter().map(|&x| x.to_f64_lossy()).collect(),
            r: self.range.to_f64_lossy(),
            obs_mode: self.obs_mode,
            seed: self.seed,
        })
        .expect("mdp serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let wire: MdpWire = serde_json::from_value(value.clone())?;
        if wire.p.len() != wire.s || wire.p.iter().any(|rows| rows.len() != wire.a) {
            return Err(Error::InvalidModel("S/A fields disagree with p".into()));
        }
        let trans = wire
            .p
            .iter()
            .map(|rows| rows.iter().map(|r| r.iter().map(|&x| F::of(x)).collect()).collect())
            .collect();
        let mut mdp = Self::new(
            trans,
            wire.sigma2.iter().map(|&x| F::of(x)).collect(),
            wire.mu.iter().map(|&x| F::of(x)).collect(),
            F::of(wire.r),
            wire.obs_mode,
        )?;
        mdp.seed = wire.seed;
        Ok(mdp)
    }
}

#[derive(Serialize, Deserialize)]
struct MdpWire {
    #[serde(rename = "S")]
    s: usize,
    #[serde(rename = "A")]
    a: usize,
    p: Vec<Vec<Vec<f64>>>,
    sigma2: Vec<f64>,
    mu: Vec<f64>,
    #[serde(rename = "R")]
    r: f64,
    obs_mode: ObsMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn derive_adjacency<F: Real>(trans: &[Vec<Vec<F>>]) -> Vec<Vec<bool>> {
    let s = trans.len();
    (0..s)
        .map(|i| (0..s).map(|j| trans[i].iter().any(|row| row[j] > F::zero())).collect())
        .collect()
}

/// A stationary randomized policy: one action distribution per state.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPolicy<F> {
    probs: Vec<Vec<F>>,
}

impl<F: Real> StationaryPolicy<F> {
    pub fn new(probs: Vec<Vec<F>>) -> Result<Self> {
        let tol = F::of(ROW_SUM_TOL);
        for (s, row) in probs.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidModel(format!("policy row {s} empty")));
            }
            if row.iter().any(|&x| x < F::zero()) {
                return Err(Error::InvalidModel(format!("policy row {s} has negative entry")));
            }
            let sum: F = row.iter().copied().sum();
            if (sum - F::one()).abs() > tol {
                return Err(Error::InvalidModel(format!("policy row {s} sums to {sum}")));
            }
        }
        Ok(StationaryPolicy { probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let w = F::one() / F::of(num_actions as f64);
        StationaryPolicy { probs: vec![vec![w; num_actions]; num_states] }
    }

    pub fn prob(&self, s: usize, a: usize) -> F {
        self.probs[s][a]
    }

    pub fn row(&self, s: usize) -> &[F] {
        &self.probs[s]
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = self
            .probs
            .iter()
            .map(|r| r.iter().map(|&x| x.to_f64_lossy()).collect())
            .collect();
        serde_json::json!({ "probs": rows })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wire {
            probs: Vec<Vec<f64>>,
        }
        let wire: Wire = serde_json::from_value(value.clone())?;
        Self::new(
            wire.probs
                .iter()
                .map(|r| r.iter().map(|&x| F::of(x)).collect())
                .collect(),
        )
    }
}

/// Spectral and stationarity analysis of the chain a policy induces.
#[derive(Debug, Clone)]
pub struct ChainAnalysis<F> {
    pub kernel: Matrix<F>,
    pub eta: Vec<F>,
    pub slem: F,
    pub gap: F,
    pub reversible: bool,
    pub ergodic: bool,
}

impl<F: Real> ChainAnalysis<F> {
    pub fn eta_min(&self) -> F {
        self.eta.iter().fold(F::infinity(), |m, &v| m.min(v))
    }
}

/// Kernel of the chain induced by `pi`: P(s'|s) = Σ_a p(s'|s,a) π(a|s).
pub fn induced_kernel<F: Real>(mdp: &MdpModel<F>, pi: &StationaryPolicy<F>) -> Matrix<F> {
    let s = mdp.num_states();
    let a = mdp.num_actions();
    Matrix::from_fn(s, s, |i, j| {
        (0..a).map(|ai| mdp.p(i, ai, j) * pi.prob(i, ai)).sum()
    })
}

/// Full analysis of the chain induced by a policy: stationary distribution,
/// SLEM / spectral gap, reversibility and ergodicity flags.
pub fn chain_from_policy<F: Real>(
    mdp: &MdpModel<F>,
    pi: &StationaryPolicy<F>,
) -> Result<ChainAnalysis<F>> {
    let kernel = induced_kernel(mdp, pi);
    analyze_kernel(&kernel)
}

/// Analysis of an explicit stochastic kernel.
pub fn analyze_kernel<F: Real>(kernel: &Matrix<F>) -> Result<ChainAnalysis<F>> {
    let s = kernel.nrows();
    let adj: Vec<Vec<bool>> = (0..s)
        .map(|i| (0..s).map(|j| kernel[(i, j)] > F::zero()).collect())
        .collect();
    let classes = recurrent_classes(&adj);
    if classes.len() != 1 {
        return Err(Error::NotIrreducible { num_recurrent_classes: classes.len() });
    }
    let class = &classes[0];
    let irreducible = class.len() == s;

    let eta = stationary_distribution(kernel, class)?;
    let aperiodic = {
        // period of the recurrent class subgraph
        let sub: Vec<Vec<bool>> = class
            .iter()
            .map(|&i| class.iter().map(|&j| adj[i][j]).collect())
            .collect();
        linalg::graph_period(&sub) == 1
    };
    let ergodic = irreducible && aperiodic;

    let reversible = detailed_balance_holds(kernel, &eta, F::of(1e-8));
    let slem = slem_for_analysis(kernel, &eta, class, reversible);
    let gap = F::one() - slem;
    Ok(ChainAnalysis { kernel: kernel.clone(), eta, slem, gap, reversible, ergodic })
}

fn stationary_distribution<F: Real>(kernel: &Matrix<F>, class: &[usize]) -> Result<Vec<F>> {
    let s = kernel.nrows();
    // restrict to the recurrent class (closed, hence stochastic)
    let m = class.len();
    let sub = Matrix::from_fn(m, m, |i, j| kernel[(class[i], class[j])]);
    let eta_sub = if m <= 64 {
        stationary_least_squares(&sub)
    } else {
        stationary_power_iteration(&sub)
    };
    let mut eta = vec![F::zero(); s];
    for (k, &i) in class.iter().enumerate() {
        eta[i] = eta_sub[k];
    }
    // clamp rounding noise and renormalize
    for (i, v) in eta.iter_mut().enumerate() {
        if *v < F::zero() {
            if *v < F::of(-1e-9) {
                return Err(Error::ZeroStationaryMass { state: i });
            }
            *v = F::zero();
        }
    }
    let total: F = eta.iter().copied().sum();
    for v in &mut eta {
        *v = *v / total;
    }
    Ok(eta)
}

fn stationary_least_squares<F: Real>(p: &Matrix<F>) -> Vec<F> {
    let m = p.nrows();
    // rows of (Pᵀ - I), plus the normalization row of ones
    let mut rows: Vec<Vec<F>> = Vec::with_capacity(m + 1);
    for i in 0..m {
        let mut r: Vec<F> = (0..m).map(|j| p[(j, i)]).collect();
        r[i] = r[i] - F::one();
        rows.push(r);
    }
    rows.push(vec![F::one(); m]);
    let a = Matrix::from_rows(&rows);
    let mut b = vec![F::zero(); m + 1];
    b[m] = F::one();
    solve_least_squares(&a, &b).unwrap_or_else(|| stationary_power_iteration(p))
}

fn stationary_power_iteration<F: Real>(p: &Matrix<F>) -> Vec<F> {
    let m = p.nrows();
    // damping makes the iteration safe for periodic chains
    let half = F::of(0.5);
    let mut eta = vec![F::one() / F::of(m as f64); m];
    for _ in 0..200_000 {
        let step = p.matvec_t(&eta);
        let mut next: Vec<F> = step.iter().zip(&eta).map(|(&a, &b)| half * (a + b)).collect();
        let total: F = next.iter().copied().sum();
        for v in &mut next {
            *v = *v / total;
        }
        let diff = next
            .iter()
            .zip(&eta)
            .map(|(&a, &b)| (a - b).abs())
            .fold(F::zero(), F::max);
        eta = next;
        if diff < F::of(1e-15) {
            break;
        }
    }
    eta
}

fn detailed_balance_holds<F: Real>(p: &Matrix<F>, eta: &[F], tol: F) -> bool {
    let s = p.nrows();
    for i in 0..s {
        for j in i + 1..s {
            let lhs = eta[i] * p[(i, j)];
            let rhs = eta[j] * p[(j, i)];
            if (lhs - rhs).abs() > tol {
                return false;
            }
        }
    }
    true
}

fn slem_for_analysis<F: Real>(p: &Matrix<F>, eta: &[F], class: &[usize], reversible: bool) -> F {
    // zero-mass (transient) states are excluded: the restriction to the
    // recurrent class is stochastic and carries the asymptotics
    let m = class.len();
    if m == 1 {
        return F::zero();
    }
    let sub = Matrix::from_fn(m, m, |i, j| p[(class[i], class[j])]);
    let eta_sub: Vec<F> = class.iter().map(|&i| eta[i]).collect();
    if reversible {
        slem_reversible_eigen(&sub, &eta_sub)
    } else {
        slem_norm(&sub, &eta_sub).unwrap_or(F::one())
    }
}

/// Eigenvalue-based SLEM of a reversible kernel, via the symmetrization
/// D^{1/2} P D^{-1/2} and a Jacobi eigensolver.
pub fn slem_reversible_eigen<F: Real>(p: &Matrix<F>, eta: &[F]) -> F {
    let s = p.nrows();
    let sym = Matrix::from_fn(s, s, |i, j| {
        (eta[i] / eta[j]).sqrt() * p[(i, j)]
    });
    // enforce exact symmetry against rounding
    let sym = sym.add(&sym.transpose()).scale(F::of(0.5));
    let mut vals = jacobi_eigenvalues(&sym);
    vals.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
    if vals.len() < 2 {
        return F::zero();
    }
    vals[1].abs().min(F::one()).max(F::zero())
}

/// SLEM as the spectral norm of the affine matrix
/// D^{1/2} P D^{-1/2} - √η √ηᵀ (valid proxy for non-reversible chains).
pub fn slem_of<F: Real>(p: &Matrix<F>, eta: &[F]) -> Result<F> {
    slem_norm(p, eta)
}

fn slem_norm<F: Real>(p: &Matrix<F>, eta: &[F]) -> Result<F> {
    let s = p.nrows();
    for (i, &v) in eta.iter().enumerate() {
        if !(v > F::zero()) {
            return Err(Error::ZeroStationaryMass { state: i });
        }
    }
    let m = Matrix::from_fn(s, s, |i, j| {
        (eta[i] / eta[j]).sqrt() * p[(i, j)] - (eta[i] * eta[j]).sqrt()
    });
    Ok(spectral_norm(&m).min(F::one() + F::of(1e-12)).max(F::zero()))
}

/// Pseudo-spectral gap max_k γ(P̂^k P^k)/k, with P̂ the time reversal.
pub fn pseudo_spectral_gap<F: Real>(p: &Matrix<F>, eta: &[F], k_max: usize) -> Result<F> {
    assert!(k_max >= 1, "k_max must be at least 1");
    let s = p.nrows();
    for (i, &v) in eta.iter().enumerate() {
        if !(v > F::zero()) {
            return Err(Error::ZeroStationaryMass { state: i });
        }
    }
    // time reversal: P̂ = D^{-1} Pᵀ D
    let rev = Matrix::from_fn(s, s, |i, j| eta[j] * p[(j, i)] / eta[i]);
    let mut p_pow = Matrix::<F>::identity(s);
    let mut rev_pow = Matrix::<F>::identity(s);
    let mut best = F::zero();
    for k in 1..=k_max {
        p_pow = p_pow.matmul(p);
        rev_pow = rev_pow.matmul(&rev);
        let product = rev_pow.matmul(&p_pow);
        // the product is reversible w.r.t. eta: symmetrize and use Jacobi
        let sym = Matrix::from_fn(s, s, |i, j| {
            (eta[i] / eta[j]).sqrt() * product[(i, j)]
        });
        let sym = sym.add(&sym.transpose()).scale(F::of(0.5));
        let mut vals = jacobi_eigenvalues(&sym);
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let second = if vals.len() >= 2 { vals[1] } else { F::zero() };
        let gap = (F::one() - second).max(F::zero());
        best = best.max(gap / F::of(k as f64));
    }
    Ok(best)
}

/// Result of sampling-based verification of the ergodicity assumption.
#[derive(Debug, Clone)]
pub struct ErgodicReport<F> {
    pub pass: bool,
    pub policies_checked: usize,
    pub failures: Vec<String>,
    /// empirical proxy for η_min across sampled policies
    pub min_eta: F,
    /// empirical proxy for γ_min across sampled policies
    pub min_gap: F,
}

/// Checks ergodicity for the uniform policy plus `num_sampled_policies`
/// random policies, reporting empirical η_min and γ_min proxies.
pub fn check_ergodic_assumption<F: Real>(
    mdp: &MdpModel<F>,
    num_sampled_policies: usize,
    seed: u64,
) -> ErgodicReport<F> {
    let s = mdp.num_states();
    let a = mdp.num_actions();
    let mut rng = rng_from(seed);
    let mut failures = Vec::new();
    let mut min_eta = F::infinity();
    let mut min_gap = F::infinity();
    let mut checked = 0;

    let check = |label: String, pi: &StationaryPolicy<F>,
                     failures: &mut Vec<String>,
                     min_eta: &mut F,
                     min_gap: &mut F| {
        match chain_from_policy(mdp, pi) {
            Ok(analysis) => {
                if !analysis.ergodic {
                    failures.push(format!("{label}: chain not ergodic"));
                }
                *min_eta = min_eta.min(analysis.eta_min());
                *min_gap = min_gap.min(analysis.gap);
            }
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    };

    check(
        "uniform policy".into(),
        &StationaryPolicy::uniform(s, a),
        &mut failures,
        &mut min_eta,
        &mut min_gap,
    );
    checked += 1;

    for k in 0..num_sampled_policies {
        let probs: Vec<Vec<F>> = (0..s)
            .map(|_| {
                // Dirichlet(1) row via normalized exponentials
                let raw: Vec<F> = (0..a)
                    .map(|_| F::of(-(1.0 - rng.random::<f64>()).ln()))
                    .collect();
                let total: F = raw.iter().copied().sum();
                raw.into_iter().map(|x| x / total).collect()
            })
            .collect();
        let pi = StationaryPolicy::new(probs).expect("sampled rows are distributions");
        check(format!("sampled policy {k}"), &pi, &mut failures, &mut min_eta, &mut min_gap);
        checked += 1;
    }

    ErgodicReport {
        pass: failures.is_empty(),
        policies_checked: checked,
        failures,
        min_eta,
        min_gap,
    }
}

/// Garnet generator. Plain mode places `b` uniformly-random nonzero
/// transitions per (s,a) plus a 0.001 self-loop before renormalization.
/// Reversible mode builds, per action, a symmetric flow matrix with common
/// row sums (via symmetric Sinkhorn scaling), so that every state-independent
/// policy mixture — in particular the uniform policy — is reversible; the
/// uniform-policy chain is then validated by a detailed-balance check with
/// redraws on failure.
#[allow(clippy::too_many_arguments)]
pub fn garnet_generate<F: Real>(
    s: usize,
    a: usize,
    b: usize,
    sigma_min2: F,
    sigma_max2: F,
    reversible: bool,
    seed: u64,
) -> Result<MdpModel<F>> {
    if b == 0 || b > s {
        return Err(Error::InvalidBranching { b, s });
    }
    if sigma_min2 > sigma_max2 {
        return Err(Error::InvalidModel("sigma_min2 > sigma_max2".into()));
    }
    let stream = SeedableStream::new(seed);
    let trans = if reversible {
        const MAX_REDRAWS: usize = 10;
        let mut found = None;
        for attempt in 0..MAX_REDRAWS {
            let mut rng = rng_from(stream.derive(&[0xF10u64, attempt as u64]));
            if let Some(t) = reversible_garnet_transitions::<F>(s, a, b, &mut rng) {
                found = Some(t);
                break;
            }
        }
        found.ok_or(Error::ReversibilityNotAchieved { redraws: MAX_REDRAWS })?
    } else {
        let mut rng = rng_from(stream.derive(&[0xF10u64, 0]));
        plain_garnet_transitions::<F>(s, a, b, &mut rng)
    };

    let mut rng = rng_from(stream.derive(&[0x516u64, 1]));
    let span = sigma_max2 - sigma_min2;
    let mut sigma2: Vec<F> = (0..s)
        .map(|_| sigma_min2 + span * F::of(rng.random::<f64>()))
        .collect();
    if s >= 2 {
        let lo = rng.random_range(0..s);
        let mut hi = rng.random_range(0..s - 1);
        if hi >= lo {
            hi += 1;
        }
        sigma2[lo] = sigma_min2;
        sigma2[hi] = sigma_max2;
    } else {
        sigma2[0] = sigma_min2;
    }
    let mu = vec![F::zero(); s];
    // R chosen so the bounded-support variance cap R²/4 = sigma_max2 holds
    let range = (F::of(4.0) * sigma_max2).sqrt().max(F::of(1e-6));
    let mut mdp = MdpModel::new(trans, sigma2, mu, range, ObsMode::Gaussian)?;
    mdp.seed = Some(seed);

    if reversible {
        let uniform = StationaryPolicy::uniform(s, a);
        let analysis = chain_from_policy(&mdp, &uniform)
            .map_err(|_| Error::ReversibilityNotAchieved { redraws: 10 })?;
        if !analysis.reversible || !analysis.ergodic {
            return Err(Error::ReversibilityNotAchieved { redraws: 10 });
        }
    }
    Ok(mdp)
}

fn plain_garnet_transitions<F: Real>(
    s: usize,
    a: usize,
    b: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<Vec<F>>> {
    let self_loop = F::of(0.001);
    (0..s)
        .map(|si| {
            (0..a)
                .map(|_| {
                    let targets = sample_distinct(rng, s, b);
                    let mut row = vec![F::zero(); s];
                    let mut total = F::zero();
                    for &t in &targets {
                        let w = F::of(rng.random::<f64>());
                        row[t] = row[t] + w;
                        total = total + w;
                    }
                    if total == F::zero() {
                        for &t in &targets {
                            row[t] = F::one();
                            total = total + F::one();
                        }
                    }
                    for v in &mut row {
                        *v = *v / total;
                    }
                    row[si] = row[si] + self_loop;
                    let z = F::one() + self_loop;
                    for v in &mut row {
                        *v = *v / z;
                    }
                    row
                })
                .collect()
        })
        .collect()
}

fn reversible_garnet_transitions<F: Real>(
    s: usize,
    a: usize,
    b: usize,
    rng: &mut impl Rng,
) -> Option<Vec<Vec<Vec<F>>>> {
    // branching b-1 as in the reversible construction; at least the self-loop
    let extra = b.saturating_sub(1);
    // per-action symmetric edge weights over a symmetrized support
    let mut weights: Vec<Matrix<F>> = Vec::with_capacity(a);
    let mut union_adj = vec![vec![false; s]; s];
    for _ in 0..a {
        let mut w = Matrix::<F>::zeros(s, s);
        for i in 0..s {
            // small self-loop weight keeps the chain aperiodic
            w[(i, i)] = F::of(0.01 * (0.5 + 0.5 * rng.random::<f64>()));
            for &t in &sample_distinct(rng, s, extra) {
                if t == i {
                    continue;
                }
                let v = F::of(0.1 + 0.9 * rng.random::<f64>());
                w[(i, t)] = w[(i, t)].max(v);
                w[(t, i)] = w[(t, i)].max(v);
            }
        }
        for i in 0..s {
            for j in 0..s {
                union_adj[i][j] |= w[(i, j)] > F::zero();
            }
        }
        weights.push(w);
    }
    // the union support must be strongly connected, else redraw
    let comp = linalg::strongly_connected_components(&union_adj);
    if comp.iter().any(|&c| c != comp[0]) {
        return None;
    }
    // common target stationary distribution
    let eta: Vec<F> = {
        let raw: Vec<F> = (0..s)
            .map(|_| F::of(0.2 - (1.0 - rng.random::<f64>()).ln()))
            .collect();
        let total: F = raw.iter().copied().sum();
        raw.into_iter().map(|x| x / total).collect()
    };
    let mut trans = vec![vec![Vec::new(); a]; s];
    for (ai, w) in weights.iter().enumerate() {
        let flow = symmetric_sinkhorn(w, &eta, 50_000, F::of(1e-13))?;
        for i in 0..s {
            let mut row: Vec<F> = (0..s).map(|j| flow[(i, j)]).collect();
            let total: F = row.iter().copied().sum();
            if !(total > F::zero()) {
                return None;
            }
            for v in &mut row {
                *v = *v / total;
            }
            trans[i][ai] = row;
        }
    }
    Some(trans)
}

/// Symmetric Sinkhorn scaling: find d > 0 with diag(d) W diag(d) having the
/// prescribed row sums. Preserves symmetry and the zero pattern.
fn symmetric_sinkhorn<F: Real>(
    w: &Matrix<F>,
    row_sums: &[F],
    max_iters: usize,
    tol: F,
) -> Option<Matrix<F>> {
    let n = w.nrows();
    let mut d = vec![F::one(); n];
    for _ in 0..max_iters {
        let wd = w.matvec(&d);
        let mut err = F::zero();
        for i in 0..n {
            let cur = d[i] * wd[i];
            if !(cur > F::zero()) {
                return None;
            }
            err = err.max((cur - row_sums[i]).abs() / row_sums[i]);
            d[i] = d[i] * (row_sums[i] / cur).sqrt();
        }
        if err < tol {
            let flow = Matrix::from_fn(n, n, |i, j| d[i] * w[(i, j)] * d[j]);
            return Some(flow);
        }
    }
    None
}

fn sample_distinct(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    // partial Fisher-Yates
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k.min(n));
    idx
}

/// The deterministic 3-state 2-action chain-structured MDP used throughout:
/// end states have a self-loop action and a step-inward action, the middle
/// state moves left or right. Variances (1, sigma2_mid, 1).
pub fn three_state_mdp<F: Real>(sigma2_mid: F) -> MdpModel<F> {
    let one = F::one();
    let zero = F::zero();
    let trans = vec![
        // s0: a0 self-loop, a1 -> s1
        vec![vec![one, zero, zero], vec![zero, one, zero]],
        // s1: a0 -> s0, a1 -> s2
        vec![vec![one, zero, zero], vec![zero, zero, one]],
        // s2: a0 -> s1, a1 self-loop
        vec![vec![zero, one, zero], vec![zero, zero, one]],
    ];
    let sigma2 = vec![one, sigma2_mid, one];
    let mu = vec![zero; 3];
    MdpModel::new(trans, sigma2, mu, F::of(2.0), ObsMode::Gaussian)
        .expect("static model is valid")
}

/// Self-loop policy family for the 3-state MDP: probability `q` on the
/// self-loop action at both end states, uniform in the middle.
pub fn three_state_selfloop_policy<F: Real>(q: F) -> StationaryPolicy<F> {
    let half = F::of(0.5);
    StationaryPolicy::new(vec![
        vec![q, F::one() - q],
        vec![half, half],
        vec![F::one() - q, q],
    ])
    .expect("rows are distributions")
}
