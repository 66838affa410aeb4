//! The stationary state-action polytope Λ, its floor-restricted version
//! Λ_η̲ (every state marginal at least 2η̲), the linear-minimization oracle
//! over it, and conversions between state-action distributions and policies.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mdp::{chain_from_policy, MdpModel, StationaryPolicy};
use crate::scalar::Real;
use crate::simplex::solve_lp;

const SUM_TOL: f64 = 1e-10;
pub const DEFAULT_FLOW_TOL: f64 = 1e-8;

/// A probability distribution over state-action pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct StateActionDist<F> {
    lam: Vec<Vec<F>>,
}

impl<F: Real> StateActionDist<F> {
    pub fn new(lam: Vec<Vec<F>>) -> Result<Self> {
        if lam.is_empty() || lam[0].is_empty() {
            return Err(Error::InvalidModel("empty state-action distribution".into()));
        }
        let a = lam[0].len();
        let mut total = F::zero();
        for (s, row) in lam.iter().enumerate() {
            if row.len() != a {
                return Err(Error::InvalidModel(format!("ragged row at state {s}")));
            }
            for &v in row {
                if v < F::of(-1e-12) {
                    return Err(Error::InvalidModel(format!("negative mass at state {s}")));
                }
                total = total + v.max(F::zero());
            }
        }
        if (total - F::one()).abs() > F::of(SUM_TOL) {
            return Err(Error::InvalidModel(format!("total mass {total}, expected 1")));
        }
        let lam = lam
            .into_iter()
            .map(|row| row.into_iter().map(|v| v.max(F::zero())).collect())
            .collect();
        Ok(StateActionDist { lam })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let w = F::one() / F::of((num_states * num_actions) as f64);
        StateActionDist { lam: vec![vec![w; num_actions]; num_states] }
    }

    pub fn num_states(&self) -> usize {
        self.lam.len()
    }

    pub fn num_actions(&self) -> usize {
        self.lam[0].len()
    }

    pub fn get(&self, s: usize, a: usize) -> F {
        self.lam[s][a]
    }

    pub fn row(&self, s: usize) -> &[F] {
        &self.lam[s]
    }

    /// State marginals Σ_a λ(s,a).
    pub fn marginals(&self) -> Vec<F> {
        self.lam.iter().map(|row| row.iter().copied().sum()).collect()
    }

    pub fn min_marginal(&self) -> F {
        self.marginals().into_iter().fold(F::infinity(), F::min)
    }

    /// Flat view in (s, a) row-major order.
    pub fn as_flat(&self) -> Vec<F> {
        self.lam.iter().flatten().copied().collect()
    }

    pub fn from_flat(flat: &[F], num_states: usize, num_actions: usize) -> Result<Self> {
        assert_eq!(flat.len(), num_states * num_actions);
        Self::new(
            (0..num_states)
                .map(|s| flat[s * num_actions..(s + 1) * num_actions].to_vec())
                .collect(),
        )
    }

    /// Convex combination (1-w)·self + w·other.
    pub fn blend(&self, other: &Self, w: F) -> Self {
        let lam = self
            .lam
            .iter()
            .zip(&other.lam)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(&x, &y)| (F::one() - w) * x + w * y)
                    .collect()
            })
            .collect();
        StateActionDist { lam }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = self
            .lam
            .iter()
            .map(|r| r.iter().map(|&x| x.to_f64_lossy()).collect())
            .collect();
        serde_json::json!({ "lam": rows })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Wire {
            lam: Vec<Vec<f64>>,
        }
        let wire: Wire = serde_json::from_value(value.clone())?;
        Self::new(
            wire.lam
                .iter()
                .map(|r| r.iter().map(|&x| F::of(x)).collect())
                .collect(),
        )
    }

    /// JSON with flow residual and marginal metadata for external consumers.
    pub fn to_json_with_report(&self, mdp: &MdpModel<F>, eta_floor: F) -> serde_json::Value {
        let report = lambda_membership(mdp, self, eta_floor, F::of(DEFAULT_FLOW_TOL));
        serde_json::json!({
            "lam": self.to_json()["lam"],
            "eta_floor": eta_floor.to_f64_lossy(),
            "max_flow_residual": report.max_flow_residual.to_f64_lossy(),
            "min_marginal": report.min_marginal.to_f64_lossy(),
            "member": report.member,
        })
    }
}

/// Outcome of a Λ_η̲ membership check.
#[derive(Debug, Clone, Copy)]
pub struct MembershipReport<F> {
    pub max_flow_residual: F,
    pub min_marginal: F,
    pub member: bool,
}

/// Per-state flow-balance residuals Σ_b λ(s,b) − Σ_{s',a} p(s|s',a) λ(s',a).
pub fn flow_residuals<F: Real>(mdp: &MdpModel<F>, lam: &StateActionDist<F>) -> Vec<F> {
    let s_n = mdp.num_states();
    let a_n = mdp.num_actions();
    let marginals = lam.marginals();
    (0..s_n)
        .map(|s| {
            let inflow: F = (0..s_n)
                .map(|sp| (0..a_n).map(|a| mdp.p(sp, a, s) * lam.get(sp, a)).sum())
                .sum();
            marginals[s] - inflow
        })
        .collect()
}

/// Checks membership of λ in Λ_η̲: flow balance within `tol` and every state
/// marginal at least 2η̲.
pub fn lambda_membership<F: Real>(
    mdp: &MdpModel<F>,
    lam: &StateActionDist<F>,
    eta_floor: F,
    tol: F,
) -> MembershipReport<F> {
    let max_flow_residual = flow_residuals(mdp, lam)
        .into_iter()
        .map(F::abs)
        .fold(F::zero(), F::max);
    let min_marginal = lam.min_marginal();
    MembershipReport {
        max_flow_residual,
        min_marginal,
        member: max_flow_residual <= tol && min_marginal >= F::of(2.0) * eta_floor - tol,
    }
}

/// Conditional policy of a state-action distribution:
/// π(a|s) = λ(s,a)/Σ_b λ(s,b). With `repair` set, zero-marginal states get a
/// uniform action distribution instead of an error.
pub fn lambda_to_policy<F: Real>(
    lam: &StateActionDist<F>,
    repair: bool,
) -> Result<StationaryPolicy<F>> {
    let a_n = lam.num_actions();
    let mut rows = Vec::with_capacity(lam.num_states());
    for (s, m) in lam.marginals().into_iter().enumerate() {
        if m > F::zero() {
            rows.push(lam.row(s).iter().map(|&v| v / m).collect());
        } else if repair {
            rows.push(vec![F::one() / F::of(a_n as f64); a_n]);
        } else {
            return Err(Error::ZeroMarginal { state: s });
        }
    }
    StationaryPolicy::new(rows)
}

/// State-action distribution of a policy: λ(s,a) = η_π(s) π(a|s).
pub fn policy_to_lambda<F: Real>(
    mdp: &MdpModel<F>,
    pi: &StationaryPolicy<F>,
) -> Result<StateActionDist<F>> {
    let analysis = chain_from_policy(mdp, pi)?;
    StateActionDist::new(
        (0..mdp.num_states())
            .map(|s| {
                (0..mdp.num_actions())
                    .map(|a| analysis.eta[s] * pi.prob(s, a))
                    .collect()
            })
            .collect(),
    )
}

/// Exact linear minimization of ⟨c, λ⟩ over Λ_η̲ by LP. The LP has the λ
/// variables plus one surplus variable per state for the marginal floor.
pub fn linear_min_oracle<F: Real>(
    mdp: &MdpModel<F>,
    cost: &[Vec<F>],
    eta_floor: F,
) -> Result<StateActionDist<F>> {
    let s_n = mdp.num_states();
    let a_n = mdp.num_actions();
    assert_eq!(cost.len(), s_n, "cost shape mismatch");
    assert!(cost.iter().all(|r| r.len() == a_n), "cost shape mismatch");
    assert!(eta_floor >= F::zero(), "eta_floor must be nonnegative");
    let n_lam = s_n * a_n;
    let with_floor = eta_floor > F::zero();
    let n = n_lam + if with_floor { s_n } else { 0 };
    let m = s_n + 1 + if with_floor { s_n } else { 0 };

    let mut a_mat = Matrix::<F>::zeros(m, n);
    let mut b = vec![F::zero(); m];
    let idx = |s: usize, a: usize| s * a_n + a;
    // flow balance rows (rank S-1; the redundant row is handled by phase 1)
    for s in 0..s_n {
        for a in 0..a_n {
            a_mat[(s, idx(s, a))] = a_mat[(s, idx(s, a))] + F::one();
        }
        for sp in 0..s_n {
            for a in 0..a_n {
                a_mat[(s, idx(sp, a))] = a_mat[(s, idx(sp, a))] - mdp.p(sp, a, s);
            }
        }
    }
    // normalization row
    for j in 0..n_lam {
        a_mat[(s_n, j)] = F::one();
    }
    b[s_n] = F::one();
    // marginal floor rows: Σ_a λ(s,a) - w_s = 2η̲
    if with_floor {
        for s in 0..s_n {
            let r = s_n + 1 + s;
            for a in 0..a_n {
                a_mat[(r, idx(s, a))] = F::one();
            }
            a_mat[(r, n_lam + s)] = -F::one();
            b[r] = F::of(2.0) * eta_floor;
        }
    }
    let c: Vec<F> = {
        let mut v: Vec<F> = cost.iter().flatten().copied().collect();
        v.resize(n, F::zero());
        v
    };
    let sol = solve_lp(&a_mat, &b, &c).map_err(|e| match e {
        Error::Infeasible(_) => Error::Infeasible(format!(
            "restricted polytope is empty at eta_floor {}",
            eta_floor.to_f64_lossy()
        )),
        other => other,
    })?;
    // tidy rounding residue and renormalize exactly
    let mut flat: Vec<F> = sol.x[..n_lam].iter().map(|&v| v.max(F::zero())).collect();
    let total: F = flat.iter().copied().sum();
    for v in &mut flat {
        *v = *v / total;
    }
    StateActionDist::from_flat(&flat, s_n, a_n)
}

/// Largest η̲ for which Λ_η̲ is nonempty, located by bisection to within
/// `tol` (diagnostic; feasibility itself is decided by the LP).
pub fn max_feasible_eta_floor<F: Real>(mdp: &MdpModel<F>, tol: F) -> F {
    let s_n = mdp.num_states();
    let a_n = mdp.num_actions();
    let zero_cost = vec![vec![F::zero(); a_n]; s_n];
    let feasible = |eta: F| linear_min_oracle(mdp, &zero_cost, eta).is_ok();
    let mut lo = F::zero();
    // marginals sum to 1, so 2η̲·S ≤ 1 always bounds the floor
    let mut hi = F::one() / (F::of(2.0) * F::of(s_n as f64));
    if feasible(hi) {
        return hi;
    }
    while hi - lo > tol {
        let mid = (lo + hi) * F::of(0.5);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
