use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::kernel::TransitionModel;
use super::Action;

/// Per-action costs and the average scheduling-cost budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c_a: f64,
    pub c_b: f64,
    pub c_c: f64,
    pub c_max: f64,
}

impl CostModel {
    pub fn new(c_a: f64, c_b: f64, c_c: f64, c_max: f64) -> Result<Self> {
        for (key, v) in [("costs.c_a", c_a), ("costs.c_b", c_b), ("costs.c_c", c_c), ("costs.c_max", c_max)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(key, format!("{} >= 0", key.trim_start_matches("costs."))));
            }
        }
        Ok(Self { c_a, c_b, c_c, c_max })
    }

    pub fn lfc() -> Self {
        Self { c_a: 1.0, c_b: 0.8, c_c: 0.5, c_max: 0.23 }
    }

    /// Scheduling cost of an action.
    pub fn action_cost(&self, a: Action) -> f64 {
        match a {
            Action::SendA => self.c_a,
            Action::SendB => self.c_b,
            Action::Idle => 0.0,
        }
    }

    pub fn action_costs(&self) -> Vec<f64> {
        Action::ALL.iter().map(|&a| self.action_cost(a)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub iota: f64,
    pub kappa: f64,
    pub lambda_l: f64,
    pub lambda_u: f64,
    /// Flat index of the reference state.
    pub s_ref: usize,
    pub max_iterations: usize,
    pub max_doublings: u32,
    /// Self-loop weight τ of the aperiodicity transform `τI + (1-τ)P`; the
    /// gain and greedy policy are unchanged, convergence is not hostage to
    /// near-periodic chains.
    pub aperiodicity: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { iota: 1e-6, kappa: 1e-4, lambda_l: 0.0, lambda_u: 1.0, s_ref: 0, max_iterations: 20_000, max_doublings: 60, aperiodicity: 0.5 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iota > 0.0) {
            return Err(Error::validation("solver.iota", "iota > 0"));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::validation("solver.kappa", "kappa > 0"));
        }
        if !(self.lambda_l >= 0.0 && self.lambda_l < self.lambda_u) {
            return Err(Error::validation("solver.lambda_u", "0 <= lambda_l < lambda_u"));
        }
        if !(0.0..1.0).contains(&self.aperiodicity) {
            return Err(Error::validation("solver.aperiodicity", "aperiodicity ∈ [0,1)"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("solver.max_iterations", "max_iterations >= 1"));
        }
        Ok(())
    }
}

/// Stage costs indexed `[action][state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCosts(pub Vec<Vec<f64>>);

/// `Rs(s) + λ·c(a)` for every action.
pub fn lagrangian_costs(rs: &[f64], action_costs: &[f64], lambda: f64) -> StageCosts {
    StageCosts(action_costs.iter().map(|&c| rs.iter().map(|&r| r + lambda * c).collect()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RviaStats {
    pub iterations: usize,
    /// Multiply-adds spent in Bellman backups.
    pub ops: u64,
    pub ops_per_iteration: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RviaSolution {
    pub values: Vec<f64>,
    pub gain: f64,
    /// Greedy action index per state.
    pub policy: Vec<usize>,
    pub residual: f64,
    pub stats: RviaStats,
}

fn backup(
    t: &TransitionModel,
    costs: &StageCosts,
    tau: f64,
    v: &[f64],
    q_min: &mut [f64],
    argmin: Option<&mut [usize]>,
) {
    let n = t.n_states();
    let tie_tol = 1e-9;
    let mut best_a = vec![0usize; if argmin.is_some() { n } else { 0 }];
    for s in 0..n {
        let mut best = f64::INFINITY;
        let mut best_idx = 0;
        for a in 0..t.n_actions() {
            let row = t.row(s, a);
            let q = costs.0[a][s] + tau * v[s] + (1.0 - tau) * row.iter().zip(v).map(|(p, x)| p * x).sum::<f64>();
            if q < best - tie_tol {
                best = q;
                best_idx = a;
            } else if q < best {
                best = q;
            }
        }
        q_min[s] = best;
        if !best_a.is_empty() {
            best_a[s] = best_idx;
        }
    }
    if let Some(out) = argmin {
        out.copy_from_slice(&best_a);
    }
}

fn rvia_run(t: &TransitionModel, costs: &StageCosts, cfg: &SolverConfig) -> Result<(RviaSolution, bool)> {
    let n = t.n_states();
    if costs.0.len() != t.n_actions() || costs.0.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("stage costs do not match the transition model".into()));
    }
    if cfg.s_ref >= n {
        return Err(Error::Argument(format!("reference state {} outside 0..{n}", cfg.s_ref)));
    }
    cfg.validate()?;
    let tau = cfg.aperiodicity;
    let per_iter = (t.n_actions() * n * n) as u64;
    let mut v = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut gain = 0.0;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        backup(t, costs, tau, &v, &mut z, None);
        gain = z[cfg.s_ref];
        residual = 0.0;
        for s in 0..n {
            let next = z[s] - gain;
            residual = f64::max(residual, (next - v[s]).abs());
            v[s] = next;
        }
        if residual < cfg.iota {
            break;
        }
    }
    let mut policy = vec![0; n];
    let mut q = vec![0.0; n];
    backup(t, costs, tau, &v, &mut q, Some(&mut policy));
    let solution = RviaSolution {
        values: v.iter().map(|x| x * (1.0 - tau)).collect(),
        gain,
        policy,
        residual,
        stats: RviaStats { iterations, ops: per_iter * (iterations as u64 + 1), ops_per_iteration: per_iter },
    };
    Ok((solution, residual < cfg.iota))
}

/// Relative value iteration on dense Bellman backups. Ties go to the lowest
/// action index.
pub fn rvia_solve(t: &TransitionModel, costs: &StageCosts, cfg: &SolverConfig) -> Result<RviaSolution> {
    match rvia_run(t, costs, cfg)? {
        (sol, true) => Ok(sol),
        (sol, false) => Err(Error::NonConvergence { iterations: sol.stats.iterations, residual: sol.residual }),
    }
}

/// Largest Bellman-equation violation `|g + V(s) - min_a Q(s,a)|`.
pub fn bellman_residual(t: &TransitionModel, costs: &StageCosts, sol: &RviaSolution) -> f64 {
    let mut q = vec![0.0; t.n_states()];
    backup(t, costs, 0.0, &sol.values, &mut q, None);
    q.iter().zip(&sol.values).map(|(qs, vs)| (sol.gain + vs - qs).abs()).fold(0.0, f64::max)
}

fn induced_chain(t: &TransitionModel, policy: &[usize]) -> Result<DMatrix<f64>> {
    let n = t.n_states();
    if policy.len() != n || policy.iter().any(|&a| a >= t.n_actions()) {
        return Err(Error::Evaluation("policy does not cover the state space".into()));
    }
    Ok(DMatrix::from_fn(n, n, |s, s2| t.prob(s, policy[s], s2)))
}

fn reachability(p: &DMatrix<f64>) -> Vec<Vec<bool>> {
    let n = p.nrows();
    (0..n)
        .map(|start| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(s) = stack.pop() {
                for s2 in 0..n {
                    if p[(s, s2)] > 0.0 && !seen[s2] {
                        seen[s2] = true;
                        stack.push(s2);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Stationary distribution of an irreducible sub-chain on `class`.
fn class_distribution(p: &DMatrix<f64>, class: &[usize]) -> Result<Vec<f64>> {
    let k = class.len();
    // (Pᵀ - I) restricted to the class, last equation replaced by Σμ = 1.
    let mut m = DMatrix::<f64>::from_fn(k, k, |i, j| p[(class[j], class[i])]);
    for i in 0..k {
        m[(i, i)] -= 1.0;
    }
    for j in 0..k {
        m[(k - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k);
    rhs[k - 1] = 1.0;
    let mu = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Evaluation("recurrent class has no unique stationary distribution".into()))?;
    if mu.iter().any(|x| !x.is_finite() || *x < -1e-9) {
        return Err(Error::Evaluation("stationary solve produced an invalid distribution".into()));
    }
    Ok(mu.iter().map(|x| x.max(0.0)).collect())
}

/// Long-run state occupancy of the chain induced by `policy` when the start
/// state is drawn from `initial`. Chains with several closed classes are
/// handled by weighting each class's stationary distribution with the
/// probability of being absorbed into it.
pub fn stationary_distribution(t: &TransitionModel, policy: &[usize], initial: &[f64]) -> Result<Vec<f64>> {
    let n = t.n_states();
    if initial.len() != n || initial.iter().any(|&x| !(x >= 0.0)) || (initial.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Argument("initial distribution must be a probability vector over the states".into()));
    }
    let p = induced_chain(t, policy)?;
    let reach = reachability(&p);
    let recurrent: Vec<bool> = (0..n).map(|s| (0..n).all(|s2| !reach[s][s2] || reach[s2][s])).collect();

    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for s in (0..n).filter(|&s| recurrent[s]) {
        if class_of[s] == usize::MAX {
            let members: Vec<usize> = (0..n).filter(|&s2| reach[s][s2]).collect();
            for &m in &members {
                class_of[m] = classes.len();
            }
            classes.push(members);
        }
    }

    let mut weights = vec![0.0; classes.len()];
    for s in (0..n).filter(|&s| recurrent[s]) {
        weights[class_of[s]] += initial[s];
    }
    // Absorption probabilities from transient states: h = P_TT h + P_TC.
    let transient: Vec<usize> = (0..n).filter(|&s| !recurrent[s]).collect();
    if !transient.is_empty() {
        let k = transient.len();
        let mut lhs = DMatrix::<f64>::identity(k, k);
        let mut rhs = DMatrix::<f64>::zeros(k, classes.len());
        for (i, &s) in transient.iter().enumerate() {
            for (j, &s2) in transient.iter().enumerate() {
                lhs[(i, j)] -= p[(s, s2)];
            }
            for s2 in 0..n {
                if class_of[s2] != usize::MAX {
                    rhs[(i, class_of[s2])] += p[(s, s2)];
                }
            }
        }
        let h = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Evaluation("absorption system is singular".into()))?;
        // Each row is a distribution over classes; renormalise away solver
        // round-off, which is large when absorption is slow.
        for (i, &s) in transient.iter().enumerate() {
            let row: Vec<f64> = h.row(i).iter().map(|x| x.max(0.0)).collect();
            let total: f64 = row.iter().sum();
            if !(total > 0.0 && total.is_finite()) {
                return Err(Error::Evaluation("absorption probabilities are degenerate".into()));
            }
            for (w, x) in weights.iter_mut().zip(&row) {
                *w += initial[s] * x / total;
            }
        }
    }

    let mut mu = vec![0.0; n];
    for (class, w) in classes.iter().zip(weights) {
        if w > 0.0 {
            for (&s, m) in class.iter().zip(class_distribution(&p, class)?) {
                mu[s] += w * m;
            }
        }
    }
    Ok(mu)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEvaluation {
    /// Long-run average violation cost.
    pub violation: f64,
    /// Long-run average scheduling cost.
    pub scheduling_cost: f64,
}

impl PolicyEvaluation {
    pub fn lagrangian(&self, lambda: f64) -> f64 {
        self.violation + lambda * self.scheduling_cost
    }
}

/// Long-run averages with the start state drawn uniformly, so that every
/// closed class of a multichain policy is accounted for.
pub fn evaluate_policy(t: &TransitionModel, policy: &[usize], rs: &[f64], action_costs: &[f64]) -> Result<PolicyEvaluation> {
    if rs.len() != t.n_states() || action_costs.len() != t.n_actions() {
        return Err(Error::Dimension("reward or cost vector does not match the transition model".into()));
    }
    let n = t.n_states();
    let mu = stationary_distribution(t, policy, &vec![1.0 / n as f64; n])?;
    let violation = mu.iter().zip(rs).map(|(m, r)| m * r).sum();
    let scheduling_cost = mu.iter().zip(policy).map(|(m, &a)| m * action_costs[a]).sum();
    Ok(PolicyEvaluation { violation, scheduling_cost })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub solution: RviaSolution,
    pub evaluation: PolicyEvaluation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionResult {
    /// Returned multiplier (upper end of the final bracket).
    pub lambda: f64,
    pub feasible: LambdaPoint,
    /// Policy at the lower end of the final bracket.
    pub lower: LambdaPoint,
    pub rvia_calls: usize,
}

/// Bisection points tolerate an unconverged RVIA run: near a multiplier
/// where policies tie the values settle very slowly, and feasibility is
/// judged by exact evaluation of the greedy policy anyway.
fn solve_at(t: &TransitionModel, rs: &[f64], costs: &[f64], lambda: f64, cfg: &SolverConfig) -> Result<LambdaPoint> {
    let (solution, converged) = rvia_run(t, &lagrangian_costs(rs, costs, lambda), cfg)?;
    if !converged {
        log::warn!(
            "value iteration at λ = {lambda} stopped after {} iterations with residual {:e}; using its greedy policy",
            solution.stats.iterations,
            solution.residual
        );
    }
    let evaluation = evaluate_policy(t, &solution.policy, rs, costs)?;
    Ok(LambdaPoint { lambda, solution, evaluation })
}

/// Bisection on the Lagrange multiplier: a midpoint whose policy exceeds the
/// budget raises `λ_l`, otherwise it lowers `λ_u`. An infeasible initial
/// `λ_u` is doubled until feasible.
pub fn bisection_solve(t: &TransitionModel, rs: &[f64], cost: &CostModel, cfg: &SolverConfig) -> Result<BisectionResult> {
    cfg.validate()?;
    let costs = cost.action_costs();
    let feasible = |p: &LambdaPoint| p.evaluation.scheduling_cost <= cost.c_max + 1e-12;
    let mut calls = 1;

    let mut lambda_l = cfg.lambda_l;
    let mut lambda_u = cfg.lambda_u;
    let mut upper = solve_at(t, rs, &costs, lambda_u, cfg)?;
    let mut lower = None;
    let mut doublings = 0;
    while !feasible(&upper) {
        if doublings == cfg.max_doublings {
            return Err(Error::Infeasible(format!(
                "scheduling cost {:.6} still exceeds budget {} at λ = {lambda_u}",
                upper.evaluation.scheduling_cost, cost.c_max
            )));
        }
        lambda_l = lambda_u;
        lambda_u *= 2.0;
        lower = Some(std::mem::replace(&mut upper, solve_at(t, rs, &costs, lambda_u, cfg)?));
        calls += 1;
        doublings += 1;
    }

    while lambda_u - lambda_l >= cfg.kappa {
        let mid = 0.5 * (lambda_l + lambda_u);
        let point = solve_at(t, rs, &costs, mid, cfg)?;
        calls += 1;
        if feasible(&point) {
            lambda_u = mid;
            upper = point;
        } else {
            lambda_l = mid;
            lower = Some(point);
        }
    }
    let lower = match lower {
        Some(p) => p,
        None => {
            calls += 1;
            solve_at(t, rs, &costs, lambda_l, cfg)?
        }
    };
    log::debug!("bisection finished with λ in [{lambda_l}, {lambda_u}] after {calls} solves");
    Ok(BisectionResult { lambda: lambda_u, feasible: upper, lower, rvia_calls: calls })
}
