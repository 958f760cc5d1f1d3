//! Constrained scheduling MDP: truncated state space, transition kernel,
//! violation map, relative value iteration, exact policy evaluation and the
//! Lagrange-multiplier bisection.

mod kernel;
mod policy;
mod solver;
mod space;

use serde::{Deserialize, Serialize};

use crate::channel::LinkParams;
use crate::error::Result;
use crate::model::{ContextChain, SystemModel, Thresholds};

pub use kernel::{build_reward, build_transitions, TransitionModel};
pub use policy::DeterministicPolicy;
pub use solver::{
    bellman_residual, bisection_solve, evaluate_policy, lagrangian_costs, rvia_solve, stationary_distribution,
    BisectionResult, CostModel, LambdaPoint, PolicyEvaluation, RviaSolution, RviaStats, SolverConfig, StageCosts,
};
pub use space::{context_threshold, output_std_profile, truncation_threshold, CmdpState, StateSpace, Truncation, UPSILON_COUNT};

/// Scheduler action in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    SendA,
    SendB,
    Idle,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::SendA, Action::SendB, Action::Idle];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// Everything needed to solve the scheduling CMDP for one scenario.
#[derive(Debug, Clone)]
pub struct CmdpArtifacts {
    pub truncation: Truncation,
    pub space: StateSpace,
    pub transitions: TransitionModel,
    pub violation: Vec<f64>,
    pub costs: CostModel,
}

#[derive(Debug, Clone)]
pub struct SolvedSchedule {
    pub lambda: f64,
    pub policy: DeterministicPolicy,
    pub evaluation: PolicyEvaluation,
    pub lower_bound: DeterministicPolicy,
    pub lower_evaluation: PolicyEvaluation,
}

impl CmdpArtifacts {
    pub fn build(
        model: &SystemModel,
        th: &Thresholds,
        links: &LinkParams,
        chain: &ContextChain,
        costs: CostModel,
        max_delta: u32,
    ) -> Result<Self> {
        let truncation = truncation_threshold(model, th, max_delta)?;
        Self::from_truncation(truncation, links, chain, costs)
    }

    pub fn from_truncation(truncation: Truncation, links: &LinkParams, chain: &ContextChain, costs: CostModel) -> Result<Self> {
        let space = StateSpace::new(truncation.delta_thr)?;
        let transitions = build_transitions(links.eps_a, links.eps_b, chain, truncation.delta_thr)?;
        let violation = build_reward(&truncation);
        Ok(Self { truncation, space, transitions, violation, costs })
    }

    pub fn evaluate(&self, policy: &DeterministicPolicy) -> Result<PolicyEvaluation> {
        evaluate_policy(&self.transitions, &policy.indices(), &self.violation, &self.costs.action_costs())
    }

    pub fn solve(&self, cfg: &SolverConfig) -> Result<SolvedSchedule> {
        let res = bisection_solve(&self.transitions, &self.violation, &self.costs, cfg)?;
        Ok(SolvedSchedule {
            lambda: res.lambda,
            policy: DeterministicPolicy::from_indices(self.space, &res.feasible.solution.policy)?,
            evaluation: res.feasible.evaluation,
            lower_bound: DeterministicPolicy::from_indices(self.space, &res.lower.solution.policy)?,
            lower_evaluation: res.lower.evaluation,
        })
    }
}
