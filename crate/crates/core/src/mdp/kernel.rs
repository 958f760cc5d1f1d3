use crate::error::{Error, Result};
use crate::model::{Context, ContextChain};

use super::space::{CmdpState, StateSpace, Truncation};
use super::Action;

/// Dense transition tensor indexed `(action, state, next_state)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    n_states: usize,
    n_actions: usize,
    p: Vec<f64>,
}

impl TransitionModel {
    /// Builds a model from row-major `[action][state][next]` probabilities.
    pub fn from_dense(n_states: usize, n_actions: usize, p: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || p.len() != n_actions * n_states * n_states {
            return Err(Error::Dimension(format!(
                "expected {n_actions}x{n_states}x{n_states} probabilities, got {}",
                p.len()
            )));
        }
        let model = Self { n_states, n_actions, p };
        for a in 0..n_actions {
            for s in 0..n_states {
                let row = model.row(s, a);
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&q| !(q >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Argument(format!("row (state {s}, action {a}) is not a distribution")));
                }
            }
        }
        Ok(model)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (action * self.n_states + state) * self.n_states;
        &self.p[start..start + self.n_states]
    }

    pub fn prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.row(state, action)[next]
    }
}

/// Scheduling-CMDP kernel. Sending `S_a` resets Δ on success, sending `S_b`
/// copies the true context into v̂ on success; otherwise Δ grows (saturating
/// at Δ_thr) and v̂ is held. The true context follows the chain.
pub fn build_transitions(eps_a: f64, eps_b: f64, chain: &ContextChain, delta_thr: u32) -> Result<TransitionModel> {
    for (name, eps) in [("eps_a", eps_a), ("eps_b", eps_b)] {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Argument(format!("{name} must lie in [0,1], got {eps}")));
        }
    }
    let space = StateSpace::new(delta_thr)?;
    let n = space.len();
    let mut p = vec![0.0; Action::ALL.len() * n * n];
    for s in space.states() {
        let (v, v_hat) = s.contexts();
        for action in Action::ALL {
            let (p_reset, p_learn) = match action {
                Action::SendA => (1.0 - eps_a, 0.0),
                Action::SendB => (0.0, 1.0 - eps_b),
                Action::Idle => (0.0, 0.0),
            };
            for (reset, pr) in [(true, p_reset), (false, 1.0 - p_reset)] {
                for (learn, pl) in [(true, p_learn), (false, 1.0 - p_learn)] {
                    for v_next in [Context::Nominal, Context::Sensitive] {
                        let q = pr * pl * chain.prob(v, v_next);
                        if q == 0.0 {
                            continue;
                        }
                        let delta = if reset { 1 } else { (s.delta + 1).min(delta_thr) };
                        let v_hat_next = if learn { v } else { v_hat };
                        let next = CmdpState { delta, upsilon: crate::estimation::quality_indicator(v_next, v_hat_next) };
                        p[(action.index() * n + s.flat_index()) * n + next.flat_index()] += q;
                    }
                }
            }
        }
    }
    TransitionModel::from_dense(n, Action::ALL.len(), p)
}

/// Violation indicator χ over the truncated state space.
pub fn build_reward(t: &Truncation) -> Vec<f64> {
    let space = StateSpace::new(t.delta_thr).expect("validated truncation");
    space
        .states()
        .map(|s| {
            let sensitive_unknown = s.upsilon == 3;
            let sensitive = s.upsilon >= 3;
            let violated = s.delta >= t.delta_hi
                || (s.delta >= t.delta_lo && sensitive)
                || (s.delta + 1 == t.delta_lo && sensitive_unknown);
            if violated {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}
