use std::ops::AddAssign;

use crate::error::{Error, Result};
use crate::mdp::CostModel;

/// Raw event counts of one or more runs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Counters {
    pub slots: u64,
    pub violations: u64,
    pub sends_a: u64,
    pub sends_b: u64,
    /// Downlink transmissions, retransmissions included.
    pub control_attempts: u64,
    /// Commands issued by the trigger.
    pub commands: u64,
    /// Sum over slots of `‖x_k - x̂_k‖²`.
    pub squared_error: f64,
}

impl AddAssign for Counters {
    fn add_assign(&mut self, o: Self) {
        self.slots += o.slots;
        self.violations += o.violations;
        self.sends_a += o.sends_a;
        self.sends_b += o.sends_b;
        self.control_attempts += o.control_attempts;
        self.commands += o.commands;
        self.squared_error += o.squared_error;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub violation_prob: f64,
    pub norm_total_cost: f64,
    pub norm_updating_cost: f64,
    pub norm_control_cost: f64,
    /// Mean squared estimation error per slot.
    pub mse: f64,
    pub counters: Counters,
}

/// Time averages with costs normalised by the per-slot maximum `c_a + c_c`.
pub fn compute_metrics(counters: &Counters, costs: &CostModel, charge_per_attempt: bool) -> Result<Metrics> {
    let k = counters.slots;
    if k == 0 {
        return Err(Error::Argument("metrics need at least one slot".into()));
    }
    let denom = k as f64 * (costs.c_a + costs.c_c);
    if !(denom > 0.0) {
        return Err(Error::Argument("c_a + c_c must be positive to normalise costs".into()));
    }
    let control_events = if charge_per_attempt { counters.control_attempts } else { counters.commands };
    let norm_updating_cost = (counters.sends_a as f64 * costs.c_a + counters.sends_b as f64 * costs.c_b) / denom;
    let norm_control_cost = control_events as f64 * costs.c_c / denom;
    Ok(Metrics {
        violation_prob: counters.violations as f64 / k as f64,
        norm_total_cost: norm_updating_cost + norm_control_cost,
        norm_updating_cost,
        norm_control_cost,
        mse: counters.squared_error / k as f64,
        counters: *counters,
    })
}

/// Pools several runs by summing their counters.
pub fn pool(runs: &[Metrics], costs: &CostModel, charge_per_attempt: bool) -> Result<Metrics> {
    let mut total = Counters::default();
    for r in runs {
        total += r.counters;
    }
    compute_metrics(&total, costs, charge_per_attempt)
}
