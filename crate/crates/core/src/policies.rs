//! Scheduler policies: the solved table plus round-robin, random,
//! AoI-threshold and AoII-style benchmarks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
pub use crate::mdp::Action;
use crate::mdp::DeterministicPolicy;

/// What the scheduler knows at the start of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulerObservation {
    /// Slot index, starting at 1.
    pub slot: u64,
    /// Age of the freshest delivered `S_a` sample.
    pub delta: u32,
    pub upsilon: u8,
    /// Age of the freshest delivered `S_b` sample.
    pub aoi_b: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Gsc,
    Rr,
    Rs,
    Aoi,
    Aoii,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [PolicyKind::Gsc, PolicyKind::Rr, PolicyKind::Rs, PolicyKind::Aoi, PolicyKind::Aoii];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Gsc => "gsc",
            PolicyKind::Rr => "rr",
            PolicyKind::Rs => "rs",
            PolicyKind::Aoi => "aoi",
            PolicyKind::Aoii => "aoii",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == name.to_ascii_lowercase())
    }
}

/// AoI presets for the threshold benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AoiPresets {
    pub a: u32,
    pub b: u32,
}

impl Default for AoiPresets {
    fn default() -> Self {
        Self { a: 2, b: 2 }
    }
}

pub fn gsc_decide(policy: &DeterministicPolicy, obs: &SchedulerObservation) -> Result<Action> {
    policy.lookup(obs.delta, obs.upsilon)
}

pub fn rr_decide(obs: &SchedulerObservation) -> Action {
    if obs.slot % 2 == 1 {
        Action::SendA
    } else {
        Action::SendB
    }
}

pub fn rs_decide<R: Rng + ?Sized>(rng: &mut R) -> Action {
    if rng.gen::<bool>() {
        Action::SendA
    } else {
        Action::SendB
    }
}

pub fn aoi_decide(obs: &SchedulerObservation, presets: AoiPresets) -> Action {
    if obs.delta > presets.a {
        Action::SendA
    } else if obs.aoi_b > presets.b {
        Action::SendB
    } else {
        Action::Idle
    }
}

pub fn aoii_decide(obs: &SchedulerObservation, presets: AoiPresets) -> Action {
    if matches!(obs.upsilon, 2 | 3) {
        Action::SendB
    } else if obs.delta > presets.a {
        Action::SendA
    } else {
        Action::Idle
    }
}

/// A configured scheduler.
#[derive(Debug, Clone, PartialEq)]
pub enum Scheduler {
    Gsc(DeterministicPolicy),
    Rr,
    Rs,
    Aoi(AoiPresets),
    Aoii(AoiPresets),
}

impl Scheduler {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Scheduler::Gsc(_) => PolicyKind::Gsc,
            Scheduler::Rr => PolicyKind::Rr,
            Scheduler::Rs => PolicyKind::Rs,
            Scheduler::Aoi(_) => PolicyKind::Aoi,
            Scheduler::Aoii(_) => PolicyKind::Aoii,
        }
    }

    pub fn decide<R: Rng + ?Sized>(&self, obs: &SchedulerObservation, rng: &mut R) -> Result<Action> {
        Ok(match self {
            Scheduler::Gsc(p) => gsc_decide(p, obs)?,
            Scheduler::Rr => rr_decide(obs),
            Scheduler::Rs => rs_decide(rng),
            Scheduler::Aoi(p) => aoi_decide(obs, *p),
            Scheduler::Aoii(p) => aoii_decide(obs, *p),
        })
    }
}
