use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{LinkParams, TarqConfig};
use crate::control::{ControlConfig, TriggerMode};
use crate::error::{Error, Result};
use crate::estimation::EstimatorMode;
use crate::mdp::{CmdpArtifacts, CostModel, DeterministicPolicy, SolvedSchedule, SolverConfig};
use crate::model::{spectral_radius, ContextChain, SystemModel, Thresholds};
use crate::par::{self, Execution};
use crate::policies::{AoiPresets, PolicyKind, Scheduler};

use super::engine::{run_episode, SimConfig};
use super::metrics::{pool, Metrics};
use super::output::ResultRow;

/// A fully specified experiment setting.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: SystemModel,
    pub chain: ContextChain,
    pub thresholds: Thresholds,
    pub links: LinkParams,
    pub costs: CostModel,
    pub control: ControlConfig,
    pub tarq: TarqConfig,
    pub solver: SolverConfig,
    pub max_delta: u32,
    pub presets: AoiPresets,
    pub horizon: u64,
    pub seed: u64,
    pub replications: u32,
}

impl Scenario {
    /// Load-frequency-control case study defaults.
    pub fn lfc() -> Self {
        Self {
            model: SystemModel::lfc(),
            chain: ContextChain::new(0.8).expect("valid"),
            thresholds: Thresholds::lfc(),
            links: LinkParams::lfc(),
            costs: CostModel::lfc(),
            control: ControlConfig::reactive(),
            tarq: TarqConfig::off(),
            solver: SolverConfig::default(),
            max_delta: 1000,
            presets: AoiPresets::default(),
            horizon: 100_000,
            seed: 1,
            replications: 1,
        }
    }

    pub fn artifacts(&self) -> Result<CmdpArtifacts> {
        self.links.warn_if_beyond_stability_bound(spectral_radius(&self.model));
        CmdpArtifacts::build(&self.model, &self.thresholds, &self.links, &self.chain, self.costs, self.max_delta)
    }

    pub fn solve(&self) -> Result<(CmdpArtifacts, SolvedSchedule)> {
        let art = self.artifacts()?;
        let sol = art.solve(&self.solver)?;
        Ok((art, sol))
    }

    pub fn scheduler(&self, kind: PolicyKind, gsc: Option<&DeterministicPolicy>) -> Result<Scheduler> {
        Ok(match kind {
            PolicyKind::Gsc => match gsc {
                Some(p) => Scheduler::Gsc(p.clone()),
                None => Scheduler::Gsc(self.solve()?.1.policy),
            },
            PolicyKind::Rr => Scheduler::Rr,
            PolicyKind::Rs => Scheduler::Rs,
            PolicyKind::Aoi => Scheduler::Aoi(self.presets),
            PolicyKind::Aoii => Scheduler::Aoii(self.presets),
        })
    }

    pub fn sim_config(&self, run: &RunSpec, scheduler: Scheduler) -> Result<SimConfig> {
        let mut control = self.control;
        control.mode = run.mode;
        let control = ControlConfig::new(control.mode, control.theta, control.actuation, control.control_cost)
            .map(|c| ControlConfig { charge_per_attempt: control.charge_per_attempt, ..c })?;
        let cfg = SimConfig {
            model: self.model.clone(),
            chain: self.chain,
            thresholds: self.thresholds,
            links: self.links,
            control,
            tarq: self.tarq,
            costs: self.costs,
            estimator: run.estimator,
            scheduler,
            horizon: self.horizon,
            seed: self.seed,
            replications: self.replications,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Runs every replication and pools the counters.
    pub fn run(&self, run: &RunSpec, gsc: Option<&DeterministicPolicy>, exec: Execution) -> Result<Metrics> {
        let cfg = self.sim_config(run, self.scheduler(run.policy, gsc)?)?;
        run_replications(&cfg, exec)
    }

    /// Copy of the scenario with one parameter replaced.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut s = self.clone();
        match axis {
            SweepAxis::NoiseVariance => {
                if !(value >= 0.0) {
                    return Err(Error::validation("sweep.values", "noise variance >= 0"));
                }
                let m = s.model.state_dim();
                s.model = s.model.with_noise(DMatrix::identity(m, m) * value)?;
            }
            SweepAxis::EpsA => s.links = LinkParams::new(value, s.links.eps_b, s.links.eps_c)?,
            SweepAxis::EpsB => s.links = LinkParams::new(s.links.eps_a, value, s.links.eps_c)?,
            SweepAxis::EpsC => s.links = LinkParams::new(s.links.eps_a, s.links.eps_b, value)?,
            SweepAxis::CB => s.costs = CostModel::new(s.costs.c_a, value, s.costs.c_c, s.costs.c_max)?,
            SweepAxis::CMax => s.costs = CostModel::new(s.costs.c_a, s.costs.c_b, s.costs.c_c, value)?,
            SweepAxis::Theta => {
                if !(value > 0.0 && value < 1.0) {
                    return Err(Error::validation("control.theta", "theta ∈ (0,1)"));
                }
                s.control.theta = value;
            }
            SweepAxis::Retransmission => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::validation("control.n_max", "n_max is an integer >= 1"));
                }
                s.tarq = TarqConfig::new(value as u32)?;
            }
        }
        Ok(s)
    }
}

pub fn run_replications(cfg: &SimConfig, exec: Execution) -> Result<Metrics> {
    let reps: Vec<u64> = (0..cfg.replications as u64).collect();
    let runs = par::try_map(exec, reps, |r| run_episode(cfg, r, false).map(|(m, _)| m))?;
    pool(&runs, &cfg.costs, cfg.control.charge_per_attempt)
}

/// Policy, estimator and trigger combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunSpec {
    pub policy: PolicyKind,
    pub estimator: EstimatorMode,
    pub mode: TriggerMode,
}

impl RunSpec {
    pub fn new(policy: PolicyKind, estimator: EstimatorMode, mode: TriggerMode) -> Self {
        Self { policy, estimator, mode }
    }

    pub fn row(&self, scenario: &Scenario, axis: &str, axis_value: Option<f64>, metrics: Metrics) -> ResultRow {
        ResultRow {
            policy: self.policy.label().into(),
            estimator: self.estimator.label().into(),
            control_mode: self.mode.label().into(),
            axis: axis.into(),
            axis_value,
            seed: scenario.seed,
            slots: scenario.horizon,
            metrics,
        }
    }
}

/// The eight comparison rows: four benchmarks, the solved scheduler, then
/// control-aware estimation, proactive and conservative triggering.
pub fn table3_runs() -> Vec<(&'static str, RunSpec)> {
    use EstimatorMode::*;
    use PolicyKind::*;
    use TriggerMode::*;
    vec![
        ("RS", RunSpec::new(Rs, Baseline, Reactive)),
        ("RR", RunSpec::new(Rr, Baseline, Reactive)),
        ("AoI", RunSpec::new(Aoi, Baseline, Reactive)),
        ("AoII", RunSpec::new(Aoii, Baseline, Reactive)),
        ("GSC", RunSpec::new(Gsc, Baseline, Reactive)),
        ("GSC+CAE", RunSpec::new(Gsc, Cae, Reactive)),
        ("GSC+CAE+PC", RunSpec::new(Gsc, Cae, Proactive)),
        ("GSC+CAE+CRC", RunSpec::new(Gsc, Cae, ConservativeReactive)),
    ]
}

/// Runs the comparison table, solving the schedule once.
pub fn table3(scenario: &Scenario, exec: Execution) -> Result<Vec<ResultRow>> {
    let gsc = scenario.solve()?.1.policy;
    table3_runs()
        .into_iter()
        .map(|(_, run)| {
            let m = scenario.run(&run, Some(&gsc), exec)?;
            Ok(run.row(scenario, "", None, m))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NoiseVariance,
    EpsA,
    EpsB,
    EpsC,
    CB,
    CMax,
    Theta,
    Retransmission,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 8] = [
        SweepAxis::NoiseVariance,
        SweepAxis::EpsA,
        SweepAxis::EpsB,
        SweepAxis::EpsC,
        SweepAxis::CB,
        SweepAxis::CMax,
        SweepAxis::Theta,
        SweepAxis::Retransmission,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NoiseVariance => "noise_variance",
            SweepAxis::EpsA => "eps_a",
            SweepAxis::EpsB => "eps_b",
            SweepAxis::EpsC => "eps_c",
            SweepAxis::CB => "c_b",
            SweepAxis::CMax => "c_max",
            SweepAxis::Theta => "theta",
            SweepAxis::Retransmission => "retransmission",
        }
    }

    /// Axes that leave the scheduling problem unchanged.
    fn keeps_schedule(self) -> bool {
        matches!(self, SweepAxis::EpsC | SweepAxis::Theta | SweepAxis::Retransmission)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown sweep axis `{s}`")))
    }
}

/// One row per `(run, value)`, all points sharing the scenario's seed. The
/// schedule is re-solved at every point that changes the scheduling problem.
pub fn sweep(scenario: &Scenario, runs: &[RunSpec], axis: SweepAxis, values: &[f64], exec: Execution) -> Result<Vec<ResultRow>> {
    let needs_gsc = runs.iter().any(|r| r.policy == PolicyKind::Gsc);
    let shared = if needs_gsc && axis.keeps_schedule() { Some(scenario.solve()?.1.policy) } else { None };
    let points: Vec<(f64, Scenario)> =
        values.iter().map(|&v| Ok((v, scenario.with_axis(axis, v)?))).collect::<Result<_>>()?;
    let per_point = par::try_map(exec, points, |(value, s)| -> Result<Vec<ResultRow>> {
        let gsc = match (&shared, needs_gsc) {
            (Some(p), _) => Some(p.clone()),
            (None, true) => Some(s.solve()?.1.policy),
            (None, false) => None,
        };
        runs.iter()
            .map(|run| {
                let m = s.run(run, gsc.as_ref(), Execution::Sequential)?;
                Ok(run.row(&s, axis.name(), Some(value), m))
            })
            .collect()
    })?;
    Ok(per_point.into_iter().flatten().collect())
}
