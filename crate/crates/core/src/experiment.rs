//! Experiment files: one JSON document holding every parameter of a run.
//! Omitted keys take the load-frequency-control defaults and unknown keys are
//! rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::channel::{LinkParams, TarqConfig};
use crate::control::{Actuation, ControlConfig, TriggerMode};
use crate::error::{Error, Result};
use crate::estimation::EstimatorMode;
use crate::mdp::{CostModel, SolverConfig};
use crate::model::{ContextChain, SystemModel, Thresholds};
use crate::policies::{AoiPresets, PolicyKind};
use crate::sim::{RunSpec, Scenario, SweepAxis};

type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSection {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Per-component variance of the i.i.d. process noise.
    pub noise_variance: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        let m = SystemModel::lfc();
        Self {
            a: rows(m.a()),
            b: m.b().column(0).iter().copied().collect(),
            c: m.c().iter().copied().collect(),
            noise_variance: m.rw()[(0, 0)],
        }
    }
}

/// Partial plant override selected by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PlantVariant {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<f64>,
}

fn default_variants() -> BTreeMap<String, PlantVariant> {
    let qs = SystemModel::lfc_quasi_static();
    BTreeMap::from([("quasi_static".to_string(), PlantVariant { a: Some(rows(qs.a())), ..Default::default() })])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContextSection {
    /// Probability that the context keeps its value from one slot to the next.
    pub p_stay: f64,
}

impl Default for ContextSection {
    fn default() -> Self {
        Self { p_stay: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSection {
    pub zeta0: f64,
    pub zeta1: f64,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        let t = Thresholds::lfc();
        Self { zeta0: t.zeta0, zeta1: t.zeta1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub eps_a: f64,
    pub eps_b: f64,
    pub eps_c: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        let l = LinkParams::lfc();
        Self { eps_a: l.eps_a, eps_b: l.eps_b, eps_c: l.eps_c }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSection {
    pub c_a: f64,
    pub c_b: f64,
    pub c_c: f64,
    pub c_max: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        let c = CostModel::lfc();
        Self { c_a: c.c_a, c_b: c.c_b, c_c: c.c_c, c_max: c.c_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    pub mode: TriggerMode,
    pub theta: f64,
    pub actuation: Actuation,
    /// Downlink attempts per command; 1 disables retransmission.
    pub n_max: u32,
    /// Charge `c_c` for every downlink attempt rather than once per command.
    pub charge_per_attempt: bool,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self { mode: TriggerMode::Reactive, theta: 0.5, actuation: Actuation::default(), n_max: 1, charge_per_attempt: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerSection {
    pub policy: PolicyKind,
    pub aoi_preset_a: u32,
    pub aoi_preset_b: u32,
    /// Hard cap on the truncation search.
    pub max_delta: u32,
}

impl Default for SchedulerSection {
    fn default() -> Self {
        let p = AoiPresets::default();
        Self { policy: PolicyKind::Gsc, aoi_preset_a: p.a, aoi_preset_b: p.b, max_delta: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub slots: u64,
    pub seed: u64,
    pub replications: u32,
    pub estimator: EstimatorMode,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { slots: 100_000, seed: 1, replications: 1, estimator: EstimatorMode::Cae }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub policy_table: String,
    pub simulate: String,
    pub sweep: String,
    pub table3: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            policy_table: "policy.csv".into(),
            simulate: "simulate.csv".into(),
            sweep: "sweep.csv".into(),
            table3: "table3.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    pub policy: PolicyKind,
    #[serde(default)]
    pub estimator: EstimatorMode,
    #[serde(default = "reactive")]
    pub mode: TriggerMode,
}

fn reactive() -> TriggerMode {
    TriggerMode::Reactive
}

impl From<RunEntry> for RunSpec {
    fn from(r: RunEntry) -> Self {
        RunSpec::new(r.policy, r.estimator, r.mode)
    }
}

fn default_runs() -> Vec<RunEntry> {
    vec![RunEntry { policy: PolicyKind::Gsc, estimator: EstimatorMode::Cae, mode: TriggerMode::ConservativeReactive }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs: Vec<RunEntry>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { axis: SweepAxis::Theta, values: vec![0.2, 0.4, 0.6, 0.8], runs: default_runs() }
    }
}

/// Top-level experiment document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub name: String,
    /// Name of an entry of `variants` applied on top of `plant`.
    pub variant: Option<String>,
    pub plant: PlantSection,
    pub variants: BTreeMap<String, PlantVariant>,
    pub context: ContextSection,
    pub thresholds: ThresholdSection,
    pub links: LinkSection,
    pub costs: CostSection,
    pub control: ControlSection,
    pub solver: SolverConfig,
    pub scheduler: SchedulerSection,
    pub simulation: SimulationSection,
    pub output: OutputSection,
    /// Combinations run by `simulate`; when absent, the single run given by
    /// `scheduler.policy`, `simulation.estimator` and `control.mode`.
    pub runs: Option<Vec<RunEntry>>,
    pub sweep: SweepSection,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "lfc".into(),
            variant: None,
            plant: PlantSection::default(),
            variants: default_variants(),
            context: ContextSection::default(),
            thresholds: ThresholdSection::default(),
            links: LinkSection::default(),
            costs: CostSection::default(),
            control: ControlSection::default(),
            solver: SolverConfig::default(),
            scheduler: SchedulerSection::default(),
            simulation: SimulationSection::default(),
            output: OutputSection::default(),
            runs: None,
            sweep: SweepSection::default(),
        }
    }
}

impl ExperimentSpec {
    /// Parses a document. Whitespace-only input yields the defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let text = if text.trim().is_empty() { "{}" } else { text };
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                Error::Parse(format!("line {} column {}: {inner}", inner.line(), inner.column()))
            } else {
                Error::Parse(format!("`{path}`: {inner}"))
            }
        })?;
        spec.scenario()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec is serialisable")
    }

    /// Builds the validated scenario; every check names its key.
    pub fn scenario(&self) -> Result<Scenario> {
        let mut plant = self.plant.clone();
        if let Some(name) = &self.variant {
            let v = self
                .variants
                .get(name)
                .ok_or_else(|| Error::validation("variant", format!("one of the keys of `variants`, got `{name}`")))?;
            if let Some(a) = &v.a {
                plant.a = a.clone();
            }
            if let Some(b) = &v.b {
                plant.b = b.clone();
            }
            if let Some(n) = v.noise_variance {
                plant.noise_variance = n;
            }
        }
        let model = plant_model(&plant)?;
        let chain = ContextChain::new(self.context.p_stay)
            .map_err(|_| Error::validation("context.p_stay", "p_stay ∈ [0,1]"))?;
        let thresholds = Thresholds::new(self.thresholds.zeta0, self.thresholds.zeta1)?;
        let l = self.links;
        for (key, e) in [("links.eps_a", l.eps_a), ("links.eps_b", l.eps_b), ("links.eps_c", l.eps_c)] {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::validation(key, "eps ∈ [0,1)"));
            }
        }
        let links = LinkParams::new(l.eps_a, l.eps_b, l.eps_c)?;
        let c = self.costs;
        for (key, v) in [("costs.c_a", c.c_a), ("costs.c_b", c.c_b), ("costs.c_c", c.c_c), ("costs.c_max", c.c_max)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(key, "cost >= 0"));
            }
        }
        let costs = CostModel::new(c.c_a, c.c_b, c.c_c, c.c_max)?;
        let ctl = self.control;
        if !(ctl.theta > 0.0 && ctl.theta < 1.0) {
            return Err(Error::validation("control.theta", "theta ∈ (0,1)"));
        }
        let mut control = ControlConfig::new(ctl.mode, ctl.theta, ctl.actuation, c.c_c)?;
        control.charge_per_attempt = ctl.charge_per_attempt;
        if ctl.n_max < 1 {
            return Err(Error::validation("control.n_max", "n_max >= 1"));
        }
        let tarq = TarqConfig::new(ctl.n_max)?;
        self.solver.validate()?;
        let sch = self.scheduler;
        if sch.aoi_preset_a < 1 || sch.aoi_preset_b < 1 {
            return Err(Error::validation("scheduler.aoi_preset_a", "presets >= 1"));
        }
        if sch.max_delta < 2 {
            return Err(Error::validation("scheduler.max_delta", "max_delta >= 2"));
        }
        let sim = self.simulation;
        if sim.slots < 1 {
            return Err(Error::validation("simulation.slots", "slots >= 1"));
        }
        if sim.replications < 1 {
            return Err(Error::validation("simulation.replications", "replications >= 1"));
        }
        if self.runs.as_ref().is_some_and(|r| r.is_empty()) {
            return Err(Error::validation("runs", "at least one entry"));
        }
        if self.sweep.values.is_empty() || self.sweep.runs.is_empty() {
            return Err(Error::validation("sweep", "non-empty values and runs"));
        }
        Ok(Scenario {
            model,
            chain,
            thresholds,
            links,
            costs,
            control,
            tarq,
            solver: self.solver,
            max_delta: sch.max_delta,
            presets: AoiPresets { a: sch.aoi_preset_a, b: sch.aoi_preset_b },
            horizon: sim.slots,
            seed: sim.seed,
            replications: sim.replications,
        })
    }

    pub fn runs(&self) -> Vec<RunSpec> {
        match &self.runs {
            Some(runs) => runs.iter().map(|&r| r.into()).collect(),
            None => vec![RunSpec::new(self.scheduler.policy, self.simulation.estimator, self.control.mode)],
        }
    }

    pub fn sweep_runs(&self) -> Vec<RunSpec> {
        self.sweep.runs.iter().map(|&r| r.into()).collect()
    }

    pub fn output_path(&self, file: &str) -> PathBuf {
        self.output.dir.join(file)
    }
}

/// Reads and validates an experiment file.
pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentSpec::from_json(&text)
}

fn rows(m: &DMatrix<f64>) -> Matrix {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn plant_model(p: &PlantSection) -> Result<SystemModel> {
    let n = p.a.len();
    if n == 0 || p.a.iter().any(|r| r.len() != n) {
        return Err(Error::validation("plant.a", "a non-empty square matrix"));
    }
    if p.b.len() != n {
        return Err(Error::validation("plant.b", "length equal to the order of `plant.a`"));
    }
    if p.c.len() != n {
        return Err(Error::validation("plant.c", "length equal to the order of `plant.a`"));
    }
    if !(p.noise_variance >= 0.0 && p.noise_variance.is_finite()) {
        return Err(Error::validation("plant.noise_variance", "noise_variance >= 0"));
    }
    let a = DMatrix::from_fn(n, n, |i, j| p.a[i][j]);
    let b = DMatrix::from_column_slice(n, 1, &p.b);
    let c = RowDVector::from_row_slice(&p.c);
    SystemModel::new(a, b, c, DMatrix::identity(n, n) * p.noise_variance)
}
