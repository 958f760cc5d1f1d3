//! Event-triggered control: trigger rules, command construction and
//! actuation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Context, PlantState, SystemModel, Thresholds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerMode {
    Reactive,
    Proactive,
    #[serde(alias = "crc")]
    ConservativeReactive,
}

impl TriggerMode {
    pub fn label(self) -> &'static str {
        match self {
            TriggerMode::Reactive => "reactive",
            TriggerMode::Proactive => "proactive",
            TriggerMode::ConservativeReactive => "crc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Actuation {
    /// The delivered command cancels `A·x̂` exactly.
    #[default]
    IdealCancellation,
    /// `u = -pinv(B)·A·x̂` applied through `B`.
    PseudoInverseGain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlConfig {
    pub mode: TriggerMode,
    pub theta: f64,
    pub actuation: Actuation,
    pub control_cost: f64,
    /// Charge `c_c` for every downlink attempt (retransmissions included)
    /// rather than once per issued command.
    pub charge_per_attempt: bool,
}

impl ControlConfig {
    pub fn new(mode: TriggerMode, theta: f64, actuation: Actuation, control_cost: f64) -> Result<Self> {
        if mode == TriggerMode::ConservativeReactive && !(theta > 0.0 && theta < 1.0) {
            return Err(Error::validation("control.theta", "theta ∈ (0,1)"));
        }
        if !(control_cost >= 0.0) || !control_cost.is_finite() {
            return Err(Error::validation("costs.c_c", "c_c >= 0"));
        }
        Ok(Self { mode, theta, actuation, control_cost, charge_per_attempt: true })
    }

    pub fn reactive() -> Self {
        Self {
            mode: TriggerMode::Reactive,
            theta: 0.5,
            actuation: Actuation::IdealCancellation,
            control_cost: 0.5,
            charge_per_attempt: true,
        }
    }

    pub fn with_mode(mut self, mode: TriggerMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Control payload. It carries the estimate used at trigger time so that a
/// retransmitted command applies the original, possibly stale, correction.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCommand {
    pub x_hat: DVector<f64>,
    pub u: DVector<f64>,
    pub actuation: Actuation,
}

pub fn trigger_reactive(th: &Thresholds, model: &SystemModel, x_hat: &DVector<f64>, v_hat: Context) -> bool {
    model.output(x_hat).abs() > th.for_context(v_hat)
}

/// `x_hat_next` is the open-loop prediction `A·x̂`; the context is predicted
/// to persist.
pub fn trigger_proactive(th: &Thresholds, model: &SystemModel, x_hat_next: &DVector<f64>, v_hat: Context) -> bool {
    model.output(x_hat_next).abs() > th.for_context(v_hat)
}

pub fn trigger_crc(
    th: &Thresholds,
    model: &SystemModel,
    x_hat: &DVector<f64>,
    v_hat: Context,
    theta: f64,
) -> Result<bool> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::validation("control.theta", "theta ∈ (0,1)"));
    }
    Ok(model.output(x_hat).abs() > theta * th.for_context(v_hat))
}

/// Trigger decision for a prevalidated configuration.
pub fn trigger(cfg: &ControlConfig, th: &Thresholds, model: &SystemModel, x_hat: &DVector<f64>, v_hat: Context) -> bool {
    let zeta = th.for_context(v_hat);
    match cfg.mode {
        TriggerMode::Reactive => model.output(x_hat).abs() > zeta,
        TriggerMode::Proactive => model.output(&(model.a() * x_hat)).abs() > zeta,
        TriggerMode::ConservativeReactive => model.output(x_hat).abs() > cfg.theta * zeta,
    }
}

fn pseudo_inverse(b: &DMatrix<f64>) -> DMatrix<f64> {
    b.clone()
        .pseudo_inverse(1e-12)
        .expect("pseudo-inverse with non-negative tolerance")
}

pub fn make_command(model: &SystemModel, x_hat: &DVector<f64>, actuation: Actuation) -> ControlCommand {
    let u = -(pseudo_inverse(model.b()) * model.a() * x_hat);
    ControlCommand { x_hat: x_hat.clone(), u, actuation }
}

/// Additive contribution `B·u` of a command to the next plant state.
pub fn control_effect(model: &SystemModel, cmd: &ControlCommand) -> DVector<f64> {
    match cmd.actuation {
        Actuation::IdealCancellation => -(model.a() * &cmd.x_hat),
        Actuation::PseudoInverseGain => model.b() * &cmd.u,
    }
}

/// Effect a command built from `x_hat` would have, without materialising it.
pub(crate) fn effect_of_estimate(model: &SystemModel, x_hat: &DVector<f64>, actuation: Actuation) -> DVector<f64> {
    match actuation {
        Actuation::IdealCancellation => -(model.a() * x_hat),
        Actuation::PseudoInverseGain => control_effect(model, &make_command(model, x_hat, actuation)),
    }
}

pub fn apply_actuation(
    model: &SystemModel,
    x: &PlantState,
    cmd: Option<&ControlCommand>,
    w: &DVector<f64>,
) -> Result<PlantState> {
    let m = model.state_dim();
    if x.x.len() != m || w.len() != m {
        return Err(Error::Dimension(format!(
            "state has {} entries and noise {}, model expects {m}",
            x.x.len(),
            w.len()
        )));
    }
    let mut next = model.a() * &x.x + w;
    if let Some(cmd) = cmd {
        if cmd.x_hat.len() != m {
            return Err(Error::Dimension(format!("command estimate has {} entries, expected {m}", cmd.x_hat.len())));
        }
        next += control_effect(model, cmd);
    }
    Ok(PlantState { x: next, k: x.k + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector, RowDVector};

    fn th() -> Thresholds {
        Thresholds::lfc()
    }

    #[test]
    fn reactive_uses_estimated_context() {
        let m = SystemModel::lfc();
        let x = dvector![0.05, 0.0, 0.0];
        assert!(!trigger_reactive(&th(), &m, &x, Context::Nominal));
        assert!(trigger_reactive(&th(), &m, &x, Context::Sensitive));
        let z = DVector::zeros(3);
        assert!(!trigger_reactive(&th(), &m, &z, Context::Nominal));
        assert!(!trigger_reactive(&th(), &m, &z, Context::Sensitive));
    }

    #[test]
    fn proactive_fires_before_reactive() {
        let m = SystemModel::lfc();
        // C·A·e2 = 6 while C·e2 = 0.
        let d = dvector![0.0, 1.0, 0.0];
        let x = d * 0.02;
        let pred = m.a() * &x;
        assert!(!trigger_reactive(&th(), &m, &x, Context::Nominal));
        assert!(trigger_proactive(&th(), &m, &pred, Context::Nominal));
        assert!(!trigger_proactive(&th(), &m, &DVector::zeros(3), Context::Sensitive));
    }

    #[test]
    fn crc_shrinks_threshold() {
        let m = SystemModel::lfc();
        let x = dvector![0.06, 0.0, 0.0];
        assert!(trigger_crc(&th(), &m, &x, Context::Nominal, 0.5).unwrap());
        assert!(!trigger_reactive(&th(), &m, &x, Context::Nominal));
        assert!(!trigger_crc(&th(), &m, &DVector::zeros(3), Context::Nominal, 0.5).unwrap());
        assert!(trigger_crc(&th(), &m, &x, Context::Nominal, 1.0).is_err());
        assert!(trigger_crc(&th(), &m, &x, Context::Nominal, 0.0).is_err());
    }

    #[test]
    fn crc_near_one_matches_reactive() {
        let m = SystemModel::lfc();
        for &y in &[0.0, 0.009, 0.011, 0.05, 0.0999, 0.1001, 0.3] {
            let x = dvector![y, 0.0, 0.0];
            for v in [Context::Nominal, Context::Sensitive] {
                assert_eq!(
                    trigger_crc(&th(), &m, &x, v, 1.0 - 1e-12).unwrap(),
                    trigger_reactive(&th(), &m, &x, v),
                    "y={y}"
                );
            }
        }
    }

    #[test]
    fn theta_validated_only_for_crc() {
        assert!(ControlConfig::new(TriggerMode::Reactive, 1.5, Actuation::IdealCancellation, 0.5).is_ok());
        let err = ControlConfig::new(TriggerMode::ConservativeReactive, 1.5, Actuation::IdealCancellation, 0.5)
            .unwrap_err()
            .to_string();
        assert!(err.contains("theta ∈ (0,1)"), "{err}");
    }

    #[test]
    fn zero_estimate_gives_null_command() {
        let m = SystemModel::lfc();
        for act in [Actuation::IdealCancellation, Actuation::PseudoInverseGain] {
            let c = make_command(&m, &DVector::zeros(3), act);
            assert_eq!(control_effect(&m, &c), DVector::zeros(3));
        }
    }

    #[test]
    fn ideal_cancellation_with_exact_estimate_zeroes_state() {
        let m = SystemModel::lfc();
        let x = PlantState { x: dvector![0.3, -0.2, 0.1], k: 4 };
        let cmd = make_command(&m, &x.x, Actuation::IdealCancellation);
        let next = apply_actuation(&m, &x, Some(&cmd), &DVector::zeros(3)).unwrap();
        assert_relative_eq!(next.x, DVector::zeros(3), epsilon = 1e-15);
        assert_eq!(next.k, 5);
    }

    #[test]
    fn open_loop_actuation() {
        let m = SystemModel::lfc();
        let x = PlantState { x: dvector![1.0, 0.0, 0.0], k: 0 };
        let next = apply_actuation(&m, &x, None, &DVector::zeros(3)).unwrap();
        assert_relative_eq!(next.x, dvector![-0.08, 0.0, -0.4167], epsilon = 1e-15);
    }

    #[test]
    fn stale_command_leaves_drift() {
        let m = SystemModel::lfc();
        let stale = dvector![0.1, 0.0, 0.02];
        let x = PlantState { x: dvector![0.15, 0.01, 0.0], k: 9 };
        let cmd = make_command(&m, &stale, Actuation::IdealCancellation);
        let w = dvector![1e-4, -2e-4, 3e-4];
        let next = apply_actuation(&m, &x, Some(&cmd), &w).unwrap();
        let expected = m.a() * &x.x - m.a() * &stale + &w;
        assert_relative_eq!(next.x, expected, epsilon = 1e-15);
    }

    #[test]
    fn scalar_plant_modes_coincide() {
        let m = SystemModel::new(dmatrix![1.7], dmatrix![0.5], RowDVector::from_element(1, 1.0), dmatrix![0.0]).unwrap();
        let xh = dvector![0.4];
        let ideal = make_command(&m, &xh, Actuation::IdealCancellation);
        let pinv = make_command(&m, &xh, Actuation::PseudoInverseGain);
        assert_relative_eq!(ideal.u[0], -(1.7 / 0.5) * 0.4, epsilon = 1e-12);
        assert_relative_eq!(control_effect(&m, &ideal), control_effect(&m, &pinv), epsilon = 1e-12);
    }

    #[test]
    fn pseudo_inverse_projects_onto_input_column() {
        let m = SystemModel::lfc();
        let xh = dvector![0.0, 0.0, 0.2];
        let c = make_command(&m, &xh, Actuation::PseudoInverseGain);
        let eff = control_effect(&m, &c);
        assert_relative_eq!(eff[0], 0.0);
        assert_relative_eq!(eff[1], 0.0);
        assert_relative_eq!(eff[2], 1.25 * 0.2, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = SystemModel::lfc();
        let x = PlantState::zero(2);
        assert!(matches!(apply_actuation(&m, &x, None, &DVector::zeros(3)), Err(Error::Dimension(_))));
    }
}
