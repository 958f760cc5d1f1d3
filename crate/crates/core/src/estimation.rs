//! Controller-side knowledge: plant estimate, age of information, context
//! estimate and the quality indicator Υ.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::control::{effect_of_estimate, Actuation};
use crate::model::{Context, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// Assumes every slot's correction was applied.
    #[default]
    Baseline,
    /// Control-aware: applies the correction only in slots where control was
    /// triggered.
    Cae,
}

impl EstimatorMode {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorMode::Baseline => "baseline",
            EstimatorMode::Cae => "cae",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub x_hat: DVector<f64>,
    pub delta: u32,
    pub v_hat: Context,
}

impl EstimatorState {
    pub fn initial(m: usize) -> Self {
        Self { x_hat: DVector::zeros(m), delta: 1, v_hat: Context::Nominal }
    }

    pub fn upsilon(&self, v: Context) -> u8 {
        quality_indicator(v, self.v_hat)
    }
}

pub fn update_aoi(delta: u32, delivered: bool) -> u32 {
    if delivered {
        1
    } else {
        delta.saturating_add(1)
    }
}

/// Estimator that knows the issued input `u` and assumes it was actuated.
pub fn update_plant_estimate_baseline(
    model: &SystemModel,
    x_hat: &DVector<f64>,
    delivered_x: Option<&DVector<f64>>,
    u: &DVector<f64>,
) -> DVector<f64> {
    let base = delivered_x.unwrap_or(x_hat);
    model.a() * base + model.b() * u
}

/// Estimator that assumes the correction built from the previous estimate
/// was applied in every slot: `A·(x - x̂)` on delivery, `0` otherwise under
/// ideal cancellation.
pub fn update_plant_estimate_always_control(
    model: &SystemModel,
    x_hat: &DVector<f64>,
    delivered_x: Option<&DVector<f64>>,
    actuation: Actuation,
) -> DVector<f64> {
    let base = delivered_x.unwrap_or(x_hat);
    model.a() * base + effect_of_estimate(model, x_hat, actuation)
}

/// Control-aware estimator. Branches for ideal cancellation:
/// delivered and triggered `A·(x - x̂)`, delivered only `A·x`,
/// triggered only `0`, neither `A·x̂`.
pub fn update_plant_estimate_cae(
    model: &SystemModel,
    x_hat: &DVector<f64>,
    delivered_x: Option<&DVector<f64>>,
    triggered: bool,
    actuation: Actuation,
) -> DVector<f64> {
    let base = delivered_x.unwrap_or(x_hat);
    let mut next = model.a() * base;
    if triggered {
        next += effect_of_estimate(model, x_hat, actuation);
    }
    next
}

pub fn update_context_estimate(v_hat: Context, delivered_v: Option<Context>) -> Context {
    delivered_v.unwrap_or(v_hat)
}

/// `(v, v̂)`: (0,0)→1, (0,1)→2, (1,0)→3, (1,1)→4.
pub fn quality_indicator(v: Context, v_hat: Context) -> u8 {
    1 + 2 * v.bit() + v_hat.bit()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn aoi_rule() {
        assert_eq!(update_aoi(5, true), 1);
        assert_eq!(update_aoi(5, false), 6);
        assert_eq!(update_aoi(1, true), 1);
    }

    #[test]
    fn baseline_open_loop_and_zero() {
        let m = SystemModel::lfc();
        let xh = dvector![0.1, 0.2, -0.3];
        let u0 = DVector::zeros(1);
        assert_relative_eq!(update_plant_estimate_baseline(&m, &xh, None, &u0), m.a() * &xh);
        let z = DVector::zeros(3);
        assert_eq!(update_plant_estimate_baseline(&m, &xh, Some(&z), &u0), z);
    }

    #[test]
    fn baseline_with_cancelling_input_tracks_error() {
        // B = I so that -A·x̂ is exactly realisable.
        let m = SystemModel::lfc().with_b(nalgebra::DMatrix::identity(3, 3)).unwrap();
        let x = dvector![0.2, -0.1, 0.05];
        let xh = dvector![0.15, -0.1, 0.0];
        let u = -(m.a() * &xh);
        let next = update_plant_estimate_baseline(&m, &xh, Some(&x), &u);
        assert_relative_eq!(next, m.a() * (&x - &xh), epsilon = 1e-15);
    }

    #[test]
    fn cae_branches() {
        let m = SystemModel::lfc();
        let ideal = Actuation::IdealCancellation;
        let x = dvector![1.0, 0.0, 0.0];
        let xh = dvector![0.3, 0.1, 0.0];
        assert_relative_eq!(
            update_plant_estimate_cae(&m, &xh, Some(&x), false, ideal),
            dvector![-0.08, 0.0, -0.4167],
            epsilon = 1e-15
        );
        assert_relative_eq!(update_plant_estimate_cae(&m, &xh, None, true, ideal), DVector::zeros(3));
        assert_relative_eq!(update_plant_estimate_cae(&m, &x, Some(&x), true, ideal), DVector::zeros(3));
        assert_relative_eq!(
            update_plant_estimate_cae(&m, &xh, Some(&x), true, ideal),
            m.a() * (&x - &xh),
            epsilon = 1e-15
        );
        assert_relative_eq!(update_plant_estimate_cae(&m, &xh, None, false, ideal), m.a() * &xh);
    }

    #[test]
    fn cae_equals_always_control_when_triggered() {
        let m = SystemModel::lfc();
        let x = dvector![0.4, 0.1, -0.2];
        let xh = dvector![0.3, 0.1, 0.0];
        for act in [Actuation::IdealCancellation, Actuation::PseudoInverseGain] {
            for d in [Some(&x), None] {
                assert_relative_eq!(
                    update_plant_estimate_cae(&m, &xh, d, true, act),
                    update_plant_estimate_always_control(&m, &xh, d, act),
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn context_estimate_and_indicator() {
        use Context::*;
        assert_eq!(update_context_estimate(Nominal, Some(Sensitive)), Sensitive);
        assert_eq!(update_context_estimate(Sensitive, None), Sensitive);
        assert_eq!(update_context_estimate(Nominal, Some(Nominal)), Nominal);
        assert_eq!(quality_indicator(Nominal, Nominal), 1);
        assert_eq!(quality_indicator(Nominal, Sensitive), 2);
        assert_eq!(quality_indicator(Sensitive, Nominal), 3);
        assert_eq!(quality_indicator(Sensitive, Sensitive), 4);
    }
}
