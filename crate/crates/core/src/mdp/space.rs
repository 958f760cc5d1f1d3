use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Context, SystemModel, Thresholds};

/// Number of quality-indicator values.
pub const UPSILON_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CmdpState {
    pub delta: u32,
    pub upsilon: u8,
}

impl CmdpState {
    pub fn flat_index(&self) -> usize {
        (self.delta as usize - 1) * UPSILON_COUNT + (self.upsilon as usize - 1)
    }

    /// Context pair `(v, v̂)` encoded by Υ.
    pub fn contexts(&self) -> (Context, Context) {
        let u = self.upsilon - 1;
        (Context::from_bit(u / 2), Context::from_bit(u % 2))
    }
}

/// Truncated state space `{1..Δ_thr} × {1..4}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    delta_thr: u32,
}

impl StateSpace {
    pub fn new(delta_thr: u32) -> Result<Self> {
        if delta_thr < 1 {
            return Err(Error::Argument("Δ_thr must be at least 1".into()));
        }
        Ok(Self { delta_thr })
    }

    pub fn delta_thr(&self) -> u32 {
        self.delta_thr
    }

    pub fn len(&self) -> usize {
        self.delta_thr as usize * UPSILON_COUNT
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index with Δ saturated at Δ_thr.
    pub fn index(&self, delta: u32, upsilon: u8) -> usize {
        CmdpState { delta: delta.clamp(1, self.delta_thr), upsilon }.flat_index()
    }

    pub fn state(&self, index: usize) -> CmdpState {
        CmdpState { delta: (index / UPSILON_COUNT) as u32 + 1, upsilon: (index % UPSILON_COUNT) as u8 + 1 }
    }

    pub fn states(&self) -> impl Iterator<Item = CmdpState> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }
}

/// AoI truncation thresholds: `lo` belongs to the tighter context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub delta_lo: u32,
    pub delta_hi: u32,
    pub delta_thr: u32,
}

impl Truncation {
    pub fn new(delta_lo: u32, delta_hi: u32, delta_thr: u32) -> Result<Self> {
        if !(1 <= delta_lo && delta_lo <= delta_hi && delta_hi <= delta_thr) {
            return Err(Error::Argument(format!(
                "need 1 <= Δ_lo <= Δ_hi <= Δ_thr, got ({delta_lo}, {delta_hi}, {delta_thr})"
            )));
        }
        Ok(Self { delta_lo, delta_hi, delta_thr })
    }
}

/// Smallest Δ whose open-loop output deviation `√(C Φ(Δ) Cᵀ)` exceeds
/// `zeta`, searching up to `max_delta`.
pub fn context_threshold(model: &SystemModel, zeta: f64, max_delta: u32) -> Result<u32> {
    output_std_profile(model, max_delta)
        .position(|s| s > zeta)
        .map(|i| i as u32 + 1)
        .ok_or_else(|| {
            Error::Config(format!(
                "no AoI up to {max_delta} makes the output deviation exceed {zeta}; the plant may be stable or the noise too small"
            ))
        })
}

/// `√(C Φ(Δ) Cᵀ)` for Δ = 1..=max_delta, via `Φ(Δ) = A Φ(Δ-1) Aᵀ + Rw`.
pub fn output_std_profile(model: &SystemModel, max_delta: u32) -> impl Iterator<Item = f64> + '_ {
    let a = model.a();
    let mut phi = model.rw().clone();
    (1..=max_delta).map(move |_| {
        phi = a * &phi * a.transpose() + model.rw();
        model.output_variance(&phi).max(0.0).sqrt()
    })
}

pub fn truncation_threshold(model: &SystemModel, th: &Thresholds, max_delta: u32) -> Result<Truncation> {
    let d0 = context_threshold(model, th.zeta0, max_delta)?;
    let d1 = context_threshold(model, th.zeta1, max_delta)?;
    let (lo, hi) = if d0 <= d1 { (d0, d1) } else { (d1, d0) };
    Truncation::new(lo, hi, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::plant_covariance_after_control;

    #[test]
    fn flat_index_bijection() {
        let sp = StateSpace::new(7).unwrap();
        for i in 0..sp.len() {
            assert_eq!(sp.state(i).flat_index(), i);
        }
        assert_eq!(sp.index(1, 1), 0);
        assert_eq!(sp.index(2, 3), 6);
        assert_eq!(sp.index(99, 4), sp.len() - 1);
    }

    #[test]
    fn upsilon_contexts() {
        use Context::*;
        let s = |u| CmdpState { delta: 1, upsilon: u }.contexts();
        assert_eq!(s(1), (Nominal, Nominal));
        assert_eq!(s(2), (Nominal, Sensitive));
        assert_eq!(s(3), (Sensitive, Nominal));
        assert_eq!(s(4), (Sensitive, Sensitive));
    }

    #[test]
    fn profile_matches_direct_sum() {
        let m = SystemModel::lfc();
        for (i, s) in output_std_profile(&m, 20).enumerate() {
            let direct = m.output_variance(&plant_covariance_after_control(&m, i as u32 + 1).unwrap()).sqrt();
            assert!((s - direct).abs() <= 1e-12 * direct.max(1e-12), "Δ={}", i + 1);
        }
    }

    #[test]
    fn lfc_thresholds() {
        let t = truncation_threshold(&SystemModel::lfc(), &Thresholds::lfc(), 1000).unwrap();
        assert_eq!((t.delta_lo, t.delta_hi, t.delta_thr), (8, 13, 13));
    }

    #[test]
    fn tiny_thresholds_truncate_at_one() {
        let th = Thresholds::new(1e-12, 1e-12).unwrap();
        let t = truncation_threshold(&SystemModel::lfc(), &th, 1000).unwrap();
        assert_eq!((t.delta_lo, t.delta_hi), (1, 1));
    }

    #[test]
    fn equal_thresholds_coincide() {
        let th = Thresholds::new(0.05, 0.05).unwrap();
        let t = truncation_threshold(&SystemModel::lfc(), &th, 1000).unwrap();
        assert_eq!(t.delta_lo, t.delta_hi);
    }

    #[test]
    fn stable_plant_hits_cap() {
        let m = SystemModel::lfc().with_a(nalgebra::DMatrix::identity(3, 3) * 0.5).unwrap();
        let err = truncation_threshold(&m, &Thresholds::lfc(), 200).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn truncation_ordering_is_checked() {
        assert!(Truncation::new(3, 2, 4).is_err());
        assert!(Truncation::new(0, 2, 4).is_err());
        assert!(Truncation::new(2, 3, 3).is_ok());
    }
}
