//! Erasure links. The uplink carries one sensor packet per slot and delivers
//! it one slot later; the downlink is instantaneous and may retransmit a
//! command under TARQ (truncated ARQ).

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Context;

/// Packet error probabilities for sensor `S_a`, sensor `S_b` and the
/// controller-to-actuator link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub eps_a: f64,
    pub eps_b: f64,
    pub eps_c: f64,
}

impl LinkParams {
    pub fn new(eps_a: f64, eps_b: f64, eps_c: f64) -> Result<Self> {
        for (key, eps) in [("links.eps_a", eps_a), ("links.eps_b", eps_b), ("links.eps_c", eps_c)] {
            if !(0.0..1.0).contains(&eps) {
                return Err(Error::validation(key, "eps ∈ [0,1)"));
            }
        }
        Ok(Self { eps_a, eps_b, eps_c })
    }

    pub fn lfc() -> Self {
        Self { eps_a: 1e-3, eps_b: 1e-3, eps_c: 1e-3 }
    }

    pub fn max_eps(&self) -> f64 {
        self.eps_a.max(self.eps_b).max(self.eps_c)
    }

    /// Logs a warning and returns `true` when the largest error probability
    /// is at or above `1/ρ²(A)`, where a stabilising stationary
    /// deterministic schedule is no longer guaranteed.
    pub fn warn_if_beyond_stability_bound(&self, spectral_radius: f64) -> bool {
        let bound = 1.0 / (spectral_radius * spectral_radius);
        let beyond = self.max_eps() >= bound;
        if beyond {
            log::warn!(
                "max packet error probability {} >= 1/rho(A)^2 = {:.4}; optimality of the deterministic schedule is not guaranteed",
                self.max_eps(),
                bound
            );
        }
        beyond
    }
}

/// One erasure-channel use: `true` with probability `1 - eps`.
pub fn transmit<R: Rng + ?Sized>(eps: f64, rng: &mut R) -> bool {
    rng.gen::<f64>() >= eps
}

#[derive(Debug, Clone, PartialEq)]
pub enum UplinkPayload {
    PlantSample(DVector<f64>),
    ContextSample(Context),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UplinkInFlight {
    pub payload: UplinkPayload,
    pub sent_at: u64,
    pub success: bool,
}

/// What the controller (payload) and scheduler (ACK/NACK) observe in a slot.
#[derive(Debug, Clone, PartialEq)]
pub enum UplinkOutcome {
    Delivered(UplinkPayload),
    Nack,
    Nothing,
}

/// Single-packet uplink with a one-slot transit time.
#[derive(Debug, Clone, Default)]
pub struct Uplink {
    in_flight: Option<UplinkInFlight>,
}

impl Uplink {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sends `payload` at `slot`; the success draw is fixed at send time.
    pub fn enqueue(&mut self, payload: UplinkPayload, slot: u64, success: bool) -> Result<()> {
        if let Some(p) = &self.in_flight {
            return Err(Error::Contract(format!(
                "uplink already carries a packet sent at slot {} (enqueue at slot {slot})",
                p.sent_at
            )));
        }
        self.in_flight = Some(UplinkInFlight { payload, sent_at: slot, success });
        Ok(())
    }

    /// Resolves the packet sent at `slot - 1`, if any.
    pub fn deliver(&mut self, slot: u64) -> UplinkOutcome {
        match &self.in_flight {
            Some(p) if p.sent_at < slot => {
                let p = self.in_flight.take().expect("checked above");
                if p.success {
                    UplinkOutcome::Delivered(p.payload)
                } else {
                    UplinkOutcome::Nack
                }
            }
            _ => UplinkOutcome::Nothing,
        }
    }

    pub fn is_busy(&self) -> bool {
        self.in_flight.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TarqConfig {
    pub n_max: u32,
}

impl TarqConfig {
    pub fn new(n_max: u32) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::validation("control.n_max", "n_max >= 1"));
        }
        Ok(Self { n_max })
    }

    /// Single attempt, no retransmission.
    pub fn off() -> Self {
        Self { n_max: 1 }
    }
}

/// Downlink retransmission state. `pending` is `None` exactly when
/// `attempts_used == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TarqState<P> {
    pending: Option<P>,
    attempts_used: u32,
}

impl<P> Default for TarqState<P> {
    fn default() -> Self {
        Self { pending: None, attempts_used: 0 }
    }
}

impl<P> TarqState<P> {
    pub fn pending(&self) -> Option<&P> {
        self.pending.as_ref()
    }

    pub fn attempts_used(&self) -> u32 {
        self.attempts_used
    }

    /// A retransmission burst is in progress.
    pub fn is_busy(&self) -> bool {
        self.pending.is_some()
    }
}

/// Result of one downlink slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TarqStep<P> {
    pub state: TarqState<P>,
    /// Command that reached the actuator this slot (the original payload).
    pub delivered: Option<P>,
    /// Whether a transmission was attempted this slot.
    pub attempted: bool,
}

pub fn tarq_step<P: Clone, R: Rng + ?Sized>(
    cfg: &TarqConfig,
    st: &TarqState<P>,
    new_command: Option<P>,
    eps_c: f64,
    rng: &mut R,
) -> Result<TarqStep<P>> {
    let command = match (&st.pending, new_command) {
        (Some(_), Some(_)) => {
            return Err(Error::Contract("new command issued during a retransmission burst".into()));
        }
        (Some(p), None) => p.clone(),
        (None, Some(c)) => c,
        (None, None) => return Ok(TarqStep { state: st.clone(), delivered: None, attempted: false }),
    };
    let attempts = st.attempts_used + 1;
    let state = if transmit(eps_c, rng) {
        return Ok(TarqStep { state: TarqState::default(), delivered: Some(command), attempted: true });
    } else if attempts >= cfg.n_max {
        TarqState::default()
    } else {
        TarqState { pending: Some(command), attempts_used: attempts }
    };
    Ok(TarqStep { state, delivered: None, attempted: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::mock::StepRng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_link_always_succeeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..10_000).all(|_| transmit(0.0, &mut rng)));
    }

    #[test]
    fn near_certain_loss_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let eps = 0.999;
        let n = 100_000;
        let ok = (0..n).filter(|_| transmit(eps, &mut rng)).count() as f64 / n as f64;
        assert!((ok - (1.0 - eps)).abs() < 0.01);
    }

    #[test]
    fn lfc_error_rate_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let failures = (0..1_000_000).filter(|_| !transmit(1e-3, &mut rng)).count();
        assert!((700..=1300).contains(&failures), "{failures}");
    }

    #[test]
    fn link_params_validation() {
        assert!(LinkParams::new(0.0, 0.5, 0.999).is_ok());
        assert!(LinkParams::new(1.0, 0.0, 0.0).is_err());
        assert!(LinkParams::new(0.0, -0.1, 0.0).is_err());
        let links = LinkParams::new(0.6, 0.4, 0.0).unwrap();
        assert!(links.warn_if_beyond_stability_bound(1.568));
        assert!(!LinkParams::lfc().warn_if_beyond_stability_bound(1.568));
    }

    #[test]
    fn uplink_delivers_one_slot_later() {
        let mut up = Uplink::new();
        up.enqueue(UplinkPayload::ContextSample(Context::Sensitive), 4, true).unwrap();
        assert_eq!(up.deliver(4), UplinkOutcome::Nothing);
        assert_eq!(up.deliver(5), UplinkOutcome::Delivered(UplinkPayload::ContextSample(Context::Sensitive)));
        assert_eq!(up.deliver(6), UplinkOutcome::Nothing);
    }

    #[test]
    fn uplink_failure_is_nacked() {
        let mut up = Uplink::new();
        up.enqueue(UplinkPayload::ContextSample(Context::Nominal), 1, false).unwrap();
        assert_eq!(up.deliver(2), UplinkOutcome::Nack);
        assert_eq!(Uplink::new().deliver(2), UplinkOutcome::Nothing);
    }

    #[test]
    fn uplink_rejects_double_enqueue() {
        let mut up = Uplink::new();
        up.enqueue(UplinkPayload::ContextSample(Context::Nominal), 1, true).unwrap();
        let err = up.enqueue(UplinkPayload::ContextSample(Context::Nominal), 1, true);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn tarq_perfect_link_delivers_first_try() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = TarqConfig::new(3).unwrap();
        let step = tarq_step(&cfg, &TarqState::default(), Some(7u32), 0.0, &mut rng).unwrap();
        assert_eq!(step.delivered, Some(7));
        assert_eq!(step.state.attempts_used(), 0);
        assert!(step.attempted);
    }

    #[test]
    fn tarq_exhausts_after_n_max_failures() {
        // StepRng yielding u64::MAX maps to a uniform draw just below 1, so
        // every transmission with eps close to 1 fails.
        let mut rng = StepRng::new(0, 0);
        let cfg = TarqConfig::new(3).unwrap();
        let eps = 1.0 - 1e-9;
        let mut st = TarqState::default();
        let s1 = tarq_step(&cfg, &st, Some('u'), eps, &mut rng).unwrap();
        assert_eq!((s1.delivered, s1.state.attempts_used()), (None, 1));
        st = s1.state;
        let s2 = tarq_step(&cfg, &st, None, eps, &mut rng).unwrap();
        assert_eq!((s2.delivered, s2.state.attempts_used()), (None, 2));
        let s3 = tarq_step(&cfg, &s2.state, None, eps, &mut rng).unwrap();
        assert_eq!(s3.delivered, None);
        assert!(!s3.state.is_busy());
        assert_eq!(s3.state.attempts_used(), 0);
        let idle = tarq_step(&cfg, &s3.state, None, eps, &mut rng).unwrap();
        assert!(!idle.attempted);
    }

    #[test]
    fn tarq_rejects_new_command_during_burst() {
        let mut rng = StepRng::new(0, 0);
        let cfg = TarqConfig::new(2).unwrap();
        let s1 = tarq_step(&cfg, &TarqState::default(), Some(1), 1.0 - 1e-9, &mut rng).unwrap();
        assert!(matches!(tarq_step(&cfg, &s1.state, Some(2), 0.5, &mut rng), Err(Error::Contract(_))));
    }

    #[test]
    fn single_attempt_tarq_never_retains() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = TarqConfig::off();
        for i in 0..1000 {
            let s = tarq_step(&cfg, &TarqState::default(), Some(i), 0.5, &mut rng).unwrap();
            assert!(!s.state.is_busy());
        }
        assert!(TarqConfig::new(0).is_err());
    }
}
