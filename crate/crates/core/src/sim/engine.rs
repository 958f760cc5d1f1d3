use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{tarq_step, transmit, LinkParams, TarqConfig, TarqState, Uplink, UplinkOutcome, UplinkPayload};
use crate::control::{apply_actuation, make_command, trigger, ControlCommand, ControlConfig};
use crate::error::{Error, Result};
use crate::estimation::{
    quality_indicator, update_aoi, update_context_estimate, update_plant_estimate_always_control,
    update_plant_estimate_cae, EstimatorMode,
};
use crate::mdp::{Action, CostModel};
use crate::model::{context_step, violation_indicator, Context, ContextChain, PlantState, SystemModel, Thresholds};
use crate::policies::{SchedulerObservation, Scheduler};

use super::metrics::{compute_metrics, Counters, Metrics};

/// Everything one closed-loop run needs.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: SystemModel,
    pub chain: ContextChain,
    pub thresholds: Thresholds,
    pub links: LinkParams,
    pub control: ControlConfig,
    pub tarq: TarqConfig,
    pub costs: CostModel,
    pub estimator: EstimatorMode,
    pub scheduler: Scheduler,
    pub horizon: u64,
    pub seed: u64,
    pub replications: u32,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::validation("simulation.slots", "K >= 1"));
        }
        if self.replications < 1 {
            return Err(Error::validation("simulation.replications", "replications >= 1"));
        }
        Ok(())
    }
}

/// Per-slot snapshot, recorded on request.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub slot: u64,
    pub delta: u32,
    pub upsilon: u8,
    pub x: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub v: Context,
    pub v_hat: Context,
    pub action: Action,
    /// A downlink transmission was attempted in this slot.
    pub control_attempt: bool,
    pub command_delivered: bool,
    /// Violation indicator of the state reached at the end of the slot.
    pub violation: bool,
}

const STREAMS: u64 = 5;

/// Independent generators per randomness source, so that runs differing
/// only in policy or estimator share noise, context and channel draws.
struct Streams {
    noise: ChaCha8Rng,
    context: ChaCha8Rng,
    uplink: ChaCha8Rng,
    downlink: ChaCha8Rng,
    scheduler: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64, replication: u64) -> Self {
        let make = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(replication * STREAMS + id);
            rng
        };
        Self { noise: make(0), context: make(1), uplink: make(2), downlink: make(3), scheduler: make(4) }
    }
}

/// Runs replication `replication` of `cfg` for `cfg.horizon` slots.
pub fn run_episode(cfg: &SimConfig, replication: u64, record_trace: bool) -> Result<(Metrics, Option<Vec<TraceRecord>>)> {
    cfg.validate()?;
    let model = &cfg.model;
    let m = model.state_dim();
    let sampler = model.noise_sampler();
    let mut rng = Streams::new(cfg.seed, replication);

    let mut x = PlantState::zero(m);
    let mut v = Context::Nominal;
    let mut x_hat = DVector::<f64>::zeros(m);
    let mut delta = 1u32;
    let mut v_hat = Context::Nominal;
    let mut aoi_b = 1u32;
    let mut uplink = Uplink::new();
    let mut tarq: TarqState<ControlCommand> = TarqState::default();
    let mut prev_attempt = false;

    let mut counters = Counters::default();
    let mut trace = record_trace.then(Vec::new);

    for k in 1..=cfg.horizon {
        let (delivered_x, delivered_v) = match uplink.deliver(k) {
            UplinkOutcome::Delivered(UplinkPayload::PlantSample(s)) => (Some(s), None),
            UplinkOutcome::Delivered(UplinkPayload::ContextSample(c)) => (None, Some(c)),
            UplinkOutcome::Nack | UplinkOutcome::Nothing => (None, None),
        };
        x_hat = match cfg.estimator {
            EstimatorMode::Baseline => {
                update_plant_estimate_always_control(model, &x_hat, delivered_x.as_ref(), cfg.control.actuation)
            }
            EstimatorMode::Cae => {
                update_plant_estimate_cae(model, &x_hat, delivered_x.as_ref(), prev_attempt, cfg.control.actuation)
            }
        };
        delta = update_aoi(delta, delivered_x.is_some());
        v_hat = update_context_estimate(v_hat, delivered_v);
        aoi_b = update_aoi(aoi_b, delivered_v.is_some());
        let upsilon = quality_indicator(v, v_hat);

        let mut action = Action::Idle;
        let mut new_command = None;
        if !tarq.is_busy() {
            let obs = SchedulerObservation { slot: k, delta, upsilon, aoi_b };
            action = cfg.scheduler.decide(&obs, &mut rng.scheduler)?;
            match action {
                Action::SendA => {
                    let ok = transmit(cfg.links.eps_a, &mut rng.uplink);
                    uplink.enqueue(UplinkPayload::PlantSample(x.x.clone()), k, ok)?;
                    counters.sends_a += 1;
                }
                Action::SendB => {
                    let ok = transmit(cfg.links.eps_b, &mut rng.uplink);
                    uplink.enqueue(UplinkPayload::ContextSample(v), k, ok)?;
                    counters.sends_b += 1;
                }
                Action::Idle => {}
            }
            if trigger(&cfg.control, &cfg.thresholds, model, &x_hat, v_hat) {
                new_command = Some(make_command(model, &x_hat, cfg.control.actuation));
                counters.commands += 1;
            }
        }

        let step = tarq_step(&cfg.tarq, &tarq, new_command, cfg.links.eps_c, &mut rng.downlink)?;
        tarq = step.state;
        if step.attempted {
            counters.control_attempts += 1;
        }
        prev_attempt = step.attempted;

        counters.squared_error += (&x.x - &x_hat).norm_squared();
        let x_before = trace.as_ref().map(|_| x.x.clone());

        let w = sampler.sample(&mut rng.noise);
        x = apply_actuation(model, &x, step.delivered.as_ref(), &w)?;
        let v_prev = v;
        v = context_step(&cfg.chain, v, &mut rng.context);
        if x.x.iter().any(|e| !e.is_finite()) {
            return Err(Error::Divergence { slot: k });
        }
        let violated = violation_indicator(&cfg.thresholds, model, &x, v);
        counters.violations += violated as u64;
        counters.slots += 1;

        if let Some(t) = trace.as_mut() {
            t.push(TraceRecord {
                slot: k,
                delta,
                upsilon,
                x: x_before.expect("recorded when tracing"),
                x_hat: x_hat.clone(),
                v: v_prev,
                v_hat,
                action,
                control_attempt: step.attempted,
                command_delivered: step.delivered.is_some(),
                violation: violated,
            });
        }
    }
    Ok((compute_metrics(&counters, &cfg.costs, cfg.control.charge_per_attempt)?, trace))
}
