//! Seeded discrete-event simulation of one device under one policy.
//!
//! Each arrival class draws from its own [`RngStream`], so two runs that share
//! a seed see identical IOS, CCRR and CSA arrival instants regardless of
//! policy. Events at equal instants execute in insertion order; whenever both
//! timers are rescheduled by one transition the device expiry is queued
//! first, so an on-time PRR always precedes the registrar's expiry check.

pub mod queue;
pub mod rng;
pub mod trace;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ArrivalKind, CostModel, CostedEvent, Policy, PolicyKind, RateConfig, TimerParams};
use crate::protocol::{Effects, ProtocolState, Registration};

pub use queue::{Entity, EventKind, EventQueue, SimEvent};
pub use rng::{sample_exponential, RngStream};
pub use trace::{TraceDigest, TraceRecord, TraceWriter};

/// Everything needed to simulate one device.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub rates: RateConfig,
    pub timer: TimerParams,
    pub policy: Policy,
    pub costs: CostModel,
    /// Instant at which the device silently leaves the network.
    pub detach_at: Option<f64>,
    /// Network-originated session attempts at fixed instants.
    pub incoming_sessions: Vec<f64>,
}

impl Scenario {
    pub fn new(rates: RateConfig, timer: TimerParams, policy: Policy, costs: CostModel) -> Self {
        Self {
            rates,
            timer,
            policy,
            costs,
            detach_at: None,
            incoming_sessions: Vec::new(),
        }
    }

    pub fn with_policy(&self, policy: Policy) -> Self {
        Self {
            policy,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.detach_at {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::usage(format!("detach_at must be finite and >= 0, got {t}")));
            }
        }
        if let Some(t) = self.incoming_sessions.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(Error::usage(format!("incoming session time must be finite and >= 0, got {t}")));
        }
        Ok(())
    }
}

/// Executed events by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub ios: u64,
    pub ccrr: u64,
    pub csa: u64,
    pub device_timer_expiry: u64,
    pub registrar_timer_expiry: u64,
    pub publish_tick: u64,
    pub incoming_session: u64,
    pub detach: u64,
}

/// Device power by event class.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PowerTally {
    pub ios: f64,
    pub ccrr: f64,
    pub csa: f64,
    pub prr: f64,
    pub total: f64,
}

/// Outcome of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub policy: PolicyKind,
    pub seed: u64,
    pub horizon: f64,
    pub events: EventCounts,
    pub prr_count: u64,
    pub checkpoint_count: u64,
    /// PRRs that fell in checkpoint gaps closed before the horizon.
    pub completed_prr: u64,
    /// IOS, CCRR and CSA arrivals handled by the attached device.
    pub served_arrivals: u64,
    pub power: PowerTally,
    /// Device charge for one PRR.
    pub prr_cost: f64,
    pub detached_at: Option<f64>,
    /// Registrar detection of the device's departure.
    pub detach_detected_at: Option<f64>,
    /// Last refresh the registrar received before the device left.
    pub last_refresh_before_detach: Option<f64>,
    /// Registrar drops of a device that was still attached.
    pub spurious_detaches: u64,
    pub publishes: u64,
    pub ignored_publishes: u64,
    pub trace_digest: u64,
}

impl SimReport {
    /// Renewal-reward estimate of the mean PRR count per checkpoint gap.
    pub fn prr_per_checkpoint(&self) -> Option<f64> {
        (self.checkpoint_count > 0).then(|| self.completed_prr as f64 / self.checkpoint_count as f64)
    }

    /// Estimate of the analytic total power per update checkpoint.
    ///
    /// CCRR and IOS power is shared over all arrivals (the aggregate-rate
    /// normalization of the closed form); PRR power is counted per
    /// checkpoint gap of the policy. CSA local cost is excluded, as in the
    /// closed form.
    pub fn power_per_checkpoint(&self) -> Option<f64> {
        if self.served_arrivals == 0 {
            return None;
        }
        let prr_share = self.prr_per_checkpoint()? * self.prr_cost;
        Some((self.power.ccrr + self.power.ios) / self.served_arrivals as f64 + prr_share)
    }
}

/// Simulates `scenario` on `[0, horizon]`.
pub fn run(scenario: &Scenario, seed: u64, horizon: f64) -> Result<SimReport> {
    run_with_trace(scenario, seed, horizon, |_| Ok(()))
}

/// As [`run`], handing every executed event to `sink`.
pub fn run_with_trace<F>(scenario: &Scenario, seed: u64, horizon: f64, sink: F) -> Result<SimReport>
where
    F: FnMut(&TraceRecord) -> Result<()>,
{
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::usage(format!("horizon must be positive and finite, got {horizon}")));
    }
    scenario.validate()?;
    Engine::new(scenario, seed)?.run(horizon, sink)
}

struct Engine {
    queue: EventQueue,
    state: ProtocolState,
    rates: RateConfig,
    streams: [RngStream; 3],
    counts: EventCounts,
    digest: TraceDigest,
    seed: u64,
    last_refresh_before_detach: Option<f64>,
    detach_detected_at: Option<f64>,
}

fn arrival_event(kind: ArrivalKind) -> EventKind {
    match kind {
        ArrivalKind::Ios => EventKind::IosArrival,
        ArrivalKind::Ccrr => EventKind::CcrrArrival,
        ArrivalKind::Csa => EventKind::CsaArrival,
    }
}

impl Engine {
    fn new(scenario: &Scenario, seed: u64) -> Result<Self> {
        let state = ProtocolState::new(scenario.policy, scenario.costs.clone(), scenario.timer.t_p());
        let mut engine = Self {
            queue: EventQueue::new(),
            state,
            rates: scenario.rates,
            streams: ArrivalKind::ALL.map(|k| RngStream::for_arrivals(seed, k)),
            counts: EventCounts::default(),
            digest: TraceDigest::default(),
            seed,
            last_refresh_before_detach: None,
            detach_detected_at: None,
        };
        for kind in ArrivalKind::ALL {
            engine.schedule_arrival(kind)?;
        }
        engine.schedule_device_expiry()?;
        engine.schedule_registrar_expiry()?;
        if let Some(t) = scenario.detach_at {
            engine.queue.schedule(t, EventKind::Detach, Entity::Device, 0)?;
        }
        let mut incoming = scenario.incoming_sessions.clone();
        incoming.sort_by(f64::total_cmp);
        for t in incoming {
            engine.queue.schedule(t, EventKind::IncomingSession, Entity::Network, 0)?;
        }
        Ok(engine)
    }

    fn stream_index(kind: ArrivalKind) -> usize {
        match kind {
            ArrivalKind::Ios => 0,
            ArrivalKind::Ccrr => 1,
            ArrivalKind::Csa => 2,
        }
    }

    fn schedule_arrival(&mut self, kind: ArrivalKind) -> Result<()> {
        let rate = self.rates.rate_of(kind);
        if rate > 0.0 {
            let gap = self.streams[Self::stream_index(kind)].sample_exponential(rate)?;
            let at = self.queue.now() + gap;
            self.queue.schedule(at, arrival_event(kind), Entity::Device, 0)?;
        }
        Ok(())
    }

    fn schedule_device_expiry(&mut self) -> Result<()> {
        let timer = self.state.device.timer;
        self.queue
            .schedule(timer.expiry(), EventKind::TimerExpiry, Entity::Device, timer.epoch())?;
        Ok(())
    }

    fn schedule_registrar_expiry(&mut self) -> Result<()> {
        let timer = self.state.registrar.timer;
        self.queue
            .schedule(timer.expiry(), EventKind::TimerExpiry, Entity::Registrar, timer.epoch())?;
        Ok(())
    }

    fn apply(&mut self, fx: &Effects) -> Result<()> {
        if fx.device_refreshed {
            self.schedule_device_expiry()?;
        }
        if fx.registrar_refreshed {
            self.schedule_registrar_expiry()?;
        }
        if let Some(at) = fx.publish_at {
            self.queue.schedule(at, EventKind::PublishTick, Entity::Monitor, 0)?;
        }
        if let Some(det) = fx.detection {
            if det.genuine && self.detach_detected_at.is_none() {
                self.detach_detected_at = Some(det.at);
            }
        }
        Ok(())
    }

    /// Executes one event. `None` means the event was stale and had no effect.
    fn dispatch(&mut self, event: &SimEvent) -> Result<Option<Effects>> {
        let t = event.time;
        let fx = match event.kind {
            EventKind::IosArrival | EventKind::CcrrArrival | EventKind::CsaArrival => {
                let kind = match event.kind {
                    EventKind::IosArrival => ArrivalKind::Ios,
                    EventKind::CcrrArrival => ArrivalKind::Ccrr,
                    _ => ArrivalKind::Csa,
                };
                match kind {
                    ArrivalKind::Ios => self.counts.ios += 1,
                    ArrivalKind::Ccrr => self.counts.ccrr += 1,
                    ArrivalKind::Csa => self.counts.csa += 1,
                }
                let fx = self.state.on_arrival(kind, t);
                self.schedule_arrival(kind)?;
                Some(fx)
            }
            EventKind::TimerExpiry if event.entity == Entity::Device => {
                let fx = self.state.on_device_timer_expiry(t, event.token);
                if fx.is_some() {
                    self.counts.device_timer_expiry += 1;
                }
                fx
            }
            EventKind::TimerExpiry => {
                let fx = self.state.on_registrar_timer_expiry(t, event.token);
                if fx.is_some() {
                    self.counts.registrar_timer_expiry += 1;
                }
                fx
            }
            EventKind::PublishTick => {
                self.counts.publish_tick += 1;
                Some(self.state.monitor_publish(t))
            }
            EventKind::IncomingSession => {
                self.counts.incoming_session += 1;
                Some(self.state.on_incoming_session(t))
            }
            EventKind::Detach => {
                self.counts.detach += 1;
                if self.state.device.attached {
                    self.last_refresh_before_detach = Some(self.state.registrar.timer.last_refresh());
                }
                Some(self.state.detach(t))
            }
        };
        if let Some(fx) = &fx {
            self.apply(fx)?;
        }
        Ok(fx)
    }

    fn run<F>(mut self, horizon: f64, mut sink: F) -> Result<SimReport>
    where
        F: FnMut(&TraceRecord) -> Result<()>,
    {
        while self.queue.peek_time().is_some_and(|t| t <= horizon) {
            let event = self.queue.pop().expect("peeked");
            if let Some(fx) = self.dispatch(&event)? {
                self.digest.record(event.time, event.kind, event.entity);
                sink(&TraceRecord {
                    time: event.time,
                    kind: event.kind,
                    entity: event.entity,
                    device_expiry: self.state.device.timer.expiry(),
                    registrar_expiry: self.state.registrar.timer.expiry(),
                    power_charged: fx.power_charged,
                    registered: self.state.registrar.registration == Registration::Registered,
                    publish_pending: self.state.monitor.pending_access_count > 0,
                })?;
            }
        }
        Ok(self.report(horizon))
    }

    fn report(self, horizon: f64) -> SimReport {
        let tally = self.state.tally;
        SimReport {
            policy: self.state.policy().kind(),
            seed: self.seed,
            horizon,
            events: self.counts,
            prr_count: tally.prr_count,
            checkpoint_count: tally.checkpoint_count,
            completed_prr: tally.completed_prr,
            served_arrivals: tally.served_arrivals,
            power: PowerTally {
                ios: tally.power_ios,
                ccrr: tally.power_ccrr,
                csa: tally.power_csa,
                prr: tally.power_prr,
                total: self.state.device.cumulative_power,
            },
            prr_cost: self.state.costs().event_cost(CostedEvent::Prr),
            detached_at: self.state.detached_at(),
            detach_detected_at: self.detach_detected_at,
            last_refresh_before_detach: self.last_refresh_before_detach,
            spurious_detaches: tally.spurious_detaches,
            publishes: tally.publishes,
            ignored_publishes: tally.ignored_publishes,
            trace_digest: self.digest.value(),
        }
    }
}

/// Independent replications, one per seed, returned in seed order.
pub fn replicate(scenario: &Scenario, seeds: &[u64], horizon: f64) -> Result<Vec<SimReport>> {
    seeds.par_iter().map(|&seed| run(scenario, seed, horizon)).collect()
}

/// Seeds for `count` replications derived from a base seed.
pub fn replication_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(ios: f64, ccrr: f64, csa: f64, t_p: f64, policy: Policy) -> Scenario {
        Scenario::new(
            RateConfig::new(ios, ccrr, csa).unwrap(),
            TimerParams::new(t_p).unwrap(),
            policy,
            CostModel::default(),
        )
    }

    #[test]
    fn quiescent_device_re_registers_periodically() {
        for policy in [Policy::standard_ims(), Policy::cloud_aware(0.0).unwrap()] {
            let mut times = Vec::new();
            let report = run_with_trace(&scenario(0.0, 0.0, 0.0, 1.0, policy), 1, 10.5, |r| {
                times.push((r.time, r.kind, r.entity));
                Ok(())
            })
            .unwrap();
            assert_eq!(report.prr_count, 10);
            assert_eq!(report.power.total, 3250.0);
            assert_eq!(report.events.registrar_timer_expiry, 0);
            let expected: Vec<_> = (1..=10)
                .map(|k| (k as f64, EventKind::TimerExpiry, Entity::Device))
                .collect();
            assert_eq!(times, expected);
        }
    }

    #[test]
    fn ios_defers_first_prr() {
        let mut s = scenario(0.0, 0.0, 0.0, 1.0, Policy::cloud_aware(0.0).unwrap());
        s.incoming_sessions = vec![0.6];
        let mut prr_times = Vec::new();
        run_with_trace(&s, 0, 3.0, |r| {
            if r.kind == EventKind::TimerExpiry {
                prr_times.push(r.time);
            }
            Ok(())
        })
        .unwrap();
        assert_eq!(prr_times.len(), 2);
        assert!((prr_times[0] - 1.6).abs() < 1e-12 && (prr_times[1] - 2.6).abs() < 1e-12);
    }

    #[test]
    fn detach_without_traffic_detected_at_expiry() {
        let mut s = scenario(0.0, 0.0, 0.0, 1.5, Policy::standard_ims());
        s.detach_at = Some(2.0);
        let report = run(&s, 0, 10.0).unwrap();
        // PRR at 1.5 is the last refresh; expiry 3.0.
        assert_eq!(report.last_refresh_before_detach, Some(1.5));
        assert_eq!(report.detach_detected_at, Some(3.0));
        assert_eq!(report.prr_count, 1);
    }

    #[test]
    fn failed_incoming_session_detects_early() {
        let mut s = scenario(0.0, 0.0, 0.0, 1.5, Policy::cloud_aware(0.0).unwrap());
        s.detach_at = Some(2.0);
        s.incoming_sessions = vec![2.8];
        let report = run(&s, 0, 10.0).unwrap();
        assert_eq!(report.detach_detected_at, Some(2.8));
    }

    #[test]
    fn deterministic_for_equal_seed() {
        let s = scenario(0.4, 0.5, 0.7, 1.0, Policy::cloud_aware(0.25).unwrap());
        let a = run(&s, 99, 2_000.0).unwrap();
        let b = run(&s, 99, 2_000.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.trace_digest, run(&s, 100, 2_000.0).unwrap().trace_digest);
    }

    #[test]
    fn power_is_conserved() {
        let s = scenario(0.4, 0.5, 0.7, 1.0, Policy::cloud_aware(0.0).unwrap());
        let mut charged = 0.0;
        let report = run_with_trace(&s, 5, 5_000.0, |r| {
            charged += r.power_charged;
            Ok(())
        })
        .unwrap();
        let costs = CostModel::default();
        let by_count = report.events.ios as f64 * costs.event_cost(CostedEvent::Ios)
            + report.events.ccrr as f64 * costs.event_cost(CostedEvent::Ccrr)
            + report.events.csa as f64 * costs.event_cost(CostedEvent::Csa)
            + report.prr_count as f64 * costs.event_cost(CostedEvent::Prr);
        assert_eq!(report.power.total, charged);
        assert_eq!(report.power.total, by_count);
        assert_eq!(
            report.power.total,
            report.power.ios + report.power.ccrr + report.power.csa + report.power.prr
        );
    }

    #[test]
    fn clock_never_runs_backward() {
        let s = scenario(1.0, 0.3, 2.0, 0.7, Policy::cloud_aware(0.3).unwrap());
        let mut last = 0.0;
        run_with_trace(&s, 3, 1_000.0, |r| {
            assert!(r.time >= last);
            last = r.time;
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = scenario(0.0, 1.0, 0.0, 1.0, Policy::standard_ims());
        assert!(run(&s, 0, 0.0).is_err());
        assert!(run(&s, 0, f64::INFINITY).is_err());
        let mut bad = s.clone();
        bad.detach_at = Some(-1.0);
        assert!(run(&bad, 0, 1.0).is_err());
    }

    #[test]
    fn replications_follow_seed_order() {
        let s = scenario(0.5, 0.5, 0.5, 1.0, Policy::standard_ims());
        let seeds = replication_seeds(10, 4);
        let reports = replicate(&s, &seeds, 500.0).unwrap();
        let got: Vec<_> = reports.iter().map(|r| r.seed).collect();
        assert_eq!(got, seeds);
    }
}
