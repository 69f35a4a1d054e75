//! Entity state machines for the location-update protocol.
//!
//! The device and the registrar each hold a registration timer of length
//! `t_p`. Any refreshing event pushes the expiry to `now + t_p`; when the
//! device timer reaches zero the device re-registers (PRR); when the
//! registrar timer reaches zero without a refresh the registrar concludes the
//! device has detached. Under the cloud-aware policy the Cloud Service
//! Monitor relays cloud-service accesses to the registrar, optionally
//! batching them on fixed publish boundaries.
//!
//! Transitions return an [`Effects`] value; the simulation engine turns the
//! refreshed timers and pending publishes into scheduled events.

use crate::model::{ArrivalKind, CostModel, CostedEvent, Policy, PolicyKind};

/// A registration timer. `epoch` increases on every refresh so expiry events
/// scheduled for an older epoch can be discarded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimerState {
    t_p: f64,
    last_refresh: f64,
    expiry: f64,
    epoch: u64,
}

impl TimerState {
    pub fn start(t_p: f64, at: f64) -> Self {
        Self {
            t_p,
            last_refresh: at,
            expiry: at + t_p,
            epoch: 0,
        }
    }

    pub fn t_p(&self) -> f64 {
        self.t_p
    }

    pub fn last_refresh(&self) -> f64 {
        self.last_refresh
    }

    pub fn expiry(&self) -> f64 {
        self.expiry
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn refresh(&mut self, at: f64) {
        debug_assert!(at >= self.last_refresh, "refresh at {at} before {}", self.last_refresh);
        self.last_refresh = self.last_refresh.max(at);
        self.expiry = self.expiry.max(at + self.t_p);
        self.epoch += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub timer: TimerState,
    pub attached: bool,
    pub cumulative_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Registration {
    Registered,
    Detached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrarState {
    pub timer: TimerState,
    pub registration: Registration,
    pub detach_detected_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorState {
    pub publish_interval: f64,
    pub pending_access_count: u64,
    /// Boundary at which the pending batch will be published, if any.
    pub next_publish: Option<f64>,
}

impl MonitorState {
    /// First fixed-phase boundary (a multiple of the interval) at or after `t`.
    pub fn boundary_at_or_after(&self, t: f64) -> f64 {
        let k = (t / self.publish_interval).ceil();
        let boundary = k * self.publish_interval;
        if boundary < t {
            (k + 1.0) * self.publish_interval
        } else {
            boundary
        }
    }
}

/// How the registrar concluded a device was gone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionCause {
    TimerExpiry,
    FailedSession,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub at: f64,
    pub cause: DetectionCause,
    /// False when the device was still attached (a batched publish arrived
    /// after the registrar timer ran out).
    pub genuine: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionOutcome {
    /// The device answered; handled as an IOS event.
    Delivered,
    /// The device is gone; the registrar has now marked it detached.
    Failed,
    /// The registration was already gone.
    Rejected,
}

/// Side effects of one transition.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Effects {
    pub power_charged: f64,
    pub device_refreshed: bool,
    pub registrar_refreshed: bool,
    /// Monitor needs a publish tick at this instant.
    pub publish_at: Option<f64>,
    pub detection: Option<Detection>,
    /// The event was an update checkpoint: a non-PRR refresh of the device timer.
    pub checkpoint: bool,
    pub prr: bool,
    pub session: Option<SessionOutcome>,
}

/// Running tallies kept alongside the entity states.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tally {
    pub prr_count: u64,
    pub checkpoint_count: u64,
    /// PRRs in checkpoint gaps that have closed.
    pub completed_prr: u64,
    prr_in_open_gap: u64,
    /// IOS, CCRR and CSA arrivals handled by an attached device.
    pub served_arrivals: u64,
    pub power_ios: f64,
    pub power_ccrr: f64,
    pub power_csa: f64,
    pub power_prr: f64,
    pub publishes: u64,
    pub ignored_publishes: u64,
    pub rejected_sessions: u64,
    pub spurious_detaches: u64,
}

/// Device, registrar and monitor for one device under one policy.
#[derive(Debug, Clone)]
pub struct ProtocolState {
    pub device: DeviceState,
    pub registrar: RegistrarState,
    pub monitor: MonitorState,
    pub tally: Tally,
    policy: Policy,
    costs: CostModel,
    detached_at: Option<f64>,
}

impl ProtocolState {
    /// Initial registration at `t = 0`.
    pub fn new(policy: Policy, costs: CostModel, t_p: f64) -> Self {
        Self {
            device: DeviceState {
                timer: TimerState::start(t_p, 0.0),
                attached: true,
                cumulative_power: 0.0,
            },
            registrar: RegistrarState {
                timer: TimerState::start(t_p, 0.0),
                registration: Registration::Registered,
                detach_detected_at: None,
            },
            monitor: MonitorState {
                publish_interval: policy.publish_interval(),
                pending_access_count: 0,
                next_publish: None,
            },
            tally: Tally::default(),
            policy,
            costs,
            detached_at: None,
        }
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn costs(&self) -> &CostModel {
        &self.costs
    }

    /// When the device went silent, if it has.
    pub fn detached_at(&self) -> Option<f64> {
        self.detached_at
    }

    fn charge(&mut self, kind: CostedEvent, amount: f64) -> f64 {
        self.device.cumulative_power += amount;
        match kind {
            CostedEvent::Ios => self.tally.power_ios += amount,
            CostedEvent::Ccrr => self.tally.power_ccrr += amount,
            CostedEvent::Csa => self.tally.power_csa += amount,
            CostedEvent::Prr => self.tally.power_prr += amount,
        }
        amount
    }

    fn close_gap(&mut self) {
        self.tally.checkpoint_count += 1;
        self.tally.completed_prr += self.tally.prr_in_open_gap;
        self.tally.prr_in_open_gap = 0;
    }

    fn refresh_device(&mut self, t: f64, fx: &mut Effects) {
        self.device.timer.refresh(t);
        fx.device_refreshed = true;
    }

    fn refresh_registrar(&mut self, t: f64, fx: &mut Effects) {
        if self.registrar.registration == Registration::Registered {
            self.registrar.timer.refresh(t);
            fx.registrar_refreshed = true;
        }
    }

    /// A REGISTER exchange: refreshes both timers, and re-establishes the
    /// binding if the registrar had (wrongly) dropped it.
    fn register(&mut self, t: f64, fx: &mut Effects) {
        self.refresh_device(t, fx);
        if self.registrar.registration == Registration::Detached {
            self.registrar.registration = Registration::Registered;
            self.registrar.detach_detected_at = None;
        }
        self.refresh_registrar(t, fx);
    }

    /// Dispatches a Poisson arrival of `kind` at `t`.
    pub fn on_arrival(&mut self, kind: ArrivalKind, t: f64) -> Effects {
        match kind {
            ArrivalKind::Ios => self.on_ios(t),
            ArrivalKind::Ccrr => self.on_ccrr(t),
            ArrivalKind::Csa => self.on_csa(t),
        }
    }

    /// Session setup. A detached device cannot originate sessions, so the
    /// arrival becomes a network-originated attempt toward the registrar.
    pub fn on_ios(&mut self, t: f64) -> Effects {
        if !self.device.attached {
            return self.on_incoming_session(t);
        }
        let mut fx = Effects::default();
        self.tally.served_arrivals += 1;
        let cost = self.policy.arrival_charge(&self.costs, ArrivalKind::Ios);
        fx.power_charged = self.charge(CostedEvent::Ios, cost);
        if self.policy.ios_refreshes() {
            self.refresh_device(t, &mut fx);
            self.refresh_registrar(t, &mut fx);
            self.close_gap();
            fx.checkpoint = true;
        }
        fx.session = Some(SessionOutcome::Delivered);
        fx
    }

    /// Cloud service access.
    pub fn on_csa(&mut self, t: f64) -> Effects {
        let mut fx = Effects::default();
        if !self.device.attached {
            return fx;
        }
        self.tally.served_arrivals += 1;
        if self.policy.kind() == PolicyKind::StandardIms {
            return fx;
        }
        let cost = self.policy.arrival_charge(&self.costs, ArrivalKind::Csa);
        fx.power_charged = self.charge(CostedEvent::Csa, cost);
        self.refresh_device(t, &mut fx);
        self.close_gap();
        fx.checkpoint = true;
        self.monitor.pending_access_count += 1;
        if self.monitor.publish_interval == 0.0 {
            let publish = self.monitor_publish(t);
            fx.registrar_refreshed = publish.registrar_refreshed;
        } else if self.monitor.next_publish.is_none() {
            let at = self.monitor.boundary_at_or_after(t);
            self.monitor.next_publish = Some(at);
            fx.publish_at = Some(at);
        }
        fx
    }

    /// Re-registration for changed capabilities.
    pub fn on_ccrr(&mut self, t: f64) -> Effects {
        let mut fx = Effects::default();
        if !self.device.attached {
            return fx;
        }
        self.tally.served_arrivals += 1;
        let cost = self.policy.arrival_charge(&self.costs, ArrivalKind::Ccrr);
        fx.power_charged = self.charge(CostedEvent::Ccrr, cost);
        self.register(t, &mut fx);
        self.close_gap();
        fx.checkpoint = true;
        fx
    }

    /// Device timer reached zero: periodic re-registration. Returns `None`
    /// when `epoch` is stale or the device is gone.
    pub fn on_device_timer_expiry(&mut self, t: f64, epoch: u64) -> Option<Effects> {
        if !self.device.attached || epoch != self.device.timer.epoch() {
            return None;
        }
        let mut fx = Effects::default();
        let cost = self.costs.event_cost(CostedEvent::Prr);
        fx.power_charged = self.charge(CostedEvent::Prr, cost);
        self.register(t, &mut fx);
        self.tally.prr_count += 1;
        self.tally.prr_in_open_gap += 1;
        fx.prr = true;
        Some(fx)
    }

    /// Registrar timer ran out with no refresh. Returns `None` for stale
    /// epochs or an already-dropped registration.
    pub fn on_registrar_timer_expiry(&mut self, t: f64, epoch: u64) -> Option<Effects> {
        if self.registrar.registration != Registration::Registered
            || epoch != self.registrar.timer.epoch()
        {
            return None;
        }
        Some(Effects {
            detection: Some(self.mark_detached(t, DetectionCause::TimerExpiry)),
            ..Effects::default()
        })
    }

    /// The network tries to reach the device.
    pub fn on_incoming_session(&mut self, t: f64) -> Effects {
        if self.registrar.registration == Registration::Detached {
            self.tally.rejected_sessions += 1;
            return Effects {
                session: Some(SessionOutcome::Rejected),
                ..Effects::default()
            };
        }
        if self.device.attached {
            return self.on_ios(t);
        }
        Effects {
            detection: Some(self.mark_detached(t, DetectionCause::FailedSession)),
            session: Some(SessionOutcome::Failed),
            ..Effects::default()
        }
    }

    /// Publish the pending batch to the registrar.
    pub fn monitor_publish(&mut self, t: f64) -> Effects {
        let mut fx = Effects::default();
        self.monitor.next_publish = None;
        if self.monitor.pending_access_count == 0 {
            return fx;
        }
        self.monitor.pending_access_count = 0;
        self.tally.publishes += 1;
        if self.registrar.registration == Registration::Registered {
            self.refresh_registrar(t, &mut fx);
        } else {
            self.tally.ignored_publishes += 1;
        }
        fx
    }

    /// The device silently leaves the network.
    pub fn detach(&mut self, t: f64) -> Effects {
        if self.device.attached {
            self.device.attached = false;
            self.detached_at = Some(t);
        }
        Effects::default()
    }

    fn mark_detached(&mut self, t: f64, cause: DetectionCause) -> Detection {
        self.registrar.registration = Registration::Detached;
        self.registrar.detach_detected_at = Some(t);
        let genuine = !self.device.attached;
        if !genuine {
            self.tally.spurious_detaches += 1;
        }
        Detection { at: t, cause, genuine }
    }
}
