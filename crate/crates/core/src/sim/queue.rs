use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    IosArrival,
    CcrrArrival,
    CsaArrival,
    TimerExpiry,
    PublishTick,
    IncomingSession,
    Detach,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::IosArrival => "IOS_ARRIVAL",
            EventKind::CcrrArrival => "CCRR_ARRIVAL",
            EventKind::CsaArrival => "CSA_ARRIVAL",
            EventKind::TimerExpiry => "TIMER_EXPIRY",
            EventKind::PublishTick => "PUBLISH_TICK",
            EventKind::IncomingSession => "INCOMING_SESSION",
            EventKind::Detach => "DETACH",
        }
    }

    /// Stable numeric code used by the trace digest.
    pub fn code(&self) -> u8 {
        match self {
            EventKind::IosArrival => 1,
            EventKind::CcrrArrival => 2,
            EventKind::CsaArrival => 3,
            EventKind::TimerExpiry => 4,
            EventKind::PublishTick => 5,
            EventKind::IncomingSession => 6,
            EventKind::Detach => 7,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entity {
    Device,
    Registrar,
    Monitor,
    /// The remote party originating incoming sessions.
    Network,
}

impl Entity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Entity::Device => "device",
            Entity::Registrar => "registrar",
            Entity::Monitor => "monitor",
            Entity::Network => "network",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            Entity::Device => 1,
            Entity::Registrar => 2,
            Entity::Monitor => 3,
            Entity::Network => 4,
        }
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A scheduled occurrence. `token` carries the timer epoch for expiry events
/// so that expiries superseded by a later refresh can be recognised as stale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub entity: Entity,
    pub sequence: u64,
    pub token: u64,
}

#[derive(Debug)]
struct Queued(SimEvent);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // Reversed so the max-heap yields the earliest (time, sequence) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .time
            .total_cmp(&self.0.time)
            .then_with(|| other.0.sequence.cmp(&self.0.sequence))
    }
}

/// Future event list with a virtual clock. Events at equal times pop in
/// insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Queued>,
    next_sequence: u64,
    now: f64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind, entity: Entity, token: u64) -> Result<u64> {
        if !time.is_finite() || time < self.now {
            return Err(Error::usage(format!(
                "cannot schedule {kind} at {time}: clock is at {}",
                self.now
            )));
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Queued(SimEvent {
            time,
            kind,
            entity,
            sequence,
            token,
        }));
        Ok(sequence)
    }

    /// Removes the earliest event and advances the clock to it.
    pub fn pop(&mut self) -> Option<SimEvent> {
        let Queued(event) = self.heap.pop()?;
        self.now = event.time;
        Some(event)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|q| q.0.time)
    }
}
