//! Location-update energy model for IMS devices.
//!
//! Compares the standard IMS scheme, where the registration timer is kept
//! alive by capability-change re-registrations and periodic re-registrations
//! (PRR), with a cloud-service-aware scheme in which session setups and cloud
//! service accesses also refresh the timer. Both a closed-form model
//! ([`analytic`]) and a seeded discrete-event simulator ([`sim`] driving
//! [`protocol`]) are provided, plus a sweep/validation harness
//! ([`experiment`]).

pub mod analytic;
pub mod config;
pub mod error;
pub mod experiment;
pub mod model;
pub mod protocol;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    event_cost, total_event_rate, ArrivalKind, CostModel, CostedEvent, MessageCatalog, Policy,
    PolicyKind, Procedure, RateConfig, TimerParams,
};
pub use sim::{run, Scenario, SimReport};
