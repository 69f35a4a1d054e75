//! Domain types shared by the analytic model, the simulator and the CLI:
//! event rates, the registration timer length, the message-size cost model
//! and the location-update policy.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Poisson arrival rates of the three timer-refreshing event classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    lambda_ios: f64,
    lambda_ccrr: f64,
    lambda_csa: f64,
}

impl RateConfig {
    pub fn new(lambda_ios: f64, lambda_ccrr: f64, lambda_csa: f64) -> Result<Self> {
        for (name, value) in [
            ("lambda_ios", lambda_ios),
            ("lambda_ccrr", lambda_ccrr),
            ("lambda_csa", lambda_csa),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::usage(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        Ok(Self {
            lambda_ios,
            lambda_ccrr,
            lambda_csa,
        })
    }

    pub fn lambda_ios(&self) -> f64 {
        self.lambda_ios
    }

    pub fn lambda_ccrr(&self) -> f64 {
        self.lambda_ccrr
    }

    pub fn lambda_csa(&self) -> f64 {
        self.lambda_csa
    }

    /// Rate of the given arrival class.
    pub fn rate_of(&self, kind: ArrivalKind) -> f64 {
        match kind {
            ArrivalKind::Ios => self.lambda_ios,
            ArrivalKind::Ccrr => self.lambda_ccrr,
            ArrivalKind::Csa => self.lambda_csa,
        }
    }

    /// Aggregate update-checkpoint rate: the superposition of the three
    /// independent Poisson streams.
    pub fn total(&self) -> f64 {
        self.lambda_ios + self.lambda_ccrr + self.lambda_csa
    }

    /// Returns a copy with one rate replaced, revalidated.
    pub fn with(&self, kind: ArrivalKind, value: f64) -> Result<Self> {
        let mut next = *self;
        match kind {
            ArrivalKind::Ios => next.lambda_ios = value,
            ArrivalKind::Ccrr => next.lambda_ccrr = value,
            ArrivalKind::Csa => next.lambda_csa = value,
        }
        Self::new(next.lambda_ios, next.lambda_ccrr, next.lambda_csa)
    }
}

impl Add for RateConfig {
    type Output = RateConfig;

    fn add(self, rhs: Self) -> Self::Output {
        RateConfig {
            lambda_ios: self.lambda_ios + rhs.lambda_ios,
            lambda_ccrr: self.lambda_ccrr + rhs.lambda_ccrr,
            lambda_csa: self.lambda_csa + rhs.lambda_csa,
        }
    }
}

/// Total update-checkpoint rate of a rate configuration.
pub fn total_event_rate(rates: &RateConfig) -> f64 {
    rates.total()
}

/// Registration timer length. Every periodic interval has the same length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimerParams {
    t_p: f64,
}

impl TimerParams {
    pub fn new(t_p: f64) -> Result<Self> {
        if !t_p.is_finite() || t_p <= 0.0 {
            return Err(Error::usage(format!(
                "timer length t_p must be finite and positive, got {t_p}"
            )));
        }
        Ok(Self { t_p })
    }

    pub fn t_p(&self) -> f64 {
        self.t_p
    }
}

/// The Poisson-driven event classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArrivalKind {
    Ios,
    Ccrr,
    Csa,
}

impl ArrivalKind {
    pub const ALL: [ArrivalKind; 3] = [ArrivalKind::Ios, ArrivalKind::Ccrr, ArrivalKind::Csa];
}

/// Events the device pays for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CostedEvent {
    Prr,
    Ccrr,
    Ios,
    Csa,
}

impl FromStr for CostedEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prr" => Ok(CostedEvent::Prr),
            "ccrr" => Ok(CostedEvent::Ccrr),
            "ios" => Ok(CostedEvent::Ios),
            "csa" => Ok(CostedEvent::Csa),
            other => Err(Error::usage(format!("unknown event kind `{other}`"))),
        }
    }
}

impl From<ArrivalKind> for CostedEvent {
    fn from(kind: ArrivalKind) -> Self {
        match kind {
            ArrivalKind::Ios => CostedEvent::Ios,
            ArrivalKind::Ccrr => CostedEvent::Ccrr,
            ArrivalKind::Csa => CostedEvent::Csa,
        }
    }
}

/// Signalling procedures priced by their message exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Procedure {
    Prr,
    Ccrr,
    Ios,
}

impl Procedure {
    pub const ALL: [Procedure; 3] = [Procedure::Prr, Procedure::Ccrr, Procedure::Ios];
}

/// SIP message sizes in bytes, keyed by message name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageCatalog {
    entries: BTreeMap<String, u64>,
}

impl MessageCatalog {
    pub fn new(entries: BTreeMap<String, u64>) -> Result<Self> {
        if let Some((name, _)) = entries.iter().find(|(_, &size)| size == 0) {
            return Err(Error::usage(format!("message `{name}` must have a positive size")));
        }
        Ok(Self { entries })
    }

    pub fn size_of(&self, name: &str) -> Option<u64> {
        self.entries.get(name).copied()
    }

    pub fn entries(&self) -> &BTreeMap<String, u64> {
        &self.entries
    }
}

impl Default for MessageCatalog {
    fn default() -> Self {
        let entries = [("REGISTER", 225), ("INVITE", 810), ("200OK", 100), ("ACK", 60)]
            .into_iter()
            .map(|(name, size)| (name.to_string(), size))
            .collect();
        Self { entries }
    }
}

/// Device energy model: one power unit per byte exchanged, plus a flat cost
/// for the local timer update that accompanies a cloud service access.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    catalog: MessageCatalog,
    procedures: BTreeMap<Procedure, Vec<String>>,
    csa_local_cost: f64,
}

pub const DEFAULT_CSA_LOCAL_COST: f64 = 10.0;

impl CostModel {
    pub fn new(
        catalog: MessageCatalog,
        procedures: BTreeMap<Procedure, Vec<String>>,
        csa_local_cost: f64,
    ) -> Result<Self> {
        if !csa_local_cost.is_finite() || csa_local_cost < 0.0 {
            return Err(Error::usage(format!(
                "csa_local cost must be finite and non-negative, got {csa_local_cost}"
            )));
        }
        for procedure in Procedure::ALL {
            let messages = procedures.get(&procedure).ok_or_else(|| {
                Error::usage(format!("missing message list for procedure {procedure:?}"))
            })?;
            if messages.is_empty() {
                return Err(Error::usage(format!(
                    "procedure {procedure:?} must exchange at least one message"
                )));
            }
            if let Some(unknown) = messages.iter().find(|m| catalog.size_of(m).is_none()) {
                return Err(Error::usage(format!(
                    "procedure {procedure:?} references unknown message `{unknown}`"
                )));
            }
        }
        Ok(Self {
            catalog,
            procedures,
            csa_local_cost,
        })
    }

    pub fn catalog(&self) -> &MessageCatalog {
        &self.catalog
    }

    pub fn messages(&self, procedure: Procedure) -> &[String] {
        &self.procedures[&procedure]
    }

    pub fn csa_local_cost(&self) -> f64 {
        self.csa_local_cost
    }

    fn procedure_cost(&self, procedure: Procedure) -> f64 {
        self.messages(procedure)
            .iter()
            .map(|m| self.catalog.size_of(m).expect("validated at construction"))
            .sum::<u64>() as f64
    }

    /// Device power charged for one occurrence of `event`.
    pub fn event_cost(&self, event: CostedEvent) -> f64 {
        match event {
            CostedEvent::Prr => self.procedure_cost(Procedure::Prr),
            CostedEvent::Ccrr => self.procedure_cost(Procedure::Ccrr),
            CostedEvent::Ios => self.procedure_cost(Procedure::Ios),
            CostedEvent::Csa => self.csa_local_cost,
        }
    }
}

impl Default for CostModel {
    fn default() -> Self {
        let register = vec!["REGISTER".to_string(), "200OK".to_string()];
        let procedures = BTreeMap::from([
            (Procedure::Prr, register.clone()),
            (Procedure::Ccrr, register),
            (
                Procedure::Ios,
                vec!["INVITE".to_string(), "200OK".to_string(), "ACK".to_string()],
            ),
        ]);
        Self::new(MessageCatalog::default(), procedures, DEFAULT_CSA_LOCAL_COST)
            .expect("default cost model is valid")
    }
}

/// Free-function form of [`CostModel::event_cost`].
pub fn event_cost(model: &CostModel, event: CostedEvent) -> f64 {
    model.event_cost(event)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    StandardIms,
    CloudAware,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 2] = [PolicyKind::StandardIms, PolicyKind::CloudAware];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::StandardIms => "standard_ims",
            PolicyKind::CloudAware => "cloud_aware",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "standard_ims" | "standardims" | "ims" => Ok(PolicyKind::StandardIms),
            "cloud_aware" | "cloudaware" | "cloud" => Ok(PolicyKind::CloudAware),
            other => Err(Error::usage(format!("unknown policy `{other}`"))),
        }
    }
}

/// Location-update policy.
///
/// `ios_refreshes` selects whether session setups refresh the registration
/// timers. It defaults to `false` for the standard IMS baseline, whose
/// checkpoints are then CCRR events only, and to `true` for the cloud-aware
/// scheme, whose checkpoints are every IOS, CCRR and CSA event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    kind: PolicyKind,
    publish_interval: f64,
    ios_refreshes: bool,
}

impl Policy {
    pub fn new(kind: PolicyKind, publish_interval: f64, ios_refreshes: Option<bool>) -> Result<Self> {
        if !publish_interval.is_finite() || publish_interval < 0.0 {
            return Err(Error::usage(format!(
                "publish_interval must be finite and non-negative, got {publish_interval}"
            )));
        }
        let ios_refreshes = ios_refreshes.unwrap_or(kind == PolicyKind::CloudAware);
        Ok(Self {
            kind,
            publish_interval,
            ios_refreshes,
        })
    }

    pub fn standard_ims() -> Self {
        Self::new(PolicyKind::StandardIms, 0.0, None).expect("valid")
    }

    pub fn cloud_aware(publish_interval: f64) -> Result<Self> {
        Self::new(PolicyKind::CloudAware, publish_interval, None)
    }

    /// Same settings under a different policy kind, with the kind's default
    /// IOS refresh behaviour.
    pub fn with_kind(&self, kind: PolicyKind) -> Self {
        Self {
            kind,
            publish_interval: self.publish_interval,
            ios_refreshes: kind == PolicyKind::CloudAware,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    /// Monitor batching interval; zero publishes on every access.
    pub fn publish_interval(&self) -> f64 {
        self.publish_interval
    }

    pub fn ios_refreshes(&self) -> bool {
        self.ios_refreshes
    }

    /// Whether an arrival of `kind` refreshes the registration timers.
    pub fn refreshes_on(&self, kind: ArrivalKind) -> bool {
        match kind {
            ArrivalKind::Ccrr => true,
            ArrivalKind::Ios => self.ios_refreshes,
            ArrivalKind::Csa => self.kind == PolicyKind::CloudAware,
        }
    }

    /// Rate of timer-refreshing checkpoints under this policy.
    pub fn checkpoint_rate(&self, rates: &RateConfig) -> f64 {
        ArrivalKind::ALL
            .into_iter()
            .filter(|&k| self.refreshes_on(k))
            .map(|k| rates.rate_of(k))
            .sum()
    }

    /// Device charge for an arrival of `kind`. CSA costs the device nothing
    /// when the network ignores cloud accesses.
    pub fn arrival_charge(&self, costs: &CostModel, kind: ArrivalKind) -> f64 {
        match kind {
            ArrivalKind::Csa if self.kind == PolicyKind::StandardIms => 0.0,
            other => costs.event_cost(other.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_rate_examples() {
        assert_eq!(total_event_rate(&RateConfig::new(0.5, 0.5, 0.5).unwrap()), 1.5);
        assert_eq!(total_event_rate(&RateConfig::new(0.0, 0.0, 0.0).unwrap()), 0.0);
        let caption = RateConfig::new(0.3, 0.3, 0.3).unwrap();
        assert!((total_event_rate(&caption) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(RateConfig::new(-0.1, 0.0, 0.0).is_err());
        assert!(RateConfig::new(0.0, f64::NAN, 0.0).is_err());
        assert!(RateConfig::new(0.0, 0.0, f64::INFINITY).is_err());
        assert!(TimerParams::new(0.0).is_err());
        assert!(TimerParams::new(-1.0).is_err());
        assert!(TimerParams::new(f64::INFINITY).is_err());
    }

    #[test]
    fn default_costs() {
        let costs = CostModel::default();
        assert_eq!(costs.event_cost(CostedEvent::Csa), 10.0);
        assert_eq!(costs.event_cost(CostedEvent::Prr), 325.0);
        assert_eq!(costs.event_cost(CostedEvent::Ccrr), 325.0);
        assert_eq!(costs.event_cost(CostedEvent::Ios), 970.0);
        assert_eq!(costs.catalog().size_of("REGISTER"), Some(225));
    }

    #[test]
    fn strict_register_only_mode() {
        let mut procedures = BTreeMap::new();
        procedures.insert(Procedure::Prr, vec!["REGISTER".into()]);
        procedures.insert(Procedure::Ccrr, vec!["REGISTER".into()]);
        procedures.insert(Procedure::Ios, vec!["INVITE".into()]);
        let costs = CostModel::new(MessageCatalog::default(), procedures, 10.0).unwrap();
        assert_eq!(costs.event_cost(CostedEvent::Prr), 225.0);
        assert_eq!(costs.event_cost(CostedEvent::Ios), 810.0);
    }

    #[test]
    fn cost_model_validation() {
        let mut procedures = BTreeMap::new();
        procedures.insert(Procedure::Prr, vec!["REGISTER".into()]);
        procedures.insert(Procedure::Ccrr, vec!["BYE".into()]);
        procedures.insert(Procedure::Ios, vec!["INVITE".into()]);
        assert!(CostModel::new(MessageCatalog::default(), procedures.clone(), 10.0).is_err());
        procedures.remove(&Procedure::Ccrr);
        assert!(CostModel::new(MessageCatalog::default(), procedures, 10.0).is_err());
        assert!(MessageCatalog::new(BTreeMap::from([("X".to_string(), 0)])).is_err());
        let err = CostModel::new(
            MessageCatalog::default(),
            CostModel::default().procedures.clone(),
            -1.0,
        );
        assert!(err.is_err());
    }

    #[test]
    fn unknown_event_kind_is_usage_error() {
        assert!(matches!("BYE".parse::<CostedEvent>(), Err(Error::Usage(_))));
        assert_eq!("prr".parse::<CostedEvent>().unwrap(), CostedEvent::Prr);
    }

    #[test]
    fn policy_defaults() {
        let ims = Policy::standard_ims();
        assert!(!ims.ios_refreshes());
        assert!(!ims.refreshes_on(ArrivalKind::Csa));
        let cloud = Policy::cloud_aware(0.0).unwrap();
        assert!(cloud.ios_refreshes());
        let rates = RateConfig::new(0.5, 1.0, 0.25).unwrap();
        assert_eq!(ims.checkpoint_rate(&rates), 1.0);
        assert_eq!(cloud.checkpoint_rate(&rates), 1.75);
        assert_eq!(ims.arrival_charge(&CostModel::default(), ArrivalKind::Csa), 0.0);
        assert_eq!(cloud.arrival_charge(&CostModel::default(), ArrivalKind::Csa), 10.0);
        assert!(Policy::cloud_aware(-1.0).is_err());
    }

    #[test]
    fn policy_kind_parsing() {
        assert_eq!("cloud-aware".parse::<PolicyKind>().unwrap(), PolicyKind::CloudAware);
        assert_eq!("StandardIMS".parse::<PolicyKind>().unwrap(), PolicyKind::StandardIms);
        assert!("gsm".parse::<PolicyKind>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn rate() -> impl Strategy<Value = f64> {
            0.0..100.0f64
        }

        proptest! {
            #[test]
            fn total_is_additive(a in (rate(), rate(), rate()), b in (rate(), rate(), rate())) {
                let ra = RateConfig::new(a.0, a.1, a.2).unwrap();
                let rb = RateConfig::new(b.0, b.1, b.2).unwrap();
                let sum = total_event_rate(&(ra + rb));
                let parts = total_event_rate(&ra) + total_event_rate(&rb);
                prop_assert!((sum - parts).abs() <= 1e-12 * parts.max(1.0));
            }

            #[test]
            fn cost_monotone_in_message_size(bump in 1u64..10_000) {
                let base = CostModel::default();
                for name in ["REGISTER", "200OK", "INVITE", "ACK"] {
                    let mut entries = base.catalog().entries().clone();
                    *entries.get_mut(name).unwrap() += bump;
                    let bigger = CostModel::new(
                        MessageCatalog::new(entries).unwrap(),
                        base.procedures.clone(),
                        base.csa_local_cost(),
                    ).unwrap();
                    for (proc_, event) in [
                        (Procedure::Prr, CostedEvent::Prr),
                        (Procedure::Ccrr, CostedEvent::Ccrr),
                        (Procedure::Ios, CostedEvent::Ios),
                    ] {
                        if base.messages(proc_).iter().any(|m| m == name) {
                            prop_assert!(bigger.event_cost(event) > base.event_cost(event));
                        }
                    }
                }
            }
        }
    }
}
