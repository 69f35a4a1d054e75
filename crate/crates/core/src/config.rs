//! TOML scenario configuration.
//!
//! ```toml
//! [rates]
//! ios = 0.5
//! ccrr = 0.5
//! csa = 0.5
//!
//! [timer]
//! t_p = 1.0
//!
//! [policy]
//! kind = "cloud_aware"        # or "standard_ims"
//! publish_interval = 0.0
//! # ios_refreshes = true      # defaults by policy kind
//!
//! [costs]
//! csa_local = 10.0
//! [costs.catalog]
//! REGISTER = 225
//! [costs.procedures]
//! prr = ["REGISTER", "200OK"]
//!
//! [scenario]
//! detach_at = 40.0
//! incoming_sessions = [41.5]
//! ```
//!
//! Every section is optional. Catalog entries and procedure lists are merged
//! over the built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::Result;
use crate::model::{CostModel, MessageCatalog, Policy, PolicyKind, Procedure, RateConfig, TimerParams};
use crate::sim::Scenario;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub timer: TimerSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub costs: CostsSection,
    #[serde(default)]
    pub scenario: EventsSection,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    #[serde(default = "half")]
    pub ios: f64,
    #[serde(default = "half")]
    pub ccrr: f64,
    #[serde(default = "half")]
    pub csa: f64,
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

impl Default for RatesSection {
    fn default() -> Self {
        Self {
            ios: half(),
            ccrr: half(),
            csa: half(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimerSection {
    #[serde(default = "one")]
    pub t_p: f64,
}

impl Default for TimerSection {
    fn default() -> Self {
        Self { t_p: one() }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default)]
    pub publish_interval: f64,
    #[serde(default)]
    pub ios_refreshes: Option<bool>,
}

fn default_kind() -> String {
    PolicyKind::CloudAware.as_str().to_string()
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            publish_interval: 0.0,
            ios_refreshes: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CostsSection {
    #[serde(default)]
    pub catalog: BTreeMap<String, u64>,
    #[serde(default)]
    pub procedures: BTreeMap<Procedure, Vec<String>>,
    #[serde(default)]
    pub csa_local: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EventsSection {
    #[serde(default)]
    pub detach_at: Option<f64>,
    #[serde(default)]
    pub incoming_sessions: Vec<f64>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn rates(&self) -> Result<RateConfig> {
        RateConfig::new(self.rates.ios, self.rates.ccrr, self.rates.csa)
    }

    pub fn timer(&self) -> Result<TimerParams> {
        TimerParams::new(self.timer.t_p)
    }

    pub fn policy(&self) -> Result<Policy> {
        Policy::new(
            self.policy.kind.parse()?,
            self.policy.publish_interval,
            self.policy.ios_refreshes,
        )
    }

    pub fn costs(&self) -> Result<CostModel> {
        let defaults = CostModel::default();
        let mut catalog = defaults.catalog().entries().clone();
        catalog.extend(self.costs.catalog.clone());
        let mut procedures: BTreeMap<_, _> = Procedure::ALL
            .into_iter()
            .map(|p| (p, defaults.messages(p).to_vec()))
            .collect();
        procedures.extend(self.costs.procedures.clone());
        CostModel::new(
            MessageCatalog::new(catalog)?,
            procedures,
            self.costs.csa_local.unwrap_or(defaults.csa_local_cost()),
        )
    }

    /// Validated scenario.
    pub fn scenario(&self) -> Result<Scenario> {
        let scenario = Scenario {
            rates: self.rates()?,
            timer: self.timer()?,
            policy: self.policy()?,
            costs: self.costs()?,
            detach_at: self.scenario.detach_at,
            incoming_sessions: self.scenario.incoming_sessions.clone(),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::model::CostedEvent;

    #[test]
    fn empty_file_gives_defaults() {
        let s = ScenarioFile::parse("").unwrap().scenario().unwrap();
        assert_eq!(s.rates, RateConfig::new(0.5, 0.5, 0.5).unwrap());
        assert_eq!(s.timer.t_p(), 1.0);
        assert_eq!(s.policy, Policy::cloud_aware(0.0).unwrap());
        assert_eq!(s.costs, CostModel::default());
    }

    #[test]
    fn full_schema() {
        let text = r#"
            [rates]
            ios = 0.1
            ccrr = 0.2
            csa = 0.3
            [timer]
            t_p = 2.5
            [policy]
            kind = "standard_ims"
            publish_interval = 0.5
            ios_refreshes = true
            [costs]
            csa_local = 4
            [costs.catalog]
            REGISTER = 300
            BYE = 50
            [costs.procedures]
            prr = ["REGISTER"]
            [scenario]
            detach_at = 12.0
            incoming_sessions = [13.0, 12.5]
        "#;
        let s = ScenarioFile::parse(text).unwrap().scenario().unwrap();
        assert_eq!(s.policy.kind(), PolicyKind::StandardIms);
        assert!(s.policy.ios_refreshes());
        assert_eq!(s.policy.publish_interval(), 0.5);
        assert_eq!(s.costs.event_cost(CostedEvent::Prr), 300.0);
        assert_eq!(s.costs.event_cost(CostedEvent::Ccrr), 400.0);
        assert_eq!(s.costs.event_cost(CostedEvent::Csa), 4.0);
        assert_eq!(s.detach_at, Some(12.0));
        assert_eq!(s.incoming_sessions, vec![13.0, 12.5]);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        for text in [
            "[rates]\nios = -1.0",
            "[timer]\nt_p = 0.0",
            "[policy]\nkind = \"gsm\"",
            "[costs.procedures]\nios = [\"MISSING\"]",
        ] {
            let err = ScenarioFile::parse(text).unwrap().scenario().unwrap_err();
            assert!(matches!(err, Error::Usage(_)), "{text}: {err}");
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ScenarioFile::parse("[rates]\nfoo = 1.0"), Err(Error::Config(_))));
        assert!(matches!(ScenarioFile::parse("[costs.procedures]\nbye = []"), Err(Error::Config(_))));
    }
}
