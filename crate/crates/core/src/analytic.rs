//! Closed-form power model.
//!
//! Between two update checkpoints the inter-arrival time is exponential with
//! the policy's checkpoint rate, and every full timer length that elapses in
//! that gap triggers one periodic re-registration (PRR). The PRR count per
//! gap is therefore geometric on {0, 1, 2, ...}.

use crate::error::{Error, Result};
use crate::model::{ArrivalKind, CostModel, CostedEvent, Policy, PolicyKind, RateConfig, TimerParams};

/// Distribution of the PRR count between two consecutive update checkpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrrDistribution {
    checkpoint_rate: f64,
    t_p: f64,
}

impl PrrDistribution {
    pub fn new(checkpoint_rate: f64, t_p: f64) -> Result<Self> {
        if !checkpoint_rate.is_finite() || checkpoint_rate <= 0.0 {
            return Err(Error::domain(format!(
                "checkpoint rate must be positive and finite, got {checkpoint_rate}; \
                 the expected PRR count diverges"
            )));
        }
        if !t_p.is_finite() || t_p <= 0.0 {
            return Err(Error::usage(format!("t_p must be positive and finite, got {t_p}")));
        }
        Ok(Self { checkpoint_rate, t_p })
    }

    /// The distribution governing `policy` at the given rates.
    pub fn for_policy(policy: &Policy, rates: &RateConfig, params: &TimerParams) -> Result<Self> {
        let rate = policy.checkpoint_rate(rates);
        if rate <= 0.0 {
            let offending = match policy.kind() {
                PolicyKind::StandardIms if !policy.ios_refreshes() => "lambda_ccrr",
                PolicyKind::StandardIms => "lambda_ccrr + lambda_ios",
                PolicyKind::CloudAware => "lambda (total)",
            };
            return Err(Error::domain(format!(
                "PRR term diverges: {offending} = 0 under {}",
                policy.kind()
            )));
        }
        Self::new(rate, params.t_p())
    }

    pub fn checkpoint_rate(&self) -> f64 {
        self.checkpoint_rate
    }

    pub fn t_p(&self) -> f64 {
        self.t_p
    }

    fn exponent(&self) -> f64 {
        self.checkpoint_rate * self.t_p
    }

    /// Probability that a checkpoint gap outlasts a single timer length is
    /// `1 - success_probability`.
    pub fn success_probability(&self) -> f64 {
        -(-self.exponent()).exp_m1()
    }

    /// P(N = n) = e^(-λ n t_p) (1 - e^(-λ t_p)).
    pub fn pmf(&self, n: u64) -> f64 {
        (-self.exponent() * n as f64).exp() * self.success_probability()
    }

    /// E[N] = 1 / (e^(λ t_p) - 1).
    pub fn expectation(&self) -> f64 {
        1.0 / self.exponent().exp_m1()
    }
}

/// Checked form of [`PrrDistribution::pmf`] for signed callers.
pub fn prr_pmf(dist: &PrrDistribution, n: i64) -> Result<f64> {
    let n = u64::try_from(n).map_err(|_| Error::usage(format!("PRR count must be >= 0, got {n}")))?;
    Ok(dist.pmf(n))
}

pub fn prr_expectation(dist: &PrrDistribution) -> f64 {
    dist.expectation()
}

/// Expected power of one event class per update checkpoint: c_e * λ_e / λ.
pub fn per_event_power(rates: &RateConfig, costs: &CostModel, event: ArrivalKind) -> Result<f64> {
    let total = rates.total();
    if total <= 0.0 {
        return Err(Error::domain("total event rate is zero; per-checkpoint shares are undefined"));
    }
    Ok(costs.event_cost(CostedEvent::from(event)) * rates.rate_of(event) / total)
}

/// Expected device power per update checkpoint, split by event class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBreakdown {
    pub power_ccrr: f64,
    pub power_ios: f64,
    pub power_prr: f64,
    pub total: f64,
}

/// Total location-update power for `policy`.
///
/// The CCRR and IOS shares are normalized by the aggregate rate of all three
/// event classes for both policies; only the PRR term differs, through the
/// policy's checkpoint rate. CSA local-update cost is not part of the total.
pub fn total_power(
    policy: &Policy,
    rates: &RateConfig,
    params: &TimerParams,
    costs: &CostModel,
) -> Result<PowerBreakdown> {
    let power_ccrr = per_event_power(rates, costs, ArrivalKind::Ccrr)?;
    let power_ios = per_event_power(rates, costs, ArrivalKind::Ios)?;
    let dist = PrrDistribution::for_policy(policy, rates, params)?;
    let power_prr = costs.event_cost(CostedEvent::Prr) * dist.expectation();
    Ok(PowerBreakdown {
        power_ccrr,
        power_ios,
        power_prr,
        total: power_ccrr + power_ios + power_prr,
    })
}

/// Power saved by the cloud-aware scheme relative to the IMS baseline.
pub fn power_difference(rates: &RateConfig, params: &TimerParams, costs: &CostModel) -> Result<f64> {
    let ims = total_power(&Policy::standard_ims(), rates, params, costs)?;
    let cloud = total_power(&Policy::cloud_aware(0.0)?, rates, params, costs)?;
    Ok(ims.total - cloud.total)
}
