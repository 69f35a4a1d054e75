//! Parameter sweeps and simulation-versus-closed-form comparisons.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::analytic::{power_difference, total_power, PrrDistribution};
use crate::config::ScenarioFile;
use crate::error::{Error, Result};
use crate::model::{ArrivalKind, PolicyKind, RateConfig, TimerParams};
use crate::sim::{self, replication_seeds, Scenario, SimReport};

/// Relative error accepted when checking simulation against the closed form.
pub const VALIDATION_THRESHOLD: f64 = 0.01;

/// Minimum number of update checkpoints a validation must observe.
pub const MIN_VALIDATION_CHECKPOINTS: f64 = 1e5;

pub const DEFAULT_REPLICATIONS: usize = 10;

/// Expected checkpoints per replication for preset sweeps.
pub const DEFAULT_CHECKPOINTS_PER_REPLICATION: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweptParam {
    LambdaIos,
    LambdaCcrr,
    LambdaCsa,
    TP,
}

impl SweptParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweptParam::LambdaIos => "lambda_ios",
            SweptParam::LambdaCcrr => "lambda_ccrr",
            SweptParam::LambdaCsa => "lambda_csa",
            SweptParam::TP => "t_p",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(&self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        match self {
            SweptParam::LambdaIos => s.rates = s.rates.with(ArrivalKind::Ios, value)?,
            SweptParam::LambdaCcrr => s.rates = s.rates.with(ArrivalKind::Ccrr, value)?,
            SweptParam::LambdaCsa => s.rates = s.rates.with(ArrivalKind::Csa, value)?,
            SweptParam::TP => s.timer = TimerParams::new(value)?,
        }
        Ok(s)
    }
}

impl FromStr for SweptParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda_ios" => Ok(SweptParam::LambdaIos),
            "lambda_ccrr" => Ok(SweptParam::LambdaCcrr),
            "lambda_csa" => Ok(SweptParam::LambdaCsa),
            "t_p" => Ok(SweptParam::TP),
            other => Err(Error::usage(format!("cannot sweep `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    PrrPerCheckpoint,
    TotalPower,
    PowerDifference,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "prr_per_checkpoint" => Ok(Metric::PrrPerCheckpoint),
            "total_power" => Ok(Metric::TotalPower),
            "power_difference" => Ok(Metric::PowerDifference),
            other => Err(Error::usage(format!("unknown metric `{other}`"))),
        }
    }
}

/// How long each simulated run lasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HorizonRule {
    Fixed(f64),
    /// Long enough for this many expected checkpoints under the slowest
    /// policy at each swept point.
    Checkpoints(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweptParam,
    pub values: Vec<f64>,
    pub fixed: Scenario,
    pub replications: usize,
    pub horizon: HorizonRule,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::usage("sweep needs at least one value"));
        }
        if self.values.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::usage("swept values must be strictly increasing"));
        }
        for &v in &self.values {
            self.parameter.apply(&self.fixed, v)?;
        }
        if self.replications == 0 {
            return Err(Error::usage("replications must be >= 1"));
        }
        match self.horizon {
            HorizonRule::Fixed(h) | HorizonRule::Checkpoints(h) if !(h.is_finite() && h > 0.0) => {
                Err(Error::usage(format!("horizon must be positive and finite, got {h}")))
            }
            _ => Ok(()),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        replication_seeds(self.seed, self.replications)
    }

    fn horizon_for(&self, scenario: &Scenario, policies: &[PolicyKind]) -> Result<f64> {
        match self.horizon {
            HorizonRule::Fixed(h) => Ok(h),
            HorizonRule::Checkpoints(n) => {
                let slowest = policies
                    .iter()
                    .map(|&k| scenario.policy.with_kind(k).checkpoint_rate(&scenario.rates))
                    .filter(|&r| r > 0.0)
                    .fold(f64::INFINITY, f64::min);
                let rate = if slowest.is_finite() {
                    slowest
                } else {
                    // No checkpoints at all: run for n timer periods instead.
                    1.0 / scenario.timer.t_p()
                };
                Ok(n / rate)
            }
        }
    }

    /// Loads a TOML sweep description.
    ///
    /// ```toml
    /// parameter = "lambda_csa"
    /// values = [0.0, 0.5, 1.0]
    /// metric = "power_difference"
    /// policies = ["standard_ims", "cloud_aware"]
    /// replications = 10
    /// horizon = 20000.0        # or: checkpoints = 10000.0
    /// seed = 1
    /// [fixed]                  # scenario config
    /// rates = { ios = 0.5, ccrr = 0.5, csa = 0.5 }
    /// ```
    pub fn parse(text: &str) -> Result<(Self, Metric, Vec<PolicyKind>)> {
        let file: SweepFile = toml::from_str(text)?;
        let horizon = match (file.horizon, file.checkpoints) {
            (Some(_), Some(_)) => {
                return Err(Error::usage("give either `horizon` or `checkpoints`, not both"))
            }
            (Some(h), None) => HorizonRule::Fixed(h),
            (None, Some(n)) => HorizonRule::Checkpoints(n),
            (None, None) => HorizonRule::Checkpoints(DEFAULT_CHECKPOINTS_PER_REPLICATION),
        };
        let spec = SweepSpec {
            parameter: file.parameter.parse()?,
            values: file.values,
            fixed: file.fixed.scenario()?,
            replications: file.replications.unwrap_or(DEFAULT_REPLICATIONS),
            horizon,
            seed: file.seed.unwrap_or(1),
        };
        spec.validate()?;
        let policies = match file.policies {
            Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<_>>>()?,
            None => PolicyKind::ALL.to_vec(),
        };
        Ok((spec, file.metric.parse()?, policies))
    }

    pub fn load(path: &Path) -> Result<(Self, Metric, Vec<PolicyKind>)> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    parameter: String,
    values: Vec<f64>,
    metric: String,
    policies: Option<Vec<String>>,
    replications: Option<usize>,
    horizon: Option<f64>,
    checkpoints: Option<f64>,
    seed: Option<u64>,
    #[serde(default)]
    fixed: ScenarioFile,
}

/// Row label: a policy, or the policy difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Series {
    Policy(PolicyKind),
    Difference,
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Series::Policy(kind) => kind.fmt(f),
            Series::Difference => f.write_str("difference"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub param: f64,
    pub series: Series,
    /// `None` when the closed form is undefined at this point.
    pub analytic: Option<f64>,
    pub sim_mean: Option<f64>,
    pub sim_stderr: Option<f64>,
    pub rel_err: Option<f64>,
    /// Mean number of PRR events per replication.
    pub mean_prr_count: f64,
    pub flag: Option<String>,
}

impl ComparisonRow {
    fn new(param: f64, series: Series, analytic: Result<f64>, samples: &[f64], mean_prr_count: f64) -> Self {
        let (sim_mean, sim_stderr) = mean_and_stderr(samples);
        let (analytic, flag) = match analytic {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            param,
            series,
            analytic,
            sim_mean,
            sim_stderr,
            rel_err: relative_error(sim_mean, analytic),
            mean_prr_count,
            flag,
        }
    }
}

fn relative_error(sim: Option<f64>, analytic: Option<f64>) -> Option<f64> {
    match (sim, analytic) {
        (Some(s), Some(a)) if a != 0.0 => Some((s - a).abs() / a.abs()),
        _ => None,
    }
}

/// Sample mean and standard error of the mean. The standard error needs at
/// least two samples.
pub fn mean_and_stderr(samples: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = samples.len();
    if n == 0 {
        return (None, None);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

fn analytic_value(metric: Metric, scenario: &Scenario, kind: PolicyKind) -> Result<f64> {
    let policy = scenario.policy.with_kind(kind);
    match metric {
        Metric::PrrPerCheckpoint => {
            Ok(PrrDistribution::for_policy(&policy, &scenario.rates, &scenario.timer)?.expectation())
        }
        Metric::TotalPower => {
            Ok(total_power(&policy, &scenario.rates, &scenario.timer, &scenario.costs)?.total)
        }
        Metric::PowerDifference => power_difference(&scenario.rates, &scenario.timer, &scenario.costs),
    }
}

fn sim_value(metric: Metric, report: &SimReport) -> Option<f64> {
    match metric {
        Metric::PrrPerCheckpoint => report.prr_per_checkpoint(),
        Metric::TotalPower | Metric::PowerDifference => report.power_per_checkpoint(),
    }
}

/// Runs every (swept value, policy, replication) simulation and pairs the
/// per-point averages with the closed form. Replications at every point and
/// for every policy share seeds.
pub fn run_sweep(spec: &SweepSpec, metric: Metric, policies: &[PolicyKind]) -> Result<Vec<ComparisonRow>> {
    spec.validate()?;
    let mut kinds: Vec<PolicyKind> = match metric {
        Metric::PowerDifference => PolicyKind::ALL.to_vec(),
        _ => policies.to_vec(),
    };
    kinds.sort();
    kinds.dedup();
    if kinds.is_empty() {
        return Err(Error::usage("at least one policy is required"));
    }
    let seeds = spec.seeds();

    let points = spec
        .values
        .iter()
        .map(|&v| {
            let scenario = spec.parameter.apply(&spec.fixed, v)?;
            let horizon = spec.horizon_for(&scenario, &kinds)?;
            Ok((v, scenario, horizon))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut jobs: Vec<(usize, PolicyKind, u64)> = Vec::with_capacity(points.len() * kinds.len() * seeds.len());
    for i in 0..points.len() {
        for &kind in &kinds {
            jobs.extend(seeds.iter().map(|&seed| (i, kind, seed)));
        }
    }
    let reports = jobs
        .par_iter()
        .map(|&(i, kind, seed)| {
            let (_, scenario, horizon) = &points[i];
            let scenario = scenario.with_policy(scenario.policy.with_kind(kind));
            sim::run(&scenario, seed, *horizon)
        })
        .collect::<Result<Vec<_>>>()?;

    // Jobs are laid out point-major, then policy, then seed.
    let per_point = kinds.len() * seeds.len();
    let mut rows = Vec::new();
    for (i, (value, scenario, _)) in points.iter().enumerate() {
        let block = &reports[i * per_point..(i + 1) * per_point];
        let by_policy: Vec<&[SimReport]> = block.chunks(seeds.len()).collect();
        match metric {
            Metric::PowerDifference => {
                let ims = by_policy[kinds.iter().position(|&k| k == PolicyKind::StandardIms).unwrap()];
                let cloud = by_policy[kinds.iter().position(|&k| k == PolicyKind::CloudAware).unwrap()];
                let diffs: Vec<f64> = ims
                    .iter()
                    .zip(cloud)
                    .filter_map(|(a, b)| Some(sim_value(metric, a)? - sim_value(metric, b)?))
                    .collect();
                let prr = mean_prr(ims) - mean_prr(cloud);
                let analytic = analytic_value(metric, scenario, PolicyKind::CloudAware);
                rows.push(ComparisonRow::new(*value, Series::Difference, analytic, &diffs, prr));
            }
            _ => {
                for (kind, reports) in kinds.iter().zip(&by_policy) {
                    let samples: Vec<f64> = reports.iter().filter_map(|r| sim_value(metric, r)).collect();
                    let analytic = analytic_value(metric, scenario, *kind);
                    rows.push(ComparisonRow::new(
                        *value,
                        Series::Policy(*kind),
                        analytic,
                        &samples,
                        mean_prr(reports),
                    ));
                }
            }
        }
    }
    Ok(rows)
}

fn mean_prr(reports: &[SimReport]) -> f64 {
    reports.iter().map(|r| r.prr_count as f64).sum::<f64>() / reports.len() as f64
}

/// Direction a curve is expected to move as the swept parameter grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Increasing,
    Decreasing,
}

/// Analytic values of one series strictly follow `trend`.
pub fn analytic_trend_holds(rows: &[&ComparisonRow], trend: Trend) -> bool {
    rows.windows(2).all(|w| match (w[0].analytic, w[1].analytic) {
        (Some(a), Some(b)) => match trend {
            Trend::Increasing => b > a,
            Trend::Decreasing => b < a,
        },
        _ => false,
    })
}

/// Simulated means follow `trend` up to `k` combined standard errors
/// between neighbouring points.
pub fn simulated_trend_holds(rows: &[&ComparisonRow], trend: Trend, k: f64) -> bool {
    rows.windows(2).all(|w| {
        let (Some(a), Some(b)) = (w[0].sim_mean, w[1].sim_mean) else {
            return false;
        };
        let se = w[0].sim_stderr.unwrap_or(0.0).hypot(w[1].sim_stderr.unwrap_or(0.0));
        match trend {
            Trend::Increasing => b - a >= -k * se,
            Trend::Decreasing => a - b >= -k * se,
        }
    })
}

/// Rows of one series, in swept order.
pub fn series(rows: &[ComparisonRow], which: Series) -> Vec<&ComparisonRow> {
    rows.iter().filter(|r| r.series == which).collect()
}

/// Simulation-versus-closed-form check at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub prr: ComparisonRow,
    pub power: ComparisonRow,
    pub checkpoints: u64,
    pub passed: bool,
}

fn within_threshold(row: &ComparisonRow, checkpoints: u64) -> bool {
    match (row.sim_mean, row.analytic) {
        (Some(sim), Some(analytic)) => {
            let abs = (sim - analytic).abs();
            // Below one event per observed checkpoint the estimate cannot resolve the value.
            abs <= VALIDATION_THRESHOLD * analytic.abs() || abs <= 1.0 / checkpoints as f64
        }
        _ => false,
    }
}

/// Compares the pooled simulated PRR-per-checkpoint and power-per-checkpoint
/// of `scenario` against the closed form.
pub fn validate(scenario: &Scenario, seeds: &[u64], horizon: f64) -> Result<Validation> {
    if seeds.is_empty() {
        return Err(Error::usage("validation needs at least one seed"));
    }
    let rate = scenario.policy.checkpoint_rate(&scenario.rates);
    let expected = rate * horizon * seeds.len() as f64;
    if expected < MIN_VALIDATION_CHECKPOINTS {
        let needed = if rate > 0.0 {
            format!(
                "; need horizon >= {} with {} seed(s)",
                (MIN_VALIDATION_CHECKPOINTS / (rate * seeds.len() as f64)).ceil(),
                seeds.len()
            )
        } else {
            "; the policy has no checkpoints at these rates".to_string()
        };
        return Err(Error::usage(format!(
            "insufficient checkpoints: expected {expected:.0}, required {MIN_VALIDATION_CHECKPOINTS:.0}{needed}"
        )));
    }
    let reports = sim::replicate(scenario, seeds, horizon)?;
    let kind = scenario.policy.kind();
    let checkpoints: u64 = reports.iter().map(|r| r.checkpoint_count).sum();
    let completed: u64 = reports.iter().map(|r| r.completed_prr).sum();
    let served: u64 = reports.iter().map(|r| r.served_arrivals).sum();
    let shared: f64 = reports.iter().map(|r| r.power.ccrr + r.power.ios).sum();
    let prr_cost = reports[0].prr_cost;

    let pooled_prr = completed as f64 / checkpoints.max(1) as f64;
    let pooled_power = shared / served.max(1) as f64 + prr_cost * pooled_prr;

    let row = |metric: Metric, pooled: f64| {
        let samples: Vec<f64> = reports.iter().filter_map(|r| sim_value(metric, r)).collect();
        let (_, stderr) = mean_and_stderr(&samples);
        let analytic = analytic_value(metric, scenario, kind);
        let mut row = ComparisonRow::new(scenario.timer.t_p(), Series::Policy(kind), analytic, &samples, 0.0);
        row.sim_mean = Some(pooled);
        row.sim_stderr = stderr;
        row.rel_err = relative_error(row.sim_mean, row.analytic);
        row.mean_prr_count = mean_prr(&reports);
        row
    };
    let prr = row(Metric::PrrPerCheckpoint, pooled_prr);
    let power = row(Metric::TotalPower, pooled_power);
    // A detach stops checkpointing, so the realised count can fall short of the estimate.
    let passed = checkpoints as f64 >= MIN_VALIDATION_CHECKPOINTS
        && within_threshold(&prr, checkpoints)
        && within_threshold(&power, checkpoints);
    Ok(Validation {
        prr,
        power,
        checkpoints,
        passed,
    })
}

/// Writes `param,policy,analytic,sim_mean,sim_stderr,rel_err`; undefined
/// values are left empty.
pub fn write_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::usage("refusing to write an empty table"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param", "policy", "analytic", "sim_mean", "sim_stderr", "rel_err"])?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.param.to_string(),
            r.series.to_string(),
            num(r.analytic),
            num(r.sim_mean),
            num(r.sim_stderr),
            num(r.rel_err),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[ComparisonRow], destination: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::usage("refusing to write an empty table"));
    }
    let file = std::fs::File::create(destination)?;
    write_csv(rows, std::io::BufWriter::new(file))
}

/// `count` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| {
                if i + 1 == count {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

/// The figure-reproduction sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fig6,
        Preset::Fig7,
        Preset::Fig8,
        Preset::Fig9,
        Preset::Fig10,
        Preset::Fig11,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig8 => "fig8",
            Preset::Fig9 => "fig9",
            Preset::Fig10 => "fig10",
            Preset::Fig11 => "fig11",
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            Preset::Fig6 | Preset::Fig7 => Metric::PrrPerCheckpoint,
            Preset::Fig8 | Preset::Fig9 | Preset::Fig11 => Metric::TotalPower,
            Preset::Fig10 => Metric::PowerDifference,
        }
    }

    /// Expected direction of every curve as the swept value grows.
    pub fn trend(&self) -> Trend {
        match self {
            Preset::Fig6 | Preset::Fig7 | Preset::Fig8 | Preset::Fig11 => Trend::Decreasing,
            Preset::Fig9 | Preset::Fig10 => Trend::Increasing,
        }
    }

    /// Sweep with the figure's fixed parameters, default grid, seed and
    /// replication count.
    pub fn spec(&self, base: &Scenario) -> Result<SweepSpec> {
        let rate_grid = linspace(0.1, 2.0, 20);
        let (ios, ccrr, csa, t_p, parameter, values) = match self {
            Preset::Fig6 => (0.5, 0.5, 0.5, 1.0, SweptParam::LambdaIos, rate_grid),
            Preset::Fig7 => (0.5, 0.5, 0.5, 1.0, SweptParam::TP, linspace(0.5, 5.0, 20)),
            Preset::Fig8 => (0.5, 0.5, 0.5, 1.0, SweptParam::LambdaCcrr, rate_grid),
            Preset::Fig9 => (0.5, 0.5, 0.5, 1.0, SweptParam::LambdaIos, rate_grid),
            Preset::Fig10 => {
                let mut values = vec![0.0];
                values.extend(rate_grid);
                (0.5, 0.5, 0.0, 1.0, SweptParam::LambdaCsa, values)
            }
            Preset::Fig11 => (0.3, 0.3, 0.3, 1.0, SweptParam::TP, linspace(0.5, 5.0, 20)),
        };
        let mut fixed = base.clone();
        fixed.rates = RateConfig::new(ios, ccrr, csa)?;
        fixed.timer = TimerParams::new(t_p)?;
        fixed.detach_at = None;
        fixed.incoming_sessions.clear();
        Ok(SweepSpec {
            parameter,
            values,
            fixed,
            replications: DEFAULT_REPLICATIONS,
            horizon: HorizonRule::Checkpoints(DEFAULT_CHECKPOINTS_PER_REPLICATION),
            seed: 1,
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::usage(format!("unknown preset `{s}` (expected fig6..fig11)")))
    }
}
