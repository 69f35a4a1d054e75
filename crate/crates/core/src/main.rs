use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use locupdate::analytic::{power_difference, total_power, PrrDistribution};
use locupdate::config::ScenarioFile;
use locupdate::experiment::{self, Preset, SweepSpec, MIN_VALIDATION_CHECKPOINTS};
use locupdate::sim::{self, replication_seeds, TraceWriter};
use locupdate::{PolicyKind, Result, Scenario};

#[derive(Parser)]
#[command(name = "locupdate", version, about = "IMS vs cloud-service-aware location update: closed form and simulation")]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base RNG seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Simulated time per run.
    #[arg(long, global = true)]
    horizon: Option<f64>,

    /// Output file (CSV for `sweep`, trace CSV for `simulate`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Scenario config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form model at the configured point.
    Analytic,
    /// Run one simulation and print its report.
    Simulate,
    /// Parameter sweep, simulation against closed form.
    Sweep {
        /// fig6, fig7, fig8, fig9, fig10 or fig11.
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        preset: Option<String>,
        /// Sweep description (TOML).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Check simulated PRR and power per checkpoint against the closed form.
    Validate {
        /// Number of independent replications.
        #[arg(long, default_value_t = 4)]
        seeds: usize,
    },
}

fn scenario(global: &Global) -> Result<Scenario> {
    match &global.config {
        Some(path) => ScenarioFile::load(path)?.scenario(),
        None => ScenarioFile::default().scenario(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".to_string())
}

fn cmd_analytic(global: &Global) -> Result<bool> {
    let s = scenario(global)?;
    let mut out = io::stdout().lock();
    writeln!(out, "lambda_total = {}", s.rates.total())?;
    for kind in PolicyKind::ALL {
        let policy = s.policy.with_kind(kind);
        match PrrDistribution::for_policy(&policy, &s.rates, &s.timer) {
            Ok(d) => writeln!(out, "{kind}.prr_per_checkpoint = {}", d.expectation())?,
            Err(e) => writeln!(out, "{kind}.prr_per_checkpoint = ({e})")?,
        }
        match total_power(&policy, &s.rates, &s.timer, &s.costs) {
            Ok(b) => writeln!(
                out,
                "{kind}.power = {} (ccrr {}, ios {}, prr {})",
                b.total, b.power_ccrr, b.power_ios, b.power_prr
            )?,
            Err(e) => writeln!(out, "{kind}.power = ({e})")?,
        }
    }
    match power_difference(&s.rates, &s.timer, &s.costs) {
        Ok(d) => writeln!(out, "power_difference = {d}")?,
        Err(e) => writeln!(out, "power_difference = ({e})")?,
    }
    Ok(true)
}

fn cmd_simulate(global: &Global) -> Result<bool> {
    let s = scenario(global)?;
    let horizon = global.horizon.unwrap_or(10_000.0);
    let report = match &global.out {
        Some(path) => {
            let mut writer = TraceWriter::new(io::BufWriter::new(std::fs::File::create(path)?))?;
            let report = sim::run_with_trace(&s, global.seed, horizon, |r| writer.write(r))?;
            writer.finish()?.flush()?;
            report
        }
        None => sim::run(&s, global.seed, horizon)?,
    };
    let mut out = io::stdout().lock();
    writeln!(out, "policy = {}", report.policy)?;
    writeln!(out, "seed = {}", report.seed)?;
    writeln!(out, "horizon = {}", report.horizon)?;
    let e = &report.events;
    writeln!(
        out,
        "events = ios {} ccrr {} csa {} device_expiry {} registrar_expiry {} publish {} incoming {} detach {}",
        e.ios, e.ccrr, e.csa, e.device_timer_expiry, e.registrar_timer_expiry, e.publish_tick,
        e.incoming_session, e.detach
    )?;
    writeln!(out, "prr_count = {}", report.prr_count)?;
    writeln!(out, "checkpoint_count = {}", report.checkpoint_count)?;
    writeln!(out, "prr_per_checkpoint = {}", fmt_opt(report.prr_per_checkpoint()))?;
    writeln!(out, "power_total = {}", report.power.total)?;
    writeln!(out, "power_per_checkpoint = {}", fmt_opt(report.power_per_checkpoint()))?;
    writeln!(out, "detach_detected_at = {}", fmt_opt(report.detach_detected_at))?;
    writeln!(out, "spurious_detaches = {}", report.spurious_detaches)?;
    writeln!(out, "trace_digest = {:016x}", report.trace_digest)?;
    Ok(true)
}

fn cmd_sweep(global: &Global, preset: Option<&str>, spec: Option<&PathBuf>, replications: Option<usize>) -> Result<bool> {
    let (mut sweep, metric, policies) = match (preset, spec) {
        (Some(name), _) => {
            let preset: Preset = name.parse()?;
            (preset.spec(&scenario(global)?)?, preset.metric(), PolicyKind::ALL.to_vec())
        }
        (None, Some(path)) => SweepSpec::load(path)?,
        (None, None) => unreachable!("clap requires one of --preset/--spec"),
    };
    sweep.seed = global.seed;
    if let Some(h) = global.horizon {
        sweep.horizon = experiment::HorizonRule::Fixed(h);
    }
    if let Some(n) = replications {
        sweep.replications = n;
    }
    let rows = experiment::run_sweep(&sweep, metric, &policies)?;
    match &global.out {
        Some(path) => experiment::emit_csv(&rows, path)?,
        None => experiment::write_csv(&rows, io::stdout().lock())?,
    }
    for row in rows.iter().filter(|r| r.flag.is_some()) {
        eprintln!("warning: {} at {}: {}", row.series, row.param, row.flag.as_deref().unwrap_or(""));
    }
    Ok(true)
}

fn cmd_validate(global: &Global, seeds: usize) -> Result<bool> {
    let s = scenario(global)?;
    let seeds = replication_seeds(global.seed, seeds);
    let horizon = match global.horizon {
        Some(h) => h,
        None => {
            let rate = s.policy.checkpoint_rate(&s.rates);
            // Ten times the minimum so the 1% check is well resolved.
            10.0 * MIN_VALIDATION_CHECKPOINTS / (rate * seeds.len() as f64).max(f64::MIN_POSITIVE)
        }
    };
    let v = experiment::validate(&s, &seeds, horizon)?;
    let mut out = io::stdout().lock();
    writeln!(out, "policy = {}", s.policy.kind())?;
    writeln!(out, "checkpoints = {}", v.checkpoints)?;
    for (name, row) in [("prr_per_checkpoint", &v.prr), ("power_per_checkpoint", &v.power)] {
        writeln!(
            out,
            "{name}: analytic {} sim {} stderr {} rel_err {}",
            fmt_opt(row.analytic),
            fmt_opt(row.sim_mean),
            fmt_opt(row.sim_stderr),
            fmt_opt(row.rel_err)
        )?;
    }
    writeln!(out, "{}", if v.passed { "PASS" } else { "FAIL" })?;
    Ok(v.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analytic => cmd_analytic(&cli.global),
        Command::Simulate => cmd_simulate(&cli.global),
        Command::Sweep {
            preset,
            spec,
            replications,
        } => cmd_sweep(&cli.global, preset.as_deref(), spec.as_ref(), *replications),
        Command::Validate { seeds } => cmd_validate(&cli.global, *seeds),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
