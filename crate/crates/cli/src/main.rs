//! `wavetraj` — command-line front end for the beam-trajectory engine.
//!
//! Subcommands: `run` (execute a named scenario and write its artifacts),
//! `verify` (the built-in check suite), `list` (available scenarios), and
//! `plot` (re-render figures from a written trajectory table).
//!
//! Exit codes: 0 success, 1 simulation/output error, 2 usage or configuration
//! error, 3 verification failure.

mod artifacts;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use wavetraj_core::output::{metrics_csv_bytes, run_summary, trajectories_csv_bytes};
use wavetraj_core::{
    all_passed, build_scenario, configure_workers, execute, run_checks, Overrides, Scenario,
    ScenarioName, SimError, StopReason,
};

use artifacts::{AppliedSetting, ResolvedConfig, RunManifest, WrittenFile};

#[derive(Parser)]
#[command(
    name = "wavetraj",
    version,
    about = "Trajectory simulator for wave-coupled ray bundles",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named scenario and write its output files.
    Run(RunArgs),
    /// Run the built-in verification suite (all fast checks by default).
    Verify(VerifyArgs),
    /// List the available scenarios.
    List,
    /// Re-render the figure for a finished run from its trajectories.csv.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name (see `wavetraj list`).
    scenario: String,
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Configuration file of `key = value` lines (`#` starts a comment).
    #[arg(long)]
    config: Option<PathBuf>,
    /// One `key=value` setting; repeatable, wins over --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Also write trajectories.svg and intensity.svg.
    #[arg(long)]
    plot: bool,
    /// Original optical-bench geometry instead of the compressed desk
    /// geometry.
    #[arg(long)]
    paper_scale: bool,
    /// Literal transverse projection (p_x/p_z)^2 instead of the default
    /// front-slope projection; kept for comparison.
    #[arg(long)]
    strict_eq29: bool,
    /// Geometric-ray limit: drop the wave coupling.
    #[arg(long)]
    eikonal: bool,
    /// Worker threads for per-step ray parallelism (default: all cores;
    /// results are identical for any value).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Check names to run (default: every check not marked slow).
    checks: Vec<String>,
    /// Run the envelope check in the literal-projection mode; it is expected
    /// to fail, demonstrating why the corrected projection is the default.
    #[arg(long)]
    strict_eq29: bool,
    /// Worker threads for per-step ray parallelism.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// Path to a trajectories.csv written by `wavetraj run`.
    csv: PathBuf,
    /// Output SVG: trajectory panel with the intensity profiles beside it.
    out_svg: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::List => cmd_list(),
        Command::Plot(args) => cmd_plot(&args),
    };
    ExitCode::from(code)
}

fn fail(code: u8, message: impl AsRef<str>) -> u8 {
    eprintln!("error: {}", message.as_ref());
    code
}

fn apply_workers(workers: Option<usize>) -> Result<(), String> {
    if let Some(n) = workers {
        if n == 0 {
            return Err("--workers must be at least 1".to_string());
        }
        if let Err(e) = configure_workers(n) {
            // The pool was already running; results do not depend on its
            // size, so this is only worth a warning.
            eprintln!("warning: worker pool unchanged: {e}");
        }
    }
    Ok(())
}

/// Reads a `key = value` configuration file: one pair per line, `#` comments,
/// blank lines ignored.
fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "{}:{}: expected 'key = value', got '{}'",
                path.display(),
                idx + 1,
                raw.trim()
            ));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Stable machine-readable tag for a runtime simulation error.
fn sim_error_kind(e: &SimError) -> &'static str {
    match e {
        SimError::CausticCollapse { .. } => "caustic_collapse",
        SimError::RelativisticPole { .. } => "relativistic_pole",
        SimError::NonFinite { .. } => "non_finite",
        SimError::WindowTooSmall { .. } => "window_too_small",
        SimError::AmplitudeUnderflow => "amplitude_underflow",
        SimError::MaxStepsExceeded { .. } => "max_steps_exceeded",
        SimError::EmptyOverlap => "empty_overlap",
        SimError::UnknownScenario(_) => "unknown_scenario",
        SimError::InvalidOverride(_) => "invalid_override",
    }
}

fn stop_label(stop: StopReason) -> String {
    match stop {
        StopReason::TimeEnd => "time_end".to_string(),
        StopReason::PlaneCrossed => "plane_crossed".to_string(),
        StopReason::AxisTurned => "axis_turned".to_string(),
        StopReason::Returned => "returned".to_string(),
        StopReason::Caustic { i, j, .. } => format!("caustic (rays {i}/{j})"),
    }
}

fn cmd_run(args: &RunArgs) -> u8 {
    let started = Instant::now();
    let name: ScenarioName = match args.scenario.parse() {
        Ok(name) => name,
        Err(e) => return fail(2, e.to_string()),
    };

    // Settings resolve in precedence order: defaults, then the configuration
    // file, then each --set, then the dedicated flags.
    let mut ov = Overrides::default();
    let mut applied: Vec<AppliedSetting> = Vec::new();
    let apply = |ov: &mut Overrides,
                     applied: &mut Vec<AppliedSetting>,
                     key: &str,
                     value: &str|
     -> Result<(), String> {
        ov.set(key, value).map_err(|e| e.to_string())?;
        applied.push(AppliedSetting { key: key.to_string(), value: value.to_string() });
        Ok(())
    };
    if let Some(path) = &args.config {
        let pairs = match read_config_file(path) {
            Ok(pairs) => pairs,
            Err(e) => return fail(2, e),
        };
        for (key, value) in &pairs {
            if let Err(e) = apply(&mut ov, &mut applied, key, value) {
                return fail(2, format!("{}: {e}", path.display()));
            }
        }
    }
    for spec in &args.set {
        let Some((key, value)) = spec.split_once('=') else {
            return fail(2, format!("--set needs KEY=VALUE, got '{spec}'"));
        };
        if let Err(e) = apply(&mut ov, &mut applied, key.trim(), value.trim()) {
            return fail(2, e);
        }
    }
    for (flag, on) in [
        ("paper_scale", args.paper_scale),
        ("strict_eq29", args.strict_eq29),
        ("eikonal", args.eikonal),
    ] {
        if on {
            if let Err(e) = apply(&mut ov, &mut applied, flag, "true") {
                return fail(2, e);
            }
        }
    }

    if let Err(e) = apply_workers(args.workers) {
        return fail(2, e);
    }
    let scenario = match build_scenario(name, &ov) {
        Ok(scenario) => scenario,
        Err(e) => return fail(2, e.to_string()),
    };
    if let Err(e) = fs::create_dir_all(&args.out) {
        return fail(2, format!("cannot create output directory {}: {e}", args.out.display()));
    }

    let outcome = match execute(&scenario) {
        Ok(outcome) => outcome,
        Err(e) => {
            // Leave a machine-readable account of the failure behind.
            let error_summary = serde_json::json!({
                "scenario": name.id(),
                "error": { "kind": sim_error_kind(&e), "message": e.to_string() },
            });
            let _ = artifacts::write_atomic(
                &args.out,
                "summary.json",
                &artifacts::to_json_bytes(&error_summary),
            );
            return fail(1, e.to_string());
        }
    };

    let mut outputs: Vec<WrittenFile> = Vec::new();
    let write = |name: &str, bytes: &[u8], outputs: &mut Vec<WrittenFile>| -> Result<(), u8> {
        match artifacts::write_atomic(&args.out, name, bytes) {
            Ok(written) => {
                outputs.push(written);
                Ok(())
            }
            Err(e) => Err(fail(1, format!("cannot write {name}: {e}"))),
        }
    };

    let result = (|| -> Result<(), u8> {
        write("trajectories.csv", &trajectories_csv_bytes(&outcome.log), &mut outputs)?;
        write("metrics.csv", &metrics_csv_bytes(&outcome.metrics), &mut outputs)?;
        let summary = run_summary(&scenario, &outcome);
        write("summary.json", &artifacts::to_json_bytes(&summary), &mut outputs)?;
        if args.plot {
            let data = plot::PlotData::from_log(&outcome.log);
            let title = name.id();
            write(
                "trajectories.svg",
                plot::trajectories_svg(&data, Some(title)).as_bytes(),
                &mut outputs,
            )?;
            write(
                "intensity.svg",
                plot::intensity_svg(&data, Some(title)).as_bytes(),
                &mut outputs,
            )?;
        }
        let manifest = build_manifest(&scenario, applied, &outcome.log.events, outputs.clone(), started);
        write("manifest.json", &artifacts::to_json_bytes(&manifest), &mut outputs)?;
        Ok(())
    })();
    if let Err(code) = result {
        return code;
    }

    println!(
        "{}: {} after {} steps (t = {:.3}); {} files in {}",
        name.id(),
        stop_label(outcome.log.stop),
        outcome.log.steps,
        outcome.log.t_final,
        outputs.len(),
        args.out.display()
    );
    0
}

fn build_manifest(
    scenario: &Scenario,
    applied_settings: Vec<AppliedSetting>,
    events: &[wavetraj_core::dynamics::Event],
    outputs: Vec<WrittenFile>,
    started: Instant,
) -> RunManifest {
    RunManifest {
        scenario: scenario.name.id().to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        duration_seconds: started.elapsed().as_secs_f64(),
        applied_settings,
        config: ResolvedConfig {
            validated: scenario.system.config,
            medium: scenario.system.medium,
            launch_components: scenario.components.clone(),
            energy_ratio: scenario.energy_ratio,
            quantum_n: scenario.quantum_n,
            paper_scale: scenario.paper_scale,
        },
        events: events.to_vec(),
        outputs,
    }
}

fn cmd_verify(args: &VerifyArgs) -> u8 {
    if let Err(e) = apply_workers(args.workers) {
        return fail(2, e);
    }
    let reports = match run_checks(&args.checks, args.strict_eq29) {
        Ok(reports) => reports,
        Err(e) => return fail(2, e),
    };
    println!("{:<20} {:<6} {:>8}  details", "check", "result", "seconds");
    for report in &reports {
        println!(
            "{:<20} {:<6} {:>8.1}  {}",
            report.name,
            if report.passed { "PASS" } else { "FAIL" },
            report.seconds,
            report.details
        );
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    println!("{passed}/{} checks passed", reports.len());
    if all_passed(&reports) {
        0
    } else {
        3
    }
}

fn cmd_list() -> u8 {
    for name in ScenarioName::all() {
        println!("{:<17} {}", name.id(), name.description());
    }
    0
}

fn cmd_plot(args: &PlotArgs) -> u8 {
    let text = match fs::read_to_string(&args.csv) {
        Ok(text) => text,
        Err(e) => return fail(2, format!("cannot read {}: {e}", args.csv.display())),
    };
    let data = match plot::PlotData::from_csv(&text) {
        Ok(data) => data,
        Err(e) => {
            return fail(2, format!("malformed trajectory table {}: {e}", args.csv.display()))
        }
    };
    let svg = plot::combined_svg(&data, None);
    let dir = match args.out_svg.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let Some(file_name) = args.out_svg.file_name().and_then(|n| n.to_str()) else {
        return fail(2, format!("output path {} has no file name", args.out_svg.display()));
    };
    match artifacts::write_atomic(&dir, file_name, svg.as_bytes()) {
        Ok(_) => {
            println!("wrote {}", args.out_svg.display());
            0
        }
        Err(e) => fail(1, format!("cannot write {}: {e}", args.out_svg.display())),
    }
}
