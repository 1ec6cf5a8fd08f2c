//! Serialization of finished runs: the two CSV tables and the JSON-ready
//! summary. All quantities are written in internal units (waists, launch
//! momenta, declared energy); every float uses scientific notation with nine
//! significant digits so equal runs produce byte-identical files.

use std::io::{self, Write};

use serde::Serialize;

use crate::dynamics::{Event, StopReason, TrajectoryLog};
use crate::scenarios::{BeamMetrics, OracleComparison, Scenario, ScenarioOutcome};

/// Column header of `trajectories.csv`. One row per recorded ray per sample.
pub const TRAJECTORIES_HEADER: &str = "t,ray_id,x,z,px,pz,R,W,H_drift,flags";

/// Column header of `metrics.csv`. One row per recorded sample.
pub const METRICS_HEADER: &str =
    "t,z_axis,envelope_plus,envelope_minus,rms_width,peak_intensity,axial_pz";

/// Scientific notation, nine significant digits: the fixed on-disk float
/// format.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

/// Writes the per-ray trajectory table of a finished run.
pub fn write_trajectories_csv<W: Write>(out: &mut W, log: &TrajectoryLog) -> io::Result<()> {
    writeln!(out, "{TRAJECTORIES_HEADER}")?;
    for sample in &log.samples {
        let t = fmt_float(sample.t);
        for ray in &sample.rays {
            writeln!(
                out,
                "{t},{},{},{},{},{},{},{},{},{}",
                ray.ray_id,
                fmt_float(ray.r.x),
                fmt_float(ray.r.z),
                fmt_float(ray.p.x),
                fmt_float(ray.p.z),
                fmt_float(ray.amplitude),
                fmt_float(ray.wave_potential),
                fmt_float(ray.h_drift),
                ray.flags,
            )?;
        }
    }
    Ok(())
}

/// Writes the per-sample aggregate table of a finished run.
pub fn write_metrics_csv<W: Write>(out: &mut W, metrics: &[BeamMetrics]) -> io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for m in metrics {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_float(m.t),
            fmt_float(m.z_axis),
            fmt_float(m.envelope_plus),
            fmt_float(m.envelope_minus),
            fmt_float(m.rms_width),
            fmt_float(m.peak_intensity),
            fmt_float(m.axial_pz),
        )?;
    }
    Ok(())
}

/// In-memory rendering of [`write_trajectories_csv`], for byte comparisons.
pub fn trajectories_csv_bytes(log: &TrajectoryLog) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trajectories_csv(&mut buf, log).expect("writing to a Vec cannot fail");
    buf
}

/// In-memory rendering of [`write_metrics_csv`], for byte comparisons.
pub fn metrics_csv_bytes(metrics: &[BeamMetrics]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, metrics).expect("writing to a Vec cannot fail");
    buf
}

/// The JSON-ready digest of one run: what happened, how it stopped, how well
/// it matched its analytic targets, and how tightly the invariants held.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub epsilon: f64,
    pub n_rays: usize,
    pub dt: f64,
    /// Why the run stopped.
    pub termination: StopReason,
    pub steps: u64,
    pub t_final: f64,
    pub samples_recorded: usize,
    pub events: Vec<Event>,
    pub oracle_comparisons: Vec<OracleComparison>,
    /// Max `|H - H0|` over every ray and step, declared energy units.
    pub max_h_drift: f64,
    /// Max relative drift of the per-ray flux constant `R^2 |p| Delta`.
    pub max_flux_deviation: f64,
    /// Max `||p| - 1|` over every ray and step.
    pub max_momentum_deviation: f64,
}

pub fn run_summary(scenario: &Scenario, outcome: &ScenarioOutcome) -> RunSummary {
    RunSummary {
        scenario: scenario.name.id().to_string(),
        epsilon: scenario.system.config.scales.epsilon,
        n_rays: scenario.system.config.numerics.n_rays,
        dt: scenario.system.config.numerics.dt,
        termination: outcome.log.stop,
        steps: outcome.log.steps,
        t_final: outcome.log.t_final,
        samples_recorded: outcome.log.samples.len(),
        events: outcome.log.events.clone(),
        oracle_comparisons: outcome.comparisons.clone(),
        max_h_drift: outcome.log.max_h_drift,
        max_flux_deviation: outcome.log.max_flux_dev,
        max_momentum_deviation: outcome.log.max_pmag_dev,
    }
}
