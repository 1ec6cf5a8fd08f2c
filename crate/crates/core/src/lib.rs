//! Trajectory engine for wave-coupled ray bundles.
//!
//! A bundle of rays carries a real amplitude along with position and
//! momentum. The transverse curvature of the amplitude profile feeds back on
//! the rays as an extra potential, so the bundle reproduces wave behavior —
//! spreading, focusing to a finite waist, partial barrier penetration — from
//! ordinary ordinary-differential-equation trajectories. Three regimes share
//! the engine: monochromatic light, non-relativistic matter beams, and
//! relativistic matter beams.
//!
//! Crate layout:
//! - [`model`]: regime configuration, validation, internal units.
//! - [`potentials`]: external potential and refractive-index landscapes.
//! - [`wavefront`]: the ray bundle, amplitude transport, and the local
//!   quadratic estimator that turns amplitudes into the coupling potential.
//! - [`dynamics`]: the step loop — symmetric rotation/RK4 splitting,
//!   termination rules, events, and conservation diagnostics.
//! - [`scenarios`]: prebuilt experiments with documented defaults, override
//!   grammar, beam aggregates, and analytic yardsticks.
//! - [`output`]: deterministic CSV/JSON-ready serialization of finished runs.
//! - [`verify`]: the built-in check suite behind `wavetraj verify`.

pub mod dynamics;
pub mod error;
pub mod model;
pub mod output;
pub mod potentials;
pub mod scenarios;
pub mod verify;
pub mod wavefront;

pub use dynamics::{configure_workers, integrate, Medium, StopReason, System, TrajectoryLog};
pub use error::{BuildError, ConfigError, SimError};
pub use model::{NumericsConfig, RegimeConfig, Termination, ValidatedConfig, Vec2};
pub use scenarios::{
    build_scenario, execute, Overrides, Scenario, ScenarioName, ScenarioOutcome,
};
pub use verify::{all_checks, all_passed, run_checks, CheckReport};
