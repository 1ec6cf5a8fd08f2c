//! Error types shared across the library.

use thiserror::Error;

/// A single configuration rule violation. Validation collects every violation
/// it finds rather than stopping at the first one.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigViolation {
    #[error("{name} must be positive (got {value})")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("ray count must be odd so an axis ray exists (got {n})")]
    EvenRayCount { n: usize },
    #[error("ray count must be at least 5 (got {n})")]
    RayCountTooSmall { n: usize },
    #[error("fit window must cover at least 2 rays per side (got {w})")]
    FitWindowTooSmall { w: usize },
    #[error("total energy {energy} does not exceed the rest energy {rest_energy}")]
    RelativisticEnergyBelowRestMass { energy: f64, rest_energy: f64 },
    #[error(
        "declared wavelength ratio {declared} disagrees with the value {derived} \
         derived from the regime constants"
    )]
    InconsistentWavelength { declared: f64, derived: f64 },
}

/// Returned when a configuration fails validation; carries the complete list
/// of violations.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub violations: Vec<ConfigViolation>,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration ({} problem(s)):", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Runtime failures of a simulation or of the surrounding orchestration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(
        "caustic collapse at t = {t:.6}: rays {i} and {j} crossed or their spacing \
         fell to {spacing:.3e}"
    )]
    CausticCollapse { t: f64, i: usize, j: usize, spacing: f64 },
    #[error("energy pole: V reached the total energy at ray {ray} (V/E = {v_over_e:.6})")]
    RelativisticPole { ray: usize, v_over_e: f64 },
    #[error("non-finite state at t = {t:.6}, ray {ray}")]
    NonFinite { t: f64, ray: usize },
    #[error("fit window at ray {ray} holds only {usable} usable samples (needs at least 3)")]
    WindowTooSmall { ray: usize, usable: usize },
    #[error("every ray amplitude fell below the relative floor; the front is numerically empty")]
    AmplitudeUnderflow,
    #[error("step budget {max_steps} exhausted before the termination condition was met")]
    MaxStepsExceeded { max_steps: usize },
    #[error("no overlap between the recorded samples and the oracle domain")]
    EmptyOverlap,
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("invalid override: {0}")]
    InvalidOverride(String),
}

/// Failure to assemble a runnable scenario: either the request itself was bad
/// (unknown name, malformed override) or the resulting configuration failed
/// validation. Both are usage errors, distinct from runtime simulation
/// failures.
#[derive(Debug, Clone, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Request(#[from] SimError),
}
