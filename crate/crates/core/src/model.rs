//! Regime configuration, validation, and the internal unit system.
//!
//! Every run integrates in dimensionless internal units: lengths in the launch
//! waist `w0`, momenta in the launch momentum `p0`, time in `w0` divided by the
//! launch speed, and energies in the regime's declared energy unit (the total
//! beam energy `E` for matter waves, the angular frequency for classical
//! light). In those units every regime launches with speed 1 and `|p| = 1`,
//! and the single coupling knob is `epsilon = lambda0 / (2*pi*w0)`.
//!
//! Conversions between user units and internal units happen only at the
//! boundaries (configuration intake and the output manifest); the integrator
//! itself never sees a dimensional quantity.

use serde::Serialize;

use crate::error::{ConfigError, ConfigViolation};

/// Ratio of longitudinal momentum to total momentum below which the
/// transverse-profile projection degenerates; affected rays are flagged and
/// their curvature ratio is frozen at its last valid value.
pub const STALL_RATIO: f64 = 1e-3;

/// Lower clamp on `|p|` (in `p0` units) used by amplitude transport so that
/// turning points do not divide by zero. Clamped steps are flagged.
pub const PMAG_CLAMP: f64 = 1e-12;

/// Rays whose amplitude falls below this fraction of the front maximum are
/// excluded from derivative fits; their wave potential is copied from the
/// nearest fitted ray.
pub const AMPLITUDE_FLOOR: f64 = 1e-6;

/// Outermost rays per side excluded from beam metrics (their one-sided
/// derivative fits feel the Gaussian truncation).
pub const EDGE_EXCLUDED_PER_SIDE: usize = 2;

/// A point or vector in the meridional plane: `x` transverse, `z` along the
/// launch axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Vec2 {
    pub x: f64,
    pub z: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, z: 0.0 };

    pub fn new(x: f64, z: f64) -> Self {
        Vec2 { x, z }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.z * other.z
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.z * s)
    }

    pub fn add(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x + other.x, self.z + other.z)
    }

    pub fn sub(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x - other.x, self.z - other.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }
}

/// The three wave models sharing one trajectory engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Regime {
    /// Monochromatic light ray bundle: `dr/dt = c k/k0`,
    /// `dk/dt = grad[(c k0/2) n^2 - W]`.
    Classical { light_speed: f64, angular_frequency: f64 },
    /// Matter beam with `dr/dt = p/m`, `dp/dt = -grad(V + W)` and launch
    /// momentum `p0 = sqrt(2 m E)`.
    NonRelativistic { mass: f64, total_energy: f64 },
    /// Matter beam with `dr/dt = c^2 p/(E - V)`,
    /// `dp/dt = -grad V - E/(E - V) grad W` and launch momentum
    /// `p0 = sqrt(E^2/c^2 - (m0 c)^2)` (total energy includes rest energy;
    /// `m0 = 0` gives rays moving at exactly `c`).
    Relativistic { rest_mass: f64, light_speed: f64, total_energy: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RegimeKind {
    Classical,
    NonRelativistic,
    Relativistic,
}

/// User-facing regime description in user units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeConfig {
    pub regime: Regime,
    /// Reduced Planck constant in user units (formal for the classical regime).
    pub hbar: f64,
    /// Launch waist `w0` in user length units; the internal length unit.
    pub waist: f64,
    /// `lambda0 / w0`, the declared wavelength-to-waist ratio. Must agree with
    /// the value derived from the regime constants.
    pub wavelength_ratio: f64,
}

impl RegimeConfig {
    pub fn kind(&self) -> RegimeKind {
        match self.regime {
            Regime::Classical { .. } => RegimeKind::Classical,
            Regime::NonRelativistic { .. } => RegimeKind::NonRelativistic,
            Regime::Relativistic { .. } => RegimeKind::Relativistic,
        }
    }

    /// Launch momentum `p0` in user units (`hbar * k0` for classical light).
    pub fn launch_momentum(&self) -> f64 {
        match self.regime {
            Regime::Classical { light_speed, angular_frequency } => {
                self.hbar * angular_frequency / light_speed
            }
            Regime::NonRelativistic { mass, total_energy } => (2.0 * mass * total_energy).sqrt(),
            Regime::Relativistic { rest_mass, light_speed, total_energy } => {
                let rest_energy = rest_mass * light_speed * light_speed;
                ((total_energy - rest_energy) * (total_energy + rest_energy)).sqrt() / light_speed
            }
        }
    }

    /// Launch speed in user units; defines the internal time unit `w0 / v`.
    pub fn launch_speed(&self) -> f64 {
        match self.regime {
            Regime::Classical { light_speed, .. } => light_speed,
            Regime::NonRelativistic { mass, .. } => self.launch_momentum() / mass,
            Regime::Relativistic { light_speed, total_energy, .. } => {
                light_speed * light_speed * self.launch_momentum() / total_energy
            }
        }
    }

    /// Free-space wavelength `lambda0` in user units, derived from the regime
    /// constants (not from the declared ratio).
    pub fn wavelength(&self) -> f64 {
        match self.regime {
            Regime::Classical { light_speed, angular_frequency } => {
                2.0 * std::f64::consts::PI * light_speed / angular_frequency
            }
            _ => 2.0 * std::f64::consts::PI * self.hbar / self.launch_momentum(),
        }
    }

    /// Builds a non-relativistic configuration with `m = E = w0 = 1` and
    /// `hbar` chosen so the declared wavelength ratio is exactly consistent.
    pub fn non_relativistic_desk(wavelength_ratio: f64) -> Self {
        let p0 = 2.0_f64.sqrt();
        RegimeConfig {
            regime: Regime::NonRelativistic { mass: 1.0, total_energy: 1.0 },
            hbar: wavelength_ratio * p0 / (2.0 * std::f64::consts::PI),
            waist: 1.0,
            wavelength_ratio,
        }
    }

    /// Classical counterpart of [`non_relativistic_desk`]: `c = w0 = 1` with
    /// the angular frequency set by the declared wavelength ratio.
    pub fn classical_desk(wavelength_ratio: f64) -> Self {
        RegimeConfig {
            regime: Regime::Classical {
                light_speed: 1.0,
                angular_frequency: 2.0 * std::f64::consts::PI / wavelength_ratio,
            },
            hbar: 1.0,
            waist: 1.0,
            wavelength_ratio,
        }
    }

    /// Relativistic configuration with `c = w0 = 1`, a chosen total energy and
    /// rest mass, and `hbar` set so the declared wavelength ratio holds.
    pub fn relativistic_desk(wavelength_ratio: f64, total_energy: f64, rest_mass: f64) -> Self {
        let mut cfg = RegimeConfig {
            regime: Regime::Relativistic { rest_mass, light_speed: 1.0, total_energy },
            hbar: 1.0,
            waist: 1.0,
            wavelength_ratio,
        };
        cfg.hbar = wavelength_ratio * cfg.launch_momentum() / (2.0 * std::f64::consts::PI);
        cfg
    }
}

/// How a run decides it is finished.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Termination {
    /// Stop once `t >= t_end`.
    TimeEnd { t_end: f64 },
    /// Stop once the axis ray reaches `z >= z_end` (internal units).
    PlaneCrossing { z_end: f64 },
    /// Stop at the first sign change of the axis ray's `p_z`.
    AxisTurning,
    /// Stop when, after at least one turning, the axis ray returns to
    /// `z <= z_return`.
    ReturnPlane { z_return: f64 },
}

/// Discretization and estimator controls. All lengths are internal (`w0`)
/// units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericsConfig {
    /// Number of rays across the front; odd so the axis ray exists.
    pub n_rays: usize,
    /// Half-width of the launch front.
    pub front_half_width: f64,
    /// Fixed integration step in internal time units.
    pub dt: f64,
    pub termination: Termination,
    /// Hard cap on steps regardless of the termination condition.
    pub max_steps: usize,
    /// Neighbors per side entering each local quadratic fit.
    pub fit_window: usize,
    /// Record every `record_stride`-th step (plus the first and last).
    pub record_stride: usize,
    /// Use the literal transverse projection `(p_x/p_z)^2` from the original
    /// trajectory formulation instead of the default geometric front-slope
    /// projection `1 + (dz/dx)^2`.
    pub strict_paper_eq29: bool,
    /// Drop the wave-potential coupling entirely (geometric-ray limit).
    pub eikonal_mode: bool,
    /// Neighbor spacing at or below which a caustic is declared.
    pub caustic_min_spacing: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            n_rays: 201,
            front_half_width: 3.0,
            dt: 0.05,
            termination: Termination::TimeEnd { t_end: 100.0 },
            max_steps: 2_000_000,
            fit_window: 4,
            record_stride: 25,
            strict_paper_eq29: false,
            eikonal_mode: false,
            caustic_min_spacing: 1e-6,
        }
    }
}

/// The four scale factors mapping user units to internal units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitSystem {
    /// `w0` in user length units.
    pub length_unit: f64,
    /// `p0` in user momentum units.
    pub momentum_unit: f64,
    /// `w0 / v_launch` in user time units.
    pub time_unit: f64,
    /// Declared energy unit: `E` for matter waves, `hbar * omega` for
    /// classical light.
    pub energy_unit: f64,
}

impl UnitSystem {
    pub fn length_to_internal(&self, x: f64) -> f64 {
        x / self.length_unit
    }
    pub fn length_from_internal(&self, x: f64) -> f64 {
        x * self.length_unit
    }
    pub fn momentum_to_internal(&self, p: f64) -> f64 {
        p / self.momentum_unit
    }
    pub fn momentum_from_internal(&self, p: f64) -> f64 {
        p * self.momentum_unit
    }
    pub fn time_to_internal(&self, t: f64) -> f64 {
        t / self.time_unit
    }
    pub fn time_from_internal(&self, t: f64) -> f64 {
        t * self.time_unit
    }
    pub fn energy_to_internal(&self, e: f64) -> f64 {
        e / self.energy_unit
    }
    pub fn energy_from_internal(&self, e: f64) -> f64 {
        e * self.energy_unit
    }
}

/// Derived beam scales in user units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scales {
    /// `lambda0 / (2 pi w0)`, the dimensionless coupling strength.
    pub epsilon: f64,
    /// Launch momentum in user units.
    pub p0: f64,
    /// `pi w0^2 / lambda0` in user units; the free-space spreading length.
    pub rayleigh_length: f64,
}

/// Pure function of the regime configuration; equal inputs give bitwise-equal
/// outputs.
pub fn derive_scales(rc: &RegimeConfig) -> Scales {
    let epsilon = rc.wavelength_ratio / (2.0 * std::f64::consts::PI);
    Scales {
        epsilon,
        p0: rc.launch_momentum(),
        rayleigh_length: std::f64::consts::PI * rc.waist / rc.wavelength_ratio,
    }
}

/// Regime constants pre-reduced to internal units, consumed by the dynamics
/// kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeInternal {
    pub kind: RegimeKind,
    pub epsilon: f64,
    /// `W_declared = -w_declared_coeff * L` where `L = w0^2 * lap(R)/R`.
    /// Holds `epsilon^2` (non-relativistic), `epsilon^2/2` (classical), or
    /// `beta0^2 * epsilon^2 / 2` (relativistic).
    pub w_declared_coeff: f64,
    /// `(v_launch/c)^2`; 1 for the non-classical-limit regimes.
    pub beta0_sq: f64,
    /// `(m0 c^2 / E)^2`; 0 unless relativistic.
    pub mu_sq: f64,
}

impl RegimeInternal {
    /// Factor converting a declared-unit potential gradient into an internal
    /// momentum rate: `dp/dt = -grad_conv * grad(V/E) + wave force`.
    pub fn grad_conv(&self) -> f64 {
        match self.kind {
            RegimeKind::NonRelativistic => 0.5,
            RegimeKind::Classical => 1.0,
            RegimeKind::Relativistic => 1.0 / self.beta0_sq,
        }
    }
}

/// A configuration that passed validation, with every derived scale resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidatedConfig {
    pub regime: RegimeConfig,
    pub numerics: NumericsConfig,
    pub units: UnitSystem,
    pub scales: Scales,
    pub internal: RegimeInternal,
}

/// Checks every configuration rule and reports the complete list of
/// violations; never partially validates.
pub fn validate_config(
    regime: &RegimeConfig,
    numerics: &NumericsConfig,
) -> Result<ValidatedConfig, ConfigError> {
    let mut violations = Vec::new();
    fn positive(violations: &mut Vec<ConfigViolation>, name: &'static str, value: f64) {
        if !(value > 0.0) || !value.is_finite() {
            violations.push(ConfigViolation::NonPositiveParameter { name, value });
        }
    }

    positive(&mut violations, "waist", regime.waist);
    positive(&mut violations, "wavelength_ratio", regime.wavelength_ratio);
    positive(&mut violations, "hbar", regime.hbar);
    match regime.regime {
        Regime::Classical { light_speed, angular_frequency } => {
            positive(&mut violations, "light_speed", light_speed);
            positive(&mut violations, "angular_frequency", angular_frequency);
        }
        Regime::NonRelativistic { mass, total_energy } => {
            positive(&mut violations, "mass", mass);
            positive(&mut violations, "total_energy", total_energy);
        }
        Regime::Relativistic { rest_mass, light_speed, total_energy } => {
            positive(&mut violations, "light_speed", light_speed);
            positive(&mut violations, "total_energy", total_energy);
            if rest_mass < 0.0 || !rest_mass.is_finite() {
                violations.push(ConfigViolation::NonPositiveParameter {
                    name: "rest_mass",
                    value: rest_mass,
                });
            } else if light_speed > 0.0 && total_energy > 0.0 {
                let rest_energy = rest_mass * light_speed * light_speed;
                if rest_mass > 0.0 && total_energy <= rest_energy {
                    violations.push(ConfigViolation::RelativisticEnergyBelowRestMass {
                        energy: total_energy,
                        rest_energy,
                    });
                }
            }
        }
    }

    positive(&mut violations, "dt", numerics.dt);
    positive(&mut violations, "front_half_width", numerics.front_half_width);
    positive(&mut violations, "caustic_min_spacing", numerics.caustic_min_spacing);
    if numerics.n_rays % 2 == 0 {
        violations.push(ConfigViolation::EvenRayCount { n: numerics.n_rays });
    } else if numerics.n_rays < 5 {
        violations.push(ConfigViolation::RayCountTooSmall { n: numerics.n_rays });
    }
    if numerics.fit_window < 2 {
        violations.push(ConfigViolation::FitWindowTooSmall { w: numerics.fit_window });
    }
    if numerics.record_stride == 0 {
        violations.push(ConfigViolation::NonPositiveParameter { name: "record_stride", value: 0.0 });
    }

    // The declared wavelength ratio must match the one the regime constants
    // imply; both routes to epsilon must agree.
    if violations.is_empty() {
        let derived = regime.wavelength() / regime.waist;
        let declared = regime.wavelength_ratio;
        if ((derived - declared) / declared).abs() > 1e-9 {
            violations.push(ConfigViolation::InconsistentWavelength { declared, derived });
        }
    }

    if !violations.is_empty() {
        return Err(ConfigError { violations });
    }

    let scales = derive_scales(regime);
    let units = UnitSystem {
        length_unit: regime.waist,
        momentum_unit: scales.p0,
        time_unit: regime.waist / regime.launch_speed(),
        energy_unit: match regime.regime {
            Regime::Classical { angular_frequency, .. } => regime.hbar * angular_frequency,
            Regime::NonRelativistic { total_energy, .. } => total_energy,
            Regime::Relativistic { total_energy, .. } => total_energy,
        },
    };
    let eps2 = scales.epsilon * scales.epsilon;
    let internal = match regime.regime {
        Regime::Classical { .. } => RegimeInternal {
            kind: RegimeKind::Classical,
            epsilon: scales.epsilon,
            w_declared_coeff: 0.5 * eps2,
            beta0_sq: 1.0,
            mu_sq: 0.0,
        },
        Regime::NonRelativistic { .. } => RegimeInternal {
            kind: RegimeKind::NonRelativistic,
            epsilon: scales.epsilon,
            w_declared_coeff: eps2,
            beta0_sq: 1.0,
            mu_sq: 0.0,
        },
        Regime::Relativistic { rest_mass, light_speed, total_energy } => {
            let mu = rest_mass * light_speed * light_speed / total_energy;
            let mu_sq = mu * mu;
            let beta0_sq = 1.0 - mu_sq;
            RegimeInternal {
                kind: RegimeKind::Relativistic,
                epsilon: scales.epsilon,
                w_declared_coeff: 0.5 * beta0_sq * eps2,
                beta0_sq,
                mu_sq,
            }
        }
    };

    Ok(ValidatedConfig { regime: *regime, numerics: *numerics, units, scales, internal })
}
