//! The trajectory engine: regime equations of motion, the split integration
//! step, and the run loop with events and conservation diagnostics.
//!
//! Each step freezes the wave potential on the current front, then moves every
//! ray independently. The move itself is split so the wave coupling cannot
//! leak into `|p|`: the frozen tangential wave force is applied as two
//! momentum half-rotations (which preserve the momentum magnitude by
//! construction, matching the exact dynamics of a force orthogonal to `p`)
//! around a classical RK4 substep that sees only the external potential. In
//! free space this keeps `||p| - p0|` at rounding level over arbitrarily long
//! runs, which a plain additive kick cannot do.
//!
//! Everything is internal units; `System` owns the conversion from the user's
//! analytic field descriptions.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::SimError;
use crate::model::{RegimeKind, Termination, ValidatedConfig, Vec2};
use crate::potentials::{
    eval_gradient, eval_index_gradient, eval_index_squared, eval_potential, PotentialField,
    RefractiveIndexField,
};
use crate::wavefront::{
    transport_amplitude, wave_stage, RayState, WaveFront, WaveQuantities,
    FLAG_EDGE, FLAG_PMAG_CLAMP, FLAG_STALL,
};

/// What the rays move through, in user units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Medium {
    /// External potential for the matter regimes.
    Potential(PotentialField),
    /// Refractive-index landscape for the classical regime.
    Index(RefractiveIndexField),
}

/// The relativistic energy denominator `E - V` closed at or below zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleError {
    pub v_over_e: f64,
}

/// A validated configuration bound to a medium: everything the step kernels
/// need.
#[derive(Debug, Clone, Copy)]
pub struct System {
    pub config: ValidatedConfig,
    pub medium: Medium,
}

impl System {
    /// Potential-like declared-unit scalar at an internal position: `V/E` for
    /// matter, `-n^2/2` for light (so that one force expression serves all
    /// regimes).
    pub fn potential_declared(&self, r: Vec2) -> f64 {
        let u = self.config.units.length_unit;
        let ru = Vec2::new(r.x * u, r.z * u);
        match &self.medium {
            Medium::Potential(f) => eval_potential(f, ru) / self.config.units.energy_unit,
            Medium::Index(f) => -0.5 * eval_index_squared(f, ru),
        }
    }

    /// Internal-coordinate gradient of [`potential_declared`](Self::potential_declared).
    pub fn grad_potential_declared(&self, r: Vec2) -> Vec2 {
        let u = self.config.units.length_unit;
        let ru = Vec2::new(r.x * u, r.z * u);
        match &self.medium {
            Medium::Potential(f) => {
                eval_gradient(f, ru).scale(u / self.config.units.energy_unit)
            }
            Medium::Index(f) => eval_index_gradient(f, ru).scale(-0.5 * u),
        }
    }

    /// `dr/dt` in internal units. Identical to the momentum for light and
    /// non-relativistic matter; relativistic rays divide by `1 - V/E`, whose
    /// pole is reported rather than crossed.
    pub fn velocity(&self, r: Vec2, p: Vec2) -> Result<Vec2, PoleError> {
        match self.config.internal.kind {
            RegimeKind::Classical | RegimeKind::NonRelativistic => Ok(p),
            RegimeKind::Relativistic => {
                let v_over_e = self.potential_declared(r);
                if v_over_e >= 1.0 {
                    Err(PoleError { v_over_e })
                } else {
                    Ok(p.scale(1.0 / (1.0 - v_over_e)))
                }
            }
        }
    }

    /// External (non-wave) part of `dp/dt` in internal units.
    pub fn external_force(&self, r: Vec2) -> Vec2 {
        self.grad_potential_declared(r).scale(-self.config.internal.grad_conv())
    }

    /// Internal tangential wave-force magnitudes for a front, from the
    /// declared-unit `dW/dxi` of the estimation stage. Relativistic rays pick
    /// up the `1/(1 - V/E)` enhancement.
    pub fn tangential_forces(
        &self,
        front: &WaveFront,
        q: &WaveQuantities,
    ) -> Result<Vec<f64>, SimError> {
        let gc = self.config.internal.grad_conv();
        let relativistic = self.config.internal.kind == RegimeKind::Relativistic;
        let mut out = Vec::with_capacity(front.n());
        for (i, ray) in front.rays.iter().enumerate() {
            let mut f = -gc * q.dw_dxi[i];
            if relativistic {
                let v_over_e = self.potential_declared(ray.r);
                if v_over_e >= 1.0 {
                    return Err(SimError::RelativisticPole { ray: i, v_over_e });
                }
                f /= 1.0 - v_over_e;
            }
            out.push(f);
        }
        Ok(out)
    }

    /// Declared-unit energy function of one ray given its current wave
    /// potential: `p^2 + V/E + W` (non-relativistic, in units of `E`),
    /// `(k^2 - n^2)/2 + W` (classical, in units of `hbar omega`), or
    /// `V/E + sqrt(beta0^2 p^2 + mu^2 + 2 W)` (relativistic, in units of `E`).
    /// A negative relativistic radicand surfaces as NaN and is caught by the
    /// run loop's finiteness check.
    pub fn hamiltonian(&self, r: Vec2, p: Vec2, w_declared: f64) -> f64 {
        let p2 = p.dot(p);
        match self.config.internal.kind {
            RegimeKind::NonRelativistic => p2 + self.potential_declared(r) + w_declared,
            RegimeKind::Classical => 0.5 * p2 + self.potential_declared(r) + w_declared,
            RegimeKind::Relativistic => {
                let i = &self.config.internal;
                self.potential_declared(r)
                    + (i.beta0_sq * p2 + i.mu_sq + 2.0 * w_declared).sqrt()
            }
        }
    }
}

/// Caps the process-global ray-parallelism pool at `n` worker threads.
/// Effective only if called before the first parallel region spins the pool
/// up; the per-step arithmetic is identical for any worker count, so results
/// never depend on this setting.
pub fn configure_workers(n: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Rotates `p` toward the unit direction `u` by the angle a constant
/// tangential force of magnitude `f_t` would sweep in time `dt`, then
/// rescales so `|p|` is bit-for-bit preserved up to one rounding.
fn rotate_momentum(p: Vec2, u: Vec2, f_t: f64, dt: f64) -> Vec2 {
    let pmag = p.norm();
    if !(pmag > 0.0) || f_t == 0.0 || u == Vec2::ZERO {
        return p;
    }
    let theta = f_t * dt / pmag;
    let (s, c) = theta.sin_cos();
    let rotated = p.scale(c).add(u.scale(pmag * s));
    rotated.scale(pmag / rotated.norm())
}

/// Unit kick direction per ray: the local front direction of increasing
/// `xi`, from neighbouring ray positions (centred where possible, one-sided
/// at the ends). Pairing the fitted `dW/dxi` with this geometric direction
/// keeps the force orientation-consistent by construction; a direction
/// derived from the ray's own momentum would flip sign when the beam
/// reverses its axial travel while the `xi` ordering (anchored to the ray
/// array) does not, turning the spreading force into a spurious attraction
/// on every return leg.
fn kick_directions(front: &WaveFront) -> Vec<Vec2> {
    let n = front.n();
    (0..n)
        .map(|i| {
            let a = front.rays[i.saturating_sub(1)].r;
            let b = front.rays[(i + 1).min(n - 1)].r;
            let seg = b.sub(a);
            let len = seg.norm();
            if len > 0.0 {
                seg.scale(1.0 / len)
            } else {
                Vec2::ZERO
            }
        })
        .collect()
}

/// One classical RK4 substep for a single ray under the external field only,
/// with the field evaluated at every substage position.
fn rk4_ray(sys: &System, r0: Vec2, p0: Vec2, dt: f64) -> Result<(Vec2, Vec2), PoleError> {
    let deriv = |r: Vec2, p: Vec2| -> Result<(Vec2, Vec2), PoleError> {
        Ok((sys.velocity(r, p)?, sys.external_force(r)))
    };
    let h = 0.5 * dt;
    let (v1, f1) = deriv(r0, p0)?;
    let (v2, f2) = deriv(r0.add(v1.scale(h)), p0.add(f1.scale(h)))?;
    let (v3, f3) = deriv(r0.add(v2.scale(h)), p0.add(f2.scale(h)))?;
    let (v4, f4) = deriv(r0.add(v3.scale(dt)), p0.add(f3.scale(dt)))?;
    let sixth = dt / 6.0;
    let r = r0.add(v1.add(v2.scale(2.0)).add(v3.scale(2.0)).add(v4).scale(sixth));
    let p = p0.add(f1.add(f2.scale(2.0)).add(f3.scale(2.0)).add(f4).scale(sixth));
    Ok((r, p))
}

/// Moves every ray through `dt`: tangential half-rotation, RK4 under the
/// external field, tangential half-rotation, with the wave force and its
/// kick direction frozen at their step-start values.
fn move_stage(
    sys: &System,
    front: &mut WaveFront,
    forces: &[f64],
    dt: f64,
) -> Result<(), SimError> {
    let half = 0.5 * dt;
    let dirs = kick_directions(front);
    let moved: Vec<Result<(Vec2, Vec2), PoleError>> = front
        .rays
        .par_iter()
        .zip(forces.par_iter())
        .zip(dirs.par_iter())
        .map(|((ray, &f_t), &u)| {
            let p_in = rotate_momentum(ray.p, u, f_t, half);
            let (r, p_mid) = rk4_ray(sys, ray.r, p_in, dt)?;
            Ok((r, rotate_momentum(p_mid, u, f_t, half)))
        })
        .collect();
    for (i, result) in moved.iter().enumerate() {
        match result {
            Ok((r, p)) => {
                front.rays[i].r = *r;
                front.rays[i].p = *p;
            }
            Err(pole) => {
                return Err(SimError::RelativisticPole { ray: i, v_over_e: pole.v_over_e })
            }
        }
    }
    Ok(())
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    /// Reached the configured end time.
    TimeEnd,
    /// Axis ray crossed the configured plane.
    PlaneCrossed,
    /// Axis ray's longitudinal momentum changed sign.
    AxisTurned,
    /// Axis ray returned behind the configured plane after turning.
    Returned,
    /// Neighboring rays crossed or collapsed; the front stopped being a
    /// single-valued polyline and the run ended there.
    Caustic { i: usize, j: usize, spacing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Axis-ray longitudinal momentum changed sign.
    Turning,
    /// First ray entered the longitudinal stall regime.
    Stall,
    /// First ray hit the momentum-magnitude clamp in transport.
    MomentumClamp,
    /// Front collapse ended the run.
    Caustic,
}

/// A notable moment of a run, recorded alongside the samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub step: u64,
    pub t: f64,
    pub kind: EventKind,
    /// Axis-ray position when the event fired (internal units).
    pub axis_z: f64,
    pub detail: String,
}

/// Snapshot of one ray at a recorded step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayRecord {
    pub ray_id: usize,
    pub r: Vec2,
    pub p: Vec2,
    pub amplitude: f64,
    pub wave_potential: f64,
    /// Signed front arclength at the recorded step (for width metrics).
    pub xi: f64,
    /// Signed drift of the declared-unit energy function from its launch
    /// value.
    pub h_drift: f64,
    pub flags: u32,
}

/// All rays at one recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub step: u64,
    pub t: f64,
    pub rays: Vec<RayRecord>,
}

/// Everything a run produces: periodic samples, events, the stop reason, and
/// the conservation diagnostics tracked at every step (not only recorded
/// ones).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub stop: StopReason,
    pub steps: u64,
    pub t_final: f64,
    /// Launch value of the declared-unit energy function per ray.
    pub h0: Vec<f64>,
    /// Max `|H - H0|` over all rays and steps, declared units.
    pub max_h_drift: f64,
    /// Max relative flux drift over unclamped rays and steps.
    pub max_flux_dev: f64,
    /// Max `||p| - 1|` over all rays and steps.
    pub max_pmag_dev: f64,
    /// Final front, at full precision, for chained runs.
    pub final_front: WaveFront,
}

/// Builds the momentum-reversed counterpart of a front for return
/// integrations. Ray order is reflected so the polyline still runs along the
/// (now flipped) front tangent; momenta are negated; amplitudes and flux
/// constants carry over; stall/clamp history is cleared. Ray `i` of the
/// reversed front corresponds to ray `n-1-i` of the original.
pub fn reversed_front(front: &WaveFront) -> WaveFront {
    let n = front.n();
    let mut rays: Vec<RayState> = front.rays.iter().rev().copied().collect();
    for ray in &mut rays {
        ray.p = ray.p.scale(-1.0);
        ray.xi = -ray.xi;
        ray.flags &= FLAG_EDGE;
        ray.wave_potential = 0.0;
    }
    WaveFront { rays, frozen_l: vec![0.0; n], has_frozen: vec![false; n] }
}

struct DiagnosticsAccumulator {
    max_h_drift: f64,
    max_flux_dev: f64,
    max_pmag_dev: f64,
    h: Vec<f64>,
}

/// Runs a front to its termination condition, recording every
/// `record_stride`-th step plus the launch, every event step, and the final
/// step. A caustic ends the run gracefully (it is a physical finding, and the
/// log up to it is the result); poles, non-finite states, and an exhausted
/// step budget are hard errors.
pub fn integrate(sys: &System, mut front: WaveFront) -> Result<TrajectoryLog, SimError> {
    let numerics = sys.config.numerics;
    let dt = numerics.dt;
    let n = front.n();
    let axis = front.axis_index();

    let q = wave_stage(&mut front, &sys.config.internal, &numerics)?;
    let h0: Vec<f64> = (0..n)
        .map(|i| sys.hamiltonian(front.rays[i].r, front.rays[i].p, q.w_declared[i]))
        .collect();
    for (i, h) in h0.iter().enumerate() {
        if !h.is_finite() {
            return Err(SimError::NonFinite { t: 0.0, ray: i });
        }
    }

    let mut acc = DiagnosticsAccumulator {
        max_h_drift: 0.0,
        max_flux_dev: crate::wavefront::max_flux_deviation(&front),
        max_pmag_dev: front.rays.iter().map(|r| (r.p.norm() - 1.0).abs()).fold(0.0, f64::max),
        h: h0.clone(),
    };

    let mut log = TrajectoryLog {
        samples: Vec::new(),
        events: Vec::new(),
        stop: StopReason::TimeEnd,
        steps: 0,
        t_final: 0.0,
        h0: h0.clone(),
        max_h_drift: 0.0,
        max_flux_dev: acc.max_flux_dev,
        max_pmag_dev: acc.max_pmag_dev,
        final_front: front.clone(),
    };
    record_sample(&mut log, &front, &h0, &acc.h, 0, 0.0);
    let mut last_recorded = 0u64;

    let mut step: u64 = 0;
    let mut t = 0.0f64;
    let mut prev_axis_pz = front.rays[axis].p.z;
    let mut turned = false;
    let mut seen_stall = false;
    let mut seen_clamp = false;
    let mut current_q = q;

    let stop = loop {
        // Termination is judged on the current, fully-diagnosed state.
        let axis_ray = &front.rays[axis];
        let met = match numerics.termination {
            Termination::TimeEnd { t_end } => t >= t_end - 1e-9 * dt,
            Termination::PlaneCrossing { z_end } => axis_ray.r.z >= z_end,
            Termination::AxisTurning => turned,
            Termination::ReturnPlane { z_return } => turned && axis_ray.r.z <= z_return,
        };
        if met {
            break match numerics.termination {
                Termination::TimeEnd { .. } => StopReason::TimeEnd,
                Termination::PlaneCrossing { .. } => StopReason::PlaneCrossed,
                Termination::AxisTurning => StopReason::AxisTurned,
                Termination::ReturnPlane { .. } => StopReason::Returned,
            };
        }
        if step as usize >= numerics.max_steps {
            return Err(SimError::MaxStepsExceeded { max_steps: numerics.max_steps });
        }

        let forces = sys.tangential_forces(&front, &current_q)?;
        move_stage(sys, &mut front, &forces, dt)?;
        step += 1;
        t = step as f64 * dt;

        if let Err(report) = transport_amplitude(&mut front, numerics.caustic_min_spacing) {
            let axis_z = front.rays[axis].r.z;
            log.events.push(Event {
                step,
                t,
                kind: EventKind::Caustic,
                axis_z,
                detail: format!(
                    "rays {} and {} collapsed to spacing {:.3e}",
                    report.i, report.j, report.spacing
                ),
            });
            record_sample(&mut log, &front, &h0, &acc.h, step, t);
            last_recorded = step;
            break StopReason::Caustic {
                i: report.i,
                j: report.j,
                spacing: report.spacing,
            };
        }

        current_q = wave_stage(&mut front, &sys.config.internal, &numerics)?;
        update_diagnostics(sys, &front, &current_q, &h0, &mut acc, t)?;

        let axis_pz = front.rays[axis].p.z;
        if (prev_axis_pz > 0.0 && axis_pz <= 0.0) || (prev_axis_pz < 0.0 && axis_pz >= 0.0) {
            turned = true;
            let axis_z = front.rays[axis].r.z;
            log.events.push(Event {
                step,
                t,
                kind: EventKind::Turning,
                axis_z,
                detail: format!("axis p_z changed sign at z = {axis_z:.6}"),
            });
            record_sample(&mut log, &front, &h0, &acc.h, step, t);
            last_recorded = step;
        }
        prev_axis_pz = axis_pz;

        if !seen_stall && front.rays.iter().any(|r| r.flags & FLAG_STALL != 0) {
            seen_stall = true;
            let first = front.rays.iter().position(|r| r.flags & FLAG_STALL != 0).unwrap();
            log.events.push(Event {
                step,
                t,
                kind: EventKind::Stall,
                axis_z: front.rays[axis].r.z,
                detail: format!("ray {first} entered the longitudinal stall regime"),
            });
        }
        if !seen_clamp && front.rays.iter().any(|r| r.flags & FLAG_PMAG_CLAMP != 0) {
            seen_clamp = true;
            let first = front.rays.iter().position(|r| r.flags & FLAG_PMAG_CLAMP != 0).unwrap();
            log.events.push(Event {
                step,
                t,
                kind: EventKind::MomentumClamp,
                axis_z: front.rays[axis].r.z,
                detail: format!("ray {first} hit the momentum-magnitude clamp"),
            });
        }

        if step % numerics.record_stride as u64 == 0 && step != last_recorded {
            record_sample(&mut log, &front, &h0, &acc.h, step, t);
            last_recorded = step;
        }
    };

    if last_recorded != step {
        record_sample(&mut log, &front, &h0, &acc.h, step, t);
    }
    log.stop = stop;
    log.steps = step;
    log.t_final = t;
    log.max_h_drift = acc.max_h_drift;
    log.max_flux_dev = acc.max_flux_dev;
    log.max_pmag_dev = acc.max_pmag_dev;
    log.final_front = front;
    Ok(log)
}

fn update_diagnostics(
    sys: &System,
    front: &WaveFront,
    q: &WaveQuantities,
    h0: &[f64],
    acc: &mut DiagnosticsAccumulator,
    t: f64,
) -> Result<(), SimError> {
    for (i, ray) in front.rays.iter().enumerate() {
        if !ray.r.is_finite() || !ray.p.is_finite() || !ray.amplitude.is_finite() {
            return Err(SimError::NonFinite { t, ray: i });
        }
        let h = sys.hamiltonian(ray.r, ray.p, q.w_declared[i]);
        if !h.is_finite() {
            return Err(SimError::NonFinite { t, ray: i });
        }
        acc.h[i] = h;
        acc.max_h_drift = acc.max_h_drift.max((h - h0[i]).abs());
        acc.max_pmag_dev = acc.max_pmag_dev.max((ray.p.norm() - 1.0).abs());
    }
    acc.max_flux_dev = acc.max_flux_dev.max(crate::wavefront::max_flux_deviation(front));
    Ok(())
}

fn record_sample(
    log: &mut TrajectoryLog,
    front: &WaveFront,
    h0: &[f64],
    h: &[f64],
    step: u64,
    t: f64,
) {
    let rays = front
        .rays
        .iter()
        .enumerate()
        .map(|(i, ray)| RayRecord {
            ray_id: i,
            r: ray.r,
            p: ray.p,
            amplitude: ray.amplitude,
            wave_potential: ray.wave_potential,
            xi: ray.xi,
            h_drift: h[i] - h0[i],
            flags: ray.flags,
        })
        .collect();
    log.samples.push(Sample { step, t, rays });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        validate_config, NumericsConfig, RegimeConfig, Termination,
    };
    use crate::wavefront::{init_gaussian_front, GaussianComponent};

    fn desk_system(medium: Medium, numerics: NumericsConfig) -> System {
        let rc = RegimeConfig::non_relativistic_desk(1e-2);
        System { config: validate_config(&rc, &numerics).unwrap(), medium }
    }

    fn free_numerics(termination: Termination) -> NumericsConfig {
        NumericsConfig { termination, ..NumericsConfig::default() }
    }

    fn launch(sys: &System) -> WaveFront {
        init_gaussian_front(
            &sys.config.numerics,
            &[GaussianComponent::centered()],
            Vec2::new(0.0, 1.0),
        )
    }

    /// Non-relativistic velocity is the momentum itself: launch speed 1.
    #[test]
    fn velocity_matches_momentum() {
        let sys = desk_system(
            Medium::Potential(PotentialField::Free),
            free_numerics(Termination::TimeEnd { t_end: 1.0 }),
        );
        let v = sys.velocity(Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0)).unwrap();
        assert_eq!(v, Vec2::new(0.0, 1.0));
    }

    /// Massless relativistic rays move at exactly the speed of light in free
    /// space (speed 1 internally at launch momentum).
    #[test]
    fn massless_relativistic_speed() {
        let rc = RegimeConfig::relativistic_desk(1e-2, 1.0, 0.0);
        let numerics = free_numerics(Termination::TimeEnd { t_end: 1.0 });
        let sys = System {
            config: validate_config(&rc, &numerics).unwrap(),
            medium: Medium::Potential(PotentialField::Free),
        };
        let v = sys.velocity(Vec2::ZERO, Vec2::new(0.0, 1.0)).unwrap();
        assert_eq!(v.norm(), 1.0);
    }

    /// The relativistic velocity pole at V = E is reported, not crossed.
    #[test]
    fn relativistic_pole_is_reported() {
        let rc = RegimeConfig::relativistic_desk(1e-2, 1.0, 0.0);
        let numerics = free_numerics(Termination::TimeEnd { t_end: 1.0 });
        let sys = System {
            config: validate_config(&rc, &numerics).unwrap(),
            medium: Medium::Potential(PotentialField::ConstantForce { f_z: 1.0 }),
        };
        let err = sys.velocity(Vec2::new(0.0, 2.0), Vec2::new(0.0, 1.0)).unwrap_err();
        assert!(err.v_over_e >= 1.0);
    }

    /// A uniform index landscape exerts no force on light rays.
    #[test]
    fn uniform_index_is_force_free() {
        let rc = RegimeConfig::classical_desk(1e-2);
        let numerics = free_numerics(Termination::TimeEnd { t_end: 1.0 });
        let sys = System {
            config: validate_config(&rc, &numerics).unwrap(),
            medium: Medium::Index(RefractiveIndexField::Uniform { n0: 1.0 }),
        };
        assert_eq!(sys.external_force(Vec2::new(1.0, 2.0)), Vec2::ZERO);
    }

    /// Internal momentum rate equals the user-unit rate scaled by
    /// time_unit/momentum_unit: for the desk regime in a harmonic well with
    /// m*omega^2 = 1, the user rate at z = 2 is (0, -2) and the internal rate
    /// is (0, -1).
    #[test]
    fn momentum_rate_matches_unit_mapping() {
        let numerics = free_numerics(Termination::TimeEnd { t_end: 1.0 });
        let sys = desk_system(
            Medium::Potential(PotentialField::Harmonic { m_omega_sq: 1.0 }),
            numerics,
        );
        let rate = sys.external_force(Vec2::new(0.0, 2.0));
        let user_rate = Vec2::new(0.0, -2.0);
        let factor = sys.config.units.time_unit / sys.config.units.momentum_unit;
        assert!((rate.z - user_rate.z * factor).abs() < 1e-15);
        assert!((rate.z + 1.0).abs() < 1e-12, "internal rate = {rate:?}");
        assert_eq!(rate.x, 0.0);
    }

    /// Free rays in eikonal mode move exactly linearly with constant momentum.
    #[test]
    fn free_eikonal_is_exactly_linear() {
        let numerics = NumericsConfig {
            eikonal_mode: true,
            termination: Termination::TimeEnd { t_end: 5.0 },
            ..NumericsConfig::default()
        };
        let sys = desk_system(Medium::Potential(PotentialField::Free), numerics);
        let front = launch(&sys);
        let x0: Vec<f64> = front.rays.iter().map(|r| r.r.x).collect();
        let log = integrate(&sys, front).unwrap();
        assert_eq!(log.stop, StopReason::TimeEnd);
        for (ray, &x) in log.final_front.rays.iter().zip(&x0) {
            assert_eq!(ray.r.x, x);
            assert!((ray.r.z - 5.0).abs() < 1e-12);
            assert_eq!(ray.p, Vec2::new(0.0, 1.0));
        }
    }

    /// A zero-duration run returns exactly the initial sample.
    #[test]
    fn zero_step_run_records_launch_only() {
        let sys = desk_system(
            Medium::Potential(PotentialField::Free),
            free_numerics(Termination::TimeEnd { t_end: 0.0 }),
        );
        let log = integrate(&sys, launch(&sys)).unwrap();
        assert_eq!(log.samples.len(), 1);
        assert_eq!(log.steps, 0);
        assert_eq!(log.samples[0].t, 0.0);
    }

    /// Recording covers the launch, every stride-th step, and the final step.
    #[test]
    fn recording_stride() {
        let numerics = NumericsConfig {
            record_stride: 4,
            dt: 0.05,
            termination: Termination::TimeEnd { t_end: 1.0 },
            ..NumericsConfig::default()
        };
        let sys = desk_system(Medium::Potential(PotentialField::Free), numerics);
        let log = integrate(&sys, launch(&sys)).unwrap();
        let steps: Vec<u64> = log.samples.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![0, 4, 8, 12, 16, 20]);
    }

    /// With the coupling on, free-space `|p|` is conserved at rounding level —
    /// the rotation update cannot change it and nothing else acts.
    #[test]
    fn free_space_momentum_magnitude_is_conserved() {
        let sys = desk_system(
            Medium::Potential(PotentialField::Free),
            free_numerics(Termination::TimeEnd { t_end: 25.0 }),
        );
        let log = integrate(&sys, launch(&sys)).unwrap();
        assert!(log.max_pmag_dev < 1e-13, "max ||p|-1| = {:.3e}", log.max_pmag_dev);
        assert!(log.max_flux_dev < 1e-13, "max flux dev = {:.3e}", log.max_flux_dev);
    }

    /// Under a constant decelerating force the axis ray turns at z = E/F
    /// (internal: launch kinetic z-speed 1, deceleration F/2 in declared
    /// units converts to turning exactly where V = E).
    #[test]
    fn constant_force_turning_point() {
        let numerics = NumericsConfig {
            eikonal_mode: true,
            termination: Termination::AxisTurning,
            ..NumericsConfig::default()
        };
        let sys =
            desk_system(Medium::Potential(PotentialField::ConstantForce { f_z: 0.05 }), numerics);
        let log = integrate(&sys, launch(&sys)).unwrap();
        assert_eq!(log.stop, StopReason::AxisTurned);
        let axis = log.final_front.axis_index();
        let z_turn = log.final_front.rays[axis].r.z;
        // Detection is step-granular; if p_z lands within rounding of zero the
        // sign change registers one step later, costing O(F dt^2) in z.
        assert!((z_turn - 20.0).abs() < 1e-3, "z_turn = {z_turn}");
        assert!(log.events.iter().any(|e| e.kind == EventKind::Turning));
    }

    /// The eikonal energy function is conserved to rounding on a smooth
    /// potential (RK4 is exact for linear dynamics).
    #[test]
    fn eikonal_energy_drift_is_tiny() {
        let numerics = NumericsConfig {
            eikonal_mode: true,
            dt: 0.01,
            termination: Termination::AxisTurning,
            ..NumericsConfig::default()
        };
        let sys =
            desk_system(Medium::Potential(PotentialField::ConstantForce { f_z: 0.05 }), numerics);
        let log = integrate(&sys, launch(&sys)).unwrap();
        assert!(log.max_h_drift < 1e-12, "H drift = {:.3e}", log.max_h_drift);
    }

    /// RK4 on the eikonal harmonic well shows fourth-order convergence under
    /// step halving: the axis solution is z(t) = 2 sin(t/2) for the scaled
    /// well used here, and the endpoint error ratio gives order >= 3.8.
    /// The endpoint sits mid-swing; at a node of z(t) the leading error term
    /// cancels and the measured ratio degrades.
    #[test]
    fn rk4_step_halving_order() {
        let t_end = 5.0;
        let mut errs = Vec::new();
        for dt in [0.1, 0.05] {
            let numerics = NumericsConfig {
                eikonal_mode: true,
                dt,
                termination: Termination::TimeEnd { t_end },
                record_stride: 1_000_000,
                ..NumericsConfig::default()
            };
            let sys = desk_system(
                Medium::Potential(PotentialField::Harmonic { m_omega_sq: 0.5 }),
                numerics,
            );
            let log = integrate(&sys, launch(&sys)).unwrap();
            let t = log.t_final;
            let analytic = 2.0 * (0.5 * t).sin();
            let axis = log.final_front.axis_index();
            errs.push((log.final_front.rays[axis].r.z - analytic).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order >= 3.8, "observed order {order:.2} from errors {errs:?}");
    }

    /// Reversing momenta (with the reflected ray order) and integrating the
    /// same duration returns the rays to their launch positions.
    #[test]
    fn time_reversal_on_linear_potential() {
        let numerics = NumericsConfig {
            eikonal_mode: true,
            termination: Termination::TimeEnd { t_end: 10.0 },
            ..NumericsConfig::default()
        };
        let sys =
            desk_system(Medium::Potential(PotentialField::ConstantForce { f_z: 0.01 }), numerics);
        let front = launch(&sys);
        let x0: Vec<f64> = front.rays.iter().map(|r| r.r.x).collect();
        let forward = integrate(&sys, front).unwrap();
        let back = integrate(&sys, reversed_front(&forward.final_front)).unwrap();
        let n = back.final_front.n();
        for i in 0..n {
            let home = back.final_front.rays[n - 1 - i].r;
            assert!((home.x - x0[i]).abs() < 1e-9, "ray {i}: x = {} vs {}", home.x, x0[i]);
            assert!(home.z.abs() < 1e-9, "ray {i}: z = {}", home.z);
        }
    }

    /// The reversed front preserves amplitudes and flux and flips momenta,
    /// keeping xi ascending.
    #[test]
    fn reversed_front_shape() {
        let sys = desk_system(
            Medium::Potential(PotentialField::Free),
            free_numerics(Termination::TimeEnd { t_end: 1.0 }),
        );
        let front = launch(&sys);
        let rev = reversed_front(&front);
        let n = front.n();
        for i in 0..n {
            let j = n - 1 - i;
            assert_eq!(rev.rays[i].amplitude, front.rays[j].amplitude);
            assert_eq!(rev.rays[i].flux_const, front.rays[j].flux_const);
            assert_eq!(rev.rays[i].p, front.rays[j].p.scale(-1.0));
        }
        for i in 0..n - 1 {
            assert!(rev.rays[i + 1].xi > rev.rays[i].xi);
        }
    }

    /// Launch energy values: the coupled launch sits above the bare energy by
    /// exactly the axis wave potential, and eikonal free flight pins H at 1.
    #[test]
    fn launch_hamiltonian_values() {
        let sys = desk_system(
            Medium::Potential(PotentialField::Free),
            free_numerics(Termination::TimeEnd { t_end: 1.0 }),
        );
        let log = integrate(&sys, launch(&sys)).unwrap();
        let axis = log.final_front.axis_index();
        let eps = sys.config.internal.epsilon;
        let expected = 1.0 + 2.0 * eps * eps;
        assert!(
            (log.h0[axis] - expected).abs() < 1e-12,
            "H0 = {}, expected {expected}",
            log.h0[axis]
        );

        let mut numerics = free_numerics(Termination::TimeEnd { t_end: 1.0 });
        numerics.eikonal_mode = true;
        let sys_e = desk_system(Medium::Potential(PotentialField::Free), numerics);
        let log_e = integrate(&sys_e, launch(&sys_e)).unwrap();
        assert_eq!(log_e.h0[axis], 1.0);
        assert_eq!(log_e.max_h_drift, 0.0);

        let rc = RegimeConfig::classical_desk(1e-2);
        let sys_c = System {
            config: validate_config(&rc, &numerics).unwrap(),
            medium: Medium::Index(RefractiveIndexField::Uniform { n0: 1.0 }),
        };
        let h = sys_c.hamiltonian(Vec2::ZERO, Vec2::new(0.0, 1.0), 0.0);
        assert!(h.abs() < 1e-15, "classical launch dispersion = {h}");
    }

    /// The step budget is enforced.
    #[test]
    fn max_steps_is_enforced() {
        let numerics = NumericsConfig {
            max_steps: 10,
            termination: Termination::TimeEnd { t_end: 100.0 },
            ..NumericsConfig::default()
        };
        let sys = desk_system(Medium::Potential(PotentialField::Free), numerics);
        let err = integrate(&sys, launch(&sys)).unwrap_err();
        assert!(matches!(err, SimError::MaxStepsExceeded { max_steps: 10 }));
    }
}
