//! Analytic external potentials and refractive-index profiles.
//!
//! Everything here is exact and closed-form: values, gradients, and classical
//! turning points come from the same expressions the scenarios quote, so the
//! integrator never differentiates numerically. All quantities are in user
//! units; the dynamics layer rescales them.

use serde::Serialize;

use crate::model::Vec2;

/// External potential acting on a matter beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PotentialField {
    /// `V = 0`.
    Free,
    /// Uniform decelerating force along the axis: `V = f_z * z`.
    ConstantForce { f_z: f64 },
    /// Gaussian barrier across the axis: `V = v0 * exp(-2 (z - z_b)^2 / d^2)`.
    GaussianBarrier { v0: f64, z_b: f64, d: f64 },
    /// Smooth step: `V = v0 / (1 + exp(-alpha (z - z_s) / width))`, rising
    /// from 0 far before `z_s` to `v0` far beyond it.
    LogisticStep { v0: f64, z_s: f64, alpha: f64, width: f64 },
    /// Harmonic well along the axis: `V = m_omega_sq * z^2 / 2`.
    Harmonic { m_omega_sq: f64 },
    /// Thin-lens slab: `V = v_l * s(z) * (x / width)^2` with a C^1
    /// cosine-tapered profile `s(z)` supported on `[z1, z2]` (flat over the
    /// middle half, raised-cosine ramps over the outer quarters).
    LensLike { v_l: f64, z1: f64, z2: f64, width: f64 },
}

/// Longitudinal profile of the lens slab and its derivative.
fn lens_profile(z1: f64, z2: f64, z: f64) -> (f64, f64) {
    let q = 0.25 * (z2 - z1);
    if z <= z1 || z >= z2 {
        (0.0, 0.0)
    } else if z < z1 + q {
        let phase = std::f64::consts::PI * (z - z1) / q;
        (0.5 * (1.0 - phase.cos()), 0.5 * std::f64::consts::PI / q * phase.sin())
    } else if z > z2 - q {
        let phase = std::f64::consts::PI * (z2 - z) / q;
        (0.5 * (1.0 - phase.cos()), -0.5 * std::f64::consts::PI / q * phase.sin())
    } else {
        (1.0, 0.0)
    }
}

/// Potential value at a point (user units).
pub fn eval_potential(field: &PotentialField, r: Vec2) -> f64 {
    match *field {
        PotentialField::Free => 0.0,
        PotentialField::ConstantForce { f_z } => f_z * r.z,
        PotentialField::GaussianBarrier { v0, z_b, d } => {
            let u = (r.z - z_b) / d;
            v0 * (-2.0 * u * u).exp()
        }
        PotentialField::LogisticStep { v0, z_s, alpha, width } => {
            v0 / (1.0 + (-alpha * (r.z - z_s) / width).exp())
        }
        PotentialField::Harmonic { m_omega_sq } => 0.5 * m_omega_sq * r.z * r.z,
        PotentialField::LensLike { v_l, z1, z2, width } => {
            let (s, _) = lens_profile(z1, z2, r.z);
            let xw = r.x / width;
            v_l * s * xw * xw
        }
    }
}

/// Exact gradient of the potential (user units).
pub fn eval_gradient(field: &PotentialField, r: Vec2) -> Vec2 {
    match *field {
        PotentialField::Free => Vec2::ZERO,
        PotentialField::ConstantForce { f_z } => Vec2::new(0.0, f_z),
        PotentialField::GaussianBarrier { v0, z_b, d } => {
            let u = (r.z - z_b) / d;
            Vec2::new(0.0, v0 * (-2.0 * u * u).exp() * (-4.0 * u / d))
        }
        PotentialField::LogisticStep { v0, z_s, alpha, width } => {
            let e = (-alpha * (r.z - z_s) / width).exp();
            let denom = 1.0 + e;
            Vec2::new(0.0, v0 * alpha / width * e / (denom * denom))
        }
        PotentialField::Harmonic { m_omega_sq } => Vec2::new(0.0, m_omega_sq * r.z),
        PotentialField::LensLike { v_l, z1, z2, width } => {
            let (s, ds) = lens_profile(z1, z2, r.z);
            let xw = r.x / width;
            Vec2::new(2.0 * v_l * s * xw / width, v_l * ds * xw * xw)
        }
    }
}

/// Transverse refractive-index landscape for the classical regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RefractiveIndexField {
    /// `n = n0` everywhere.
    Uniform { n0: f64 },
    /// Graded profile `n^2(x) = n0^2 (1 - grad_scale * (x / width)^2)`;
    /// the caller keeps the domain inside `n > 0`.
    RadialParabolic { n0: f64, grad_scale: f64, width: f64 },
}

/// Index value `n(r)`.
pub fn eval_index(field: &RefractiveIndexField, r: Vec2) -> f64 {
    eval_index_squared(field, r).sqrt()
}

/// `n^2(r)`; the quantity the ray equations differentiate.
pub fn eval_index_squared(field: &RefractiveIndexField, r: Vec2) -> f64 {
    match *field {
        RefractiveIndexField::Uniform { n0 } => n0 * n0,
        RefractiveIndexField::RadialParabolic { n0, grad_scale, width } => {
            let xw = r.x / width;
            n0 * n0 * (1.0 - grad_scale * xw * xw)
        }
    }
}

/// Exact gradient of `n^2(r)`.
pub fn eval_index_gradient(field: &RefractiveIndexField, r: Vec2) -> Vec2 {
    match *field {
        RefractiveIndexField::Uniform { .. } => Vec2::ZERO,
        RefractiveIndexField::RadialParabolic { n0, grad_scale, width } => {
            Vec2::new(-2.0 * n0 * n0 * grad_scale * r.x / (width * width), 0.0)
        }
    }
}

/// First axial crossing of `V(0, z) = energy` at or beyond `z_start`, found by
/// bisection to 1e-12 relative tolerance. Returns `None` when the potential
/// never reaches `energy` along the axis (e.g. a barrier lower than the beam
/// energy), so no classical turning point exists.
pub fn classical_turning_point(
    field: &PotentialField,
    energy: f64,
    z_start: f64,
) -> Option<f64> {
    let v = |z: f64| eval_potential(field, Vec2::new(0.0, z));
    // Bracket the crossing using the closed-form structure of each field.
    let (mut lo, mut hi) = match *field {
        PotentialField::Free | PotentialField::LensLike { .. } => return None,
        PotentialField::ConstantForce { f_z } => {
            if f_z <= 0.0 || energy <= 0.0 {
                return None;
            }
            (z_start, energy / f_z + 1.0)
        }
        PotentialField::GaussianBarrier { v0, z_b, .. } => {
            if energy > v0 {
                return None;
            }
            if energy == v0 {
                return Some(z_b);
            }
            (z_start, z_b)
        }
        PotentialField::LogisticStep { v0, z_s, alpha, width } => {
            if energy >= v0 {
                return None;
            }
            (z_start, z_s + 50.0 * width / alpha)
        }
        PotentialField::Harmonic { m_omega_sq } => {
            if m_omega_sq <= 0.0 || energy <= 0.0 {
                return None;
            }
            (z_start, (2.0 * energy / m_omega_sq).sqrt() * 1.5 + 1.0)
        }
    };
    if v(lo) >= energy {
        return Some(lo);
    }
    if v(hi) < energy {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if v(mid) < energy {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-12 * hi.abs().max(1.0) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}
