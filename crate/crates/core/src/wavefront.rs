//! The coupled ray ensemble: front construction, transverse derivative
//! estimation, the wave potential with its tangential force, and amplitude
//! transport along ray tubes.
//!
//! A front is an ordered polyline of rays. Everything the coupling needs is
//! estimated from the amplitudes sampled on that polyline: local least-squares
//! quadratic fits of `ln R` against the signed front arclength `xi` give the
//! first and second derivatives, from which the curvature ratio `R''/R`, the
//! wave potential, and its tangential gradient follow. Amplitudes themselves
//! are never integrated: each ray carries the flux constant `R^2 |p| Delta`
//! captured at launch, and `R` is recomputed from it after every move, so the
//! flux law holds by construction.
//!
//! All quantities here are internal units: lengths in `w0`, momenta in `p0`,
//! and the wave potential in the regime's declared energy unit.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::SimError;
use crate::model::{
    NumericsConfig, RegimeInternal, Vec2, AMPLITUDE_FLOOR, EDGE_EXCLUDED_PER_SIDE, STALL_RATIO,
};

/// The longitudinal projection degenerated for this ray (momentum nearly
/// transverse, or its front segment nearly axial); its curvature ratio is
/// frozen at the last valid value.
pub const FLAG_STALL: u32 = 1 << 0;
/// Amplitude transport clamped `|p|` at its lower bound this run.
pub const FLAG_PMAG_CLAMP: u32 = 1 << 1;
/// Amplitude fell below the relative floor; the ray is excluded from fits and
/// its wave potential is copied from the nearest fitted ray.
pub const FLAG_FLOOR: u32 = 1 << 2;
/// Outermost rays whose one-sided fits feel the front truncation; excluded
/// from beam metrics.
pub const FLAG_EDGE: u32 = 1 << 3;

/// One ray of the front. Positions in `w0`, momenta in `p0`, wave potential in
/// the declared energy unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayState {
    pub r: Vec2,
    pub p: Vec2,
    /// Real amplitude `R`, normalized so the launch maximum is 1.
    pub amplitude: f64,
    /// Declared-unit wave potential from the most recent estimation stage.
    pub wave_potential: f64,
    /// `R^2 |p| Delta` captured at launch and never rewritten.
    pub flux_const: f64,
    /// Signed arclength along the front, zero at the axis ray.
    pub xi: f64,
    /// Sticky diagnostic bits (`FLAG_*`).
    pub flags: u32,
}

/// An ordered ray bundle plus the per-ray freeze store used when the
/// longitudinal projection stalls.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFront {
    pub rays: Vec<RayState>,
    /// Last valid curvature ratio per ray.
    pub frozen_l: Vec<f64>,
    pub has_frozen: Vec<bool>,
}

impl WaveFront {
    pub fn n(&self) -> usize {
        self.rays.len()
    }

    /// Index of the axis ray (the count is validated odd).
    pub fn axis_index(&self) -> usize {
        self.rays.len() / 2
    }

    pub fn xis(&self) -> Vec<f64> {
        self.rays.iter().map(|r| r.xi).collect()
    }
}

/// One Gaussian term of the launch profile, in internal (`w0`) units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianComponent {
    pub center: f64,
    /// 1/e half-width of the amplitude; 1.0 is the standard launch waist.
    pub waist: f64,
    pub weight: f64,
}

impl GaussianComponent {
    pub fn centered() -> Self {
        GaussianComponent { center: 0.0, waist: 1.0, weight: 1.0 }
    }
}

/// Per-ray tube half-widths `Delta`: half the distance between the two
/// neighbors for interior rays, one-sided at the ends.
pub fn ray_spacings(xi: &[f64]) -> Vec<f64> {
    let n = xi.len();
    let mut delta = vec![0.0; n];
    if n < 2 {
        return delta;
    }
    delta[0] = xi[1] - xi[0];
    delta[n - 1] = xi[n - 1] - xi[n - 2];
    for i in 1..n - 1 {
        delta[i] = 0.5 * (xi[i + 1] - xi[i - 1]);
    }
    delta
}

/// Places `n_rays` rays uniformly over `[-front_half_width, front_half_width]`
/// at `z = 0`, with amplitude the weighted sum of the Gaussian components
/// normalized to a maximum of 1, common launch momentum `p_launch`, `xi`
/// equal to the transverse coordinate, edge flags on the outermost rays, and
/// the flux constant captured from the launch spacings.
pub fn init_gaussian_front(
    numerics: &NumericsConfig,
    components: &[GaussianComponent],
    p_launch: Vec2,
) -> WaveFront {
    let n = numerics.n_rays;
    let center = (n / 2) as isize;
    let spacing = 2.0 * numerics.front_half_width / (n - 1) as f64;
    let mut rays = Vec::with_capacity(n);
    for i in 0..n {
        // Offsets are built from exact integer multiples so the grid is
        // bitwise mirror-symmetric about the axis ray.
        let x = (i as isize - center) as f64 * spacing;
        let mut amplitude = 0.0;
        for c in components {
            let u = (x - c.center) / c.waist;
            amplitude += c.weight * (-u * u).exp();
        }
        let mut flags = 0;
        if i < EDGE_EXCLUDED_PER_SIDE || i >= n - EDGE_EXCLUDED_PER_SIDE {
            flags |= FLAG_EDGE;
        }
        rays.push(RayState {
            r: Vec2::new(x, 0.0),
            p: p_launch,
            amplitude,
            wave_potential: 0.0,
            flux_const: 0.0,
            xi: x,
            flags,
        });
    }
    let max_r = rays.iter().map(|r| r.amplitude).fold(0.0, f64::max);
    for ray in &mut rays {
        ray.amplitude /= max_r;
    }
    let delta = ray_spacings(&rays.iter().map(|r| r.xi).collect::<Vec<_>>());
    let pmag = p_launch.norm();
    for (ray, &d) in rays.iter_mut().zip(&delta) {
        ray.flux_const = ray.amplitude * ray.amplitude * pmag * d;
    }
    WaveFront { frozen_l: vec![0.0; n], has_frozen: vec![false; n], rays }
}

/// Least-squares quadratic fit of `y(xi)` over the given samples, evaluated at
/// `x0`. Returns `(value, dy/dxi, d2y/dxi2)` at `x0`, or `None` when the
/// abscissas are degenerate. The fit abscissas are centered and rescaled to
/// `[-1, 1]` for conditioning, so a profile that is exactly quadratic in `xi`
/// is reproduced to near machine precision on any monotone grid.
///
/// Accumulation order is canonicalized by the sign of `x0`: fits at mirrored
/// expansion points visit exactly negated abscissas in the same sequence, so
/// their moment sums — and hence the fitted value, slope, and curvature —
/// come out bitwise equal, negated, and equal respectively. A fit at
/// `x0 = 0` accumulates outward from the middle sample in two-sided pairs,
/// which cancels the odd moments bit-for-bit on a symmetric window and makes
/// the fitted slope of even data exactly zero. Without this, a mirror pair
/// of windows sums the same numbers in opposite orders, and the ulp-level
/// chirality of those roundings seeds a beam asymmetry that the
/// spacing-fit-force feedback loop then amplifies by orders of magnitude.
pub fn fit_quadratic(xi: &[f64], y: &[f64], x0: f64) -> Option<(f64, f64, f64)> {
    debug_assert_eq!(xi.len(), y.len());
    let n = xi.len();
    if n < 3 {
        return None;
    }
    let h = xi.iter().map(|&x| (x - x0).abs()).fold(0.0, f64::max);
    if !(h > 0.0) {
        return None;
    }
    let inv = 1.0 / h;
    let mut s = [0.0; 5];
    let mut t = [0.0; 3];
    let one = |i: usize, s: &mut [f64; 5], t: &mut [f64; 3]| {
        let u = (xi[i] - x0) * inv;
        let u2 = u * u;
        s[1] += u;
        s[2] += u2;
        s[3] += u2 * u;
        s[4] += u2 * u2;
        t[0] += y[i];
        t[1] += u * y[i];
        t[2] += u2 * y[i];
    };
    if x0 > 0.0 {
        for i in 0..n {
            one(i, &mut s, &mut t);
        }
    } else if x0 < 0.0 {
        for i in (0..n).rev() {
            one(i, &mut s, &mut t);
        }
    } else if n % 2 == 1 {
        let mid = n / 2;
        one(mid, &mut s, &mut t);
        for j in 1..=mid {
            let (ul, ur) = ((xi[mid - j] - x0) * inv, (xi[mid + j] - x0) * inv);
            let (ul2, ur2) = (ul * ul, ur * ur);
            let (yl, yr) = (y[mid - j], y[mid + j]);
            s[1] += ul + ur;
            s[2] += ul2 + ur2;
            s[3] += ul2 * ul + ur2 * ur;
            s[4] += ul2 * ul2 + ur2 * ur2;
            t[0] += yl + yr;
            t[1] += ul * yl + ur * yr;
            t[2] += ul2 * yl + ur2 * yr;
        }
    } else {
        for i in 0..n {
            one(i, &mut s, &mut t);
        }
    }
    s[0] = n as f64;
    let a = solve3(
        [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]],
        [t[0], t[1], t[2]],
    )?;
    Some((a[0], a[1] * inv, 2.0 * a[2] * inv * inv))
}

/// 3x3 linear solve with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let mut piv = col;
        for row in col + 1..3 {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < 1e-200 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let mut s = b[i];
        for k in i + 1..3 {
            s -= a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

/// Indices (inclusive) of the window of up to `2*half + 1` samples nearest to
/// `xi[k]` on an ascending grid, always containing `k`. Exact distance ties
/// extend toward `xi = 0`, and alternate sides for the ray at zero itself, so
/// rays at mirrored `xi` build mirrored windows. Ties are routine rather than
/// exceptional: a launch grid is uniform, and a freely spreading beam keeps
/// it uniform to rounding, so a fixed tie side would hand mirrored rays
/// chirally different stencils whose fit difference is set by truncation
/// error, not rounding, and a mirror-symmetric beam would shed its symmetry
/// orders of magnitude faster than roundoff alone allows.
fn nearest_window(xi: &[f64], k: usize, half: usize) -> (usize, usize) {
    let target = 2 * half + 1;
    let (mut lo, mut hi) = (k, k);
    while hi - lo + 1 < target && (lo > 0 || hi + 1 < xi.len()) {
        let dl = if lo > 0 { xi[k] - xi[lo - 1] } else { f64::INFINITY };
        let dr = if hi + 1 < xi.len() { xi[hi + 1] - xi[k] } else { f64::INFINITY };
        let go_left = if dl != dr {
            dl < dr
        } else if xi[k] != 0.0 {
            xi[k] > 0.0
        } else {
            (hi - k) > (k - lo)
        };
        if go_left {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    (lo, hi)
}

/// Everything the dynamics stage needs from one estimation pass, indexed by
/// ray.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveQuantities {
    /// Curvature ratio `R''/R` after projection (and stall freezing).
    pub laplacian: Vec<f64>,
    /// Declared-unit wave potential.
    pub w_declared: Vec<f64>,
    /// Declared-unit tangential gradient `dW/dxi` (zero for floored rays).
    pub dw_dxi: Vec<f64>,
}

impl WaveQuantities {
    fn zeros(n: usize) -> Self {
        WaveQuantities { laplacian: vec![0.0; n], w_declared: vec![0.0; n], dw_dxi: vec![0.0; n] }
    }
}

/// One full estimation stage over a frozen front.
///
/// Pipeline: classify rays against the relative amplitude floor; fit `ln R`
/// over the usable rays to get `g1 = (ln R)'` and `g2 = (ln R)''`; form the
/// projected curvature ratio `L = proj * (g2 + g1^2)`, where `proj` converts
/// front-tangential curvature into transverse curvature. By default `proj`
/// is the squared secant `1 + (dz/dx)^2` of the local front slope, measured
/// from neighbouring ray positions (centred where possible, one-sided at the
/// ends); it equals the momentum ratio `(|p|/p_z)^2` wherever rays run
/// perpendicular to the front, but stays bounded while a beam reverses its
/// axial direction, where the momentum ratio diverges even though the front
/// itself remains transverse. The literal momentum-based variant
/// `(p_x/p_z)^2` sits behind `strict_paper_eq29`. `L` freezes at its last
/// valid value for rays whose `|p_z|/|p|` falls below the stall threshold,
/// or (default variant) whose front segment turns axial by the same ratio;
/// convert to the declared-unit wave potential
/// `W = -w_declared_coeff * L`; and fit `W(xi)` once more for the tangential
/// gradient. Floored rays copy `W` from the nearest fitted ray and feel no
/// tangential force.
///
/// Updates each ray's `wave_potential` (and the freeze store / flags) in
/// place. In eikonal mode the coupling is dropped entirely and every output is
/// zero.
pub fn wave_stage(
    front: &mut WaveFront,
    internal: &RegimeInternal,
    numerics: &NumericsConfig,
) -> Result<WaveQuantities, SimError> {
    let n = front.n();
    if numerics.eikonal_mode {
        for ray in &mut front.rays {
            ray.wave_potential = 0.0;
        }
        return Ok(WaveQuantities::zeros(n));
    }

    let max_r = front.rays.iter().map(|r| r.amplitude).fold(0.0, f64::max);
    if !(max_r > 0.0) || !max_r.is_finite() {
        return Err(SimError::AmplitudeUnderflow);
    }
    let floor = AMPLITUDE_FLOOR * max_r;
    let mut usable_idx = Vec::with_capacity(n);
    for (i, ray) in front.rays.iter_mut().enumerate() {
        if ray.amplitude >= floor {
            usable_idx.push(i);
        } else {
            ray.flags |= FLAG_FLOOR;
        }
    }
    if usable_idx.len() < 3 {
        let peak = front
            .rays
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.amplitude.total_cmp(&b.1.amplitude))
            .map(|(i, _)| i)
            .unwrap_or(0);
        return Err(SimError::WindowTooSmall { ray: peak, usable: usable_idx.len() });
    }

    let xi_u: Vec<f64> = usable_idx.iter().map(|&i| front.rays[i].xi).collect();
    let lnr_u: Vec<f64> = usable_idx.iter().map(|&i| front.rays[i].amplitude.ln()).collect();
    let windows: Vec<(usize, usize)> =
        (0..usable_idx.len()).map(|k| nearest_window(&xi_u, k, numerics.fit_window)).collect();

    // First pass: derivatives of ln R at each usable ray.
    let derivs: Vec<Result<(f64, f64), SimError>> = windows
        .par_iter()
        .enumerate()
        .map(|(k, &(lo, hi))| {
            let count = hi - lo + 1;
            fit_quadratic(&xi_u[lo..=hi], &lnr_u[lo..=hi], xi_u[k])
                .map(|(_, g1, g2)| (g1, g2))
                .ok_or(SimError::WindowTooSmall { ray: usable_idx[k], usable: count })
        })
        .collect();

    // Default projection factor per ray: 1 + (dz/dx)^2 from the local front
    // slope, with `None` marking segments too axial (or too short) to divide
    // by. Uses full-front neighbours: floored rays still carry positions.
    let tilt: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let a = front.rays[i.saturating_sub(1)].r;
            let b = front.rays[(i + 1).min(n - 1)].r;
            let dx = b.x - a.x;
            let dz = b.z - a.z;
            let len = dx.hypot(dz);
            if !(len > 0.0) || dx.abs() < STALL_RATIO * len {
                None
            } else {
                let slope = dz / dx;
                Some(1.0 + slope * slope)
            }
        })
        .collect();

    let mut out = WaveQuantities::zeros(n);
    for (k, &i) in usable_idx.iter().enumerate() {
        let (g1, g2) = derivs[k].clone()?;
        let p = front.rays[i].p;
        let pmag = p.norm();
        let p_stalled = !(pmag > 0.0) || p.z.abs() < STALL_RATIO * pmag;
        let stalled =
            if numerics.strict_paper_eq29 { p_stalled } else { p_stalled || tilt[i].is_none() };
        let l = if stalled {
            front.rays[i].flags |= FLAG_STALL;
            if front.has_frozen[i] {
                front.frozen_l[i]
            } else {
                0.0
            }
        } else {
            let proj = if numerics.strict_paper_eq29 {
                let ratio = p.x / p.z;
                ratio * ratio
            } else {
                tilt[i].expect("degenerate tilt takes the stall branch")
            };
            let l = proj * (g2 + g1 * g1);
            front.frozen_l[i] = l;
            front.has_frozen[i] = true;
            l
        };
        out.laplacian[i] = l;
        out.w_declared[i] = -internal.w_declared_coeff * l;
    }

    // Floored rays: copy the wave potential of the nearest fitted ray so their
    // recorded energy stays meaningful; they feel no tangential force.
    for i in 0..n {
        if front.rays[i].amplitude < floor {
            let xi = front.rays[i].xi;
            // Distance ties broken toward the axis, so floored rays at
            // mirrored positions copy from mirrored donors.
            let side = if xi >= 0.0 { 1.0 } else { -1.0 };
            let nearest = *usable_idx
                .iter()
                .min_by(|&&a, &&b| {
                    let da = (front.rays[a].xi - xi).abs();
                    let db = (front.rays[b].xi - xi).abs();
                    da.total_cmp(&db).then_with(|| {
                        (side * front.rays[a].xi).total_cmp(&(side * front.rays[b].xi))
                    })
                })
                .expect("usable set is non-empty");
            out.laplacian[i] = out.laplacian[nearest];
            out.w_declared[i] = out.w_declared[nearest];
        }
    }

    // Second pass: tangential gradient of the declared wave potential over the
    // same windows.
    let w_u: Vec<f64> = usable_idx.iter().map(|&i| out.w_declared[i]).collect();
    let grads: Vec<Result<f64, SimError>> = windows
        .par_iter()
        .enumerate()
        .map(|(k, &(lo, hi))| {
            let count = hi - lo + 1;
            fit_quadratic(&xi_u[lo..=hi], &w_u[lo..=hi], xi_u[k])
                .map(|(_, dw, _)| dw)
                .ok_or(SimError::WindowTooSmall { ray: usable_idx[k], usable: count })
        })
        .collect();
    for (k, &i) in usable_idx.iter().enumerate() {
        out.dw_dxi[i] = grads[k].clone()?;
    }

    for (i, ray) in front.rays.iter_mut().enumerate() {
        ray.wave_potential = out.w_declared[i];
    }
    Ok(out)
}

/// First neighbor pair whose front ordering folded or whose spacing fell to
/// the caustic threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausticReport {
    pub i: usize,
    pub j: usize,
    pub spacing: f64,
}

/// Rebuilds the signed arclength `xi` from the current ray polyline, measured
/// from the axis ray. Each increment is the segment length signed by its
/// projection on the front's end-to-end chord, so a fold (neighbors crossing)
/// shows up as a non-positive increment rather than silently re-ordering the
/// front. Anchoring the orientation to the chord — the front's own geometry —
/// keeps `xi` stable when the whole beam reverses direction (every momentum
/// flips at a turning point, but the polyline ordering does not).
pub fn recompute_xi(front: &mut WaveFront) {
    let n = front.n();
    let c = front.axis_index();
    let inc = xi_increments(front);
    front.rays[c].xi = 0.0;
    for i in c + 1..n {
        front.rays[i].xi = front.rays[i - 1].xi + inc[i - 1];
    }
    for i in (0..c).rev() {
        front.rays[i].xi = front.rays[i + 1].xi - inc[i];
    }
}

fn xi_increments(front: &WaveFront) -> Vec<f64> {
    let n = front.n();
    let mut inc = vec![0.0; n.saturating_sub(1)];
    if n < 2 {
        return inc;
    }
    // Orientation reference: the chord from the first to the last ray. A
    // degenerate chord (fully collapsed front) leaves all increments
    // positive; the spacing threshold reports the collapse instead.
    let chord = front.rays[n - 1].r.sub(front.rays[0].r);
    for i in 0..n - 1 {
        let seg = front.rays[i + 1].r.sub(front.rays[i].r);
        let sign = if seg.dot(chord) >= 0.0 { 1.0 } else { -1.0 };
        inc[i] = sign * seg.norm();
    }
    inc
}

/// Scans consecutive `xi` for a fold or a spacing at or below the threshold.
pub fn detect_caustic(front: &WaveFront, min_spacing: f64) -> Option<CausticReport> {
    for i in 0..front.n() - 1 {
        let spacing = front.rays[i + 1].xi - front.rays[i].xi;
        if spacing <= min_spacing {
            return Some(CausticReport { i, j: i + 1, spacing });
        }
    }
    None
}

/// Post-move update: rebuild `xi`, check for caustics, and recompute every
/// amplitude from its flux constant, `R = sqrt(flux / (|p| Delta))`, clamping
/// `|p|` at its lower bound (and flagging the ray) so turning points do not
/// divide by zero.
pub fn transport_amplitude(
    front: &mut WaveFront,
    min_spacing: f64,
) -> Result<(), CausticReport> {
    recompute_xi(front);
    if let Some(report) = detect_caustic(front, min_spacing) {
        return Err(report);
    }
    let delta = ray_spacings(&front.xis());
    for (ray, &d) in front.rays.iter_mut().zip(&delta) {
        let mut pmag = ray.p.norm();
        if pmag < crate::model::PMAG_CLAMP {
            pmag = crate::model::PMAG_CLAMP;
            ray.flags |= FLAG_PMAG_CLAMP;
        }
        ray.amplitude = (ray.flux_const / (pmag * d)).sqrt();
    }
    Ok(())
}

/// Largest relative drift of `R^2 |p| Delta` from the launch flux constant
/// over rays that never clamped `|p|`. Transport recomputes `R` from the flux
/// each step, so this measures only arithmetic noise — unless something
/// rewrote state it should sit at rounding level.
pub fn max_flux_deviation(front: &WaveFront) -> f64 {
    let delta = ray_spacings(&front.xis());
    let mut worst = 0.0_f64;
    for (ray, &d) in front.rays.iter().zip(&delta) {
        if ray.flags & FLAG_PMAG_CLAMP != 0 || !(ray.flux_const > 0.0) {
            continue;
        }
        let flux = ray.amplitude * ray.amplitude * ray.p.norm() * d;
        worst = worst.max((flux / ray.flux_const - 1.0).abs());
    }
    worst
}
