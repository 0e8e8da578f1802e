//! Group-commutator recursion.

use nalgebra::Vector3;
use thiserror::Error;

use qcomp_core::gateset::{evaluate, GateSequence};
use qcomp_core::linalg::{fidelity_distance, rotation_axis_angle, su2_to_bloch, UnitaryGate};

use crate::net::EpsilonNet;

/// Largest fidelity distance from the identity accepted by [`gc_decompose`].
pub const GC_MAX_DISTANCE: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkError {
    #[error("residual too far from identity for a group commutator (distance {0:.4})")]
    TooFar(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkResult {
    pub sequence: GateSequence,
    pub achieved_distance: f64,
    pub recursion_level: usize,
    /// Some commutator step was rejected and the lower-level result kept.
    pub fallback: bool,
}

/// Axis and angle of a unitary viewed as a Bloch rotation, angle in `[0, π]`.
fn axis_angle(u: &UnitaryGate) -> (Vector3<f64>, f64) {
    rotation_axis_angle(&su2_to_bloch(u))
}

/// Rotation mapping unit vector `from` to unit vector `to`.
fn align(from: &Vector3<f64>, to: &Vector3<f64>) -> UnitaryGate {
    let cross = from.cross(to);
    let cos = from.dot(to).clamp(-1.0, 1.0);
    if cross.norm() < 1e-12 {
        if cos > 0.0 {
            return UnitaryGate::identity();
        }
        // antiparallel: π about any perpendicular axis
        let helper = if from.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        return UnitaryGate::rotation(&from.cross(&helper), std::f64::consts::PI);
    }
    UnitaryGate::rotation(&cross, cross.norm().atan2(cos))
}

/// Balanced group commutator: `V W V† W† = Δ` up to phase, with `V` and `W`
/// rotations by the same angle about orthogonal axes.
pub fn gc_decompose(delta: &UnitaryGate) -> Result<(UnitaryGate, UnitaryGate), SkError> {
    let dist = fidelity_distance(delta, &UnitaryGate::identity());
    if dist >= GC_MAX_DISTANCE {
        return Err(SkError::TooFar(dist));
    }
    let (axis, theta) = axis_angle(delta);
    if theta < 1e-15 {
        return Ok((UnitaryGate::identity(), UnitaryGate::identity()));
    }
    // sin(θ/2) = 2 sin²(φ/2) sqrt(1 - sin⁴(φ/2))
    let s = ((1.0 - (theta / 2.0).cos()) / 2.0).sqrt();
    let phi = 2.0 * s.sqrt().asin();
    let v = UnitaryGate::rotation(&Vector3::x(), phi);
    let w = UnitaryGate::rotation(&Vector3::y(), phi);
    let comm = v.mul(&w).mul(&v.adjoint()).mul(&w.adjoint());
    let (comm_axis, _) = axis_angle(&comm);
    let s = align(&comm_axis, &axis);
    let conj = |g: &UnitaryGate| s.mul(g).mul(&s.adjoint());
    Ok((conj(&v), conj(&w)))
}

/// Level-0 lookup: the nearest net entry.
pub fn base_approx(net: &EpsilonNet, target: &UnitaryGate) -> (GateSequence, UnitaryGate) {
    let e = net.nearest(target);
    (e.sequence.clone(), e.unitary)
}

fn recurse(net: &EpsilonNet, target: &UnitaryGate, level: usize, fallback: &mut bool) -> GateSequence {
    if level == 0 {
        return base_approx(net, target).0;
    }
    let prev = recurse(net, target, level - 1, fallback);
    let prev_u = evaluate(&prev);
    let delta = target.mul(&prev_u.adjoint());
    let (v, w) = match gc_decompose(&delta) {
        Ok(vw) => vw,
        Err(_) => {
            *fallback = true;
            return prev;
        }
    };
    let vs = recurse(net, &v, level - 1, fallback);
    let ws = recurse(net, &w, level - 1, fallback);
    // V W V† W† U_prev in circuit order
    prev.then(&ws.inverse())
        .then(&vs.inverse())
        .then(&ws)
        .then(&vs)
}

pub fn sk_compile(net: &EpsilonNet, target: &UnitaryGate, level: usize) -> SkResult {
    let mut fallback = false;
    let sequence = recurse(net, target, level, &mut fallback);
    let achieved_distance = fidelity_distance(&evaluate(&sequence), target);
    SkResult {
        sequence,
        achieved_distance,
        recursion_level: level,
        fallback,
    }
}
