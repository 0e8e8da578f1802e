//! Fixed-size complex and real matrix helpers shared by every compiler stage.
//!
//! A single-qubit gate lives in U(2); its action on the Bloch ball is an
//! element of SO(3). The conversions here kill the global phase in one
//! direction and pick a canonical phase in the other.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Frobenius tolerance for `U U† = I`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance for `RᵀR = I` on Bloch maps.
pub const ORTHOGONAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not unitary (|UU† - I|_F = {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix is not orthogonal (|RᵀR - I|_F = {0:.3e})")]
    NotOrthogonal(f64),
    #[error("Bloch map has determinant -1; no unitary realizes it")]
    OrientationReversing,
    #[error("dimension mismatch: {0}x{0} vs {1}x{1}")]
    DimensionMismatch(usize, usize),
}

const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_x() -> Matrix2<C64> {
    Matrix2::new(c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.))
}

pub fn pauli_y() -> Matrix2<C64> {
    Matrix2::new(c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.))
}

pub fn pauli_z() -> Matrix2<C64> {
    Matrix2::new(c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.))
}

/// `[σx, σy, σz]`.
pub fn paulis() -> [Matrix2<C64>; 3] {
    [pauli_x(), pauli_y(), pauli_z()]
}

/// A 2×2 unitary matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitaryGate(Matrix2<C64>);

impl UnitaryGate {
    pub fn new(m: Matrix2<C64>) -> Result<Self, LinalgError> {
        let dev = (m * m.adjoint() - Matrix2::identity()).norm();
        if dev > UNITARY_TOL || !dev.is_finite() {
            return Err(LinalgError::NotUnitary(dev));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix already known to be unitary (products of unitaries).
    pub fn from_matrix_unchecked(m: Matrix2<C64>) -> Self {
        Self(m)
    }

    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &UnitaryGate) -> Self {
        Self(self.0 * rhs.0)
    }

    pub fn scale_phase(&self, phase: f64) -> Self {
        Self(self.0 * C64::from_polar(1.0, phase))
    }

    /// `exp(-i θ/2 n·σ)` for a unit axis `n`.
    pub fn rotation(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.normalize();
        let (s, cs) = (angle / 2.0).sin_cos();
        let [x, y, z] = paulis();
        let gen = x * c(n[0], 0.) + y * c(n[1], 0.) + z * c(n[2], 0.);
        Self(Matrix2::identity() * c(cs, 0.) - gen * c(0., s))
    }

    /// `|Tr(self · other†)|`.
    pub fn trace_overlap(&self, other: &UnitaryGate) -> f64 {
        let a = &self.0;
        let b = &other.0;
        // Tr(A B†) = Σ_ij A_ij conj(B_ij)
        (a[(0, 0)] * b[(0, 0)].conj()
            + a[(0, 1)] * b[(0, 1)].conj()
            + a[(1, 0)] * b[(1, 0)].conj()
            + a[(1, 1)] * b[(1, 1)].conj())
        .norm()
    }

    /// Real and imaginary parts, row-major: `[re00, im00, re01, im01, re10, im10, re11, im11]`.
    pub fn to_reals(&self) -> [f64; 8] {
        let m = &self.0;
        [
            m[(0, 0)].re,
            m[(0, 0)].im,
            m[(0, 1)].re,
            m[(0, 1)].im,
            m[(1, 0)].re,
            m[(1, 0)].im,
            m[(1, 1)].re,
            m[(1, 1)].im,
        ]
    }

    pub fn from_reals(v: &[f64; 8]) -> Result<Self, LinalgError> {
        Self::new(Matrix2::new(
            c(v[0], v[1]),
            c(v[2], v[3]),
            c(v[4], v[5]),
            c(v[6], v[7]),
        ))
    }
}

/// Orthogonal 3×3 map acting on Bloch vectors. Either orientation is allowed;
/// only proper rotations come from unitaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochRotation(Matrix3<f64>);

impl BlochRotation {
    pub fn new(m: Matrix3<f64>) -> Result<Self, LinalgError> {
        let dev = (m.transpose() * m - Matrix3::identity()).norm();
        if dev > ORTHOGONAL_TOL || !dev.is_finite() {
            return Err(LinalgError::NotOrthogonal(dev));
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// `det(R)` rounded to ±1.
    pub fn orientation(&self) -> i8 {
        if self.0.determinant() >= 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn mul(&self, rhs: &BlochRotation) -> Self {
        Self(self.0 * rhs.0)
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Rotation by `angle` about `axis` (right-hand rule).
    pub fn about_axis(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.normalize();
        let (s, cs) = angle.sin_cos();
        let k = Matrix3::new(0.0, -n[2], n[1], n[2], 0.0, -n[0], -n[1], n[0], 0.0);
        Self(Matrix3::identity() * cs + k * s + n * n.transpose() * (1.0 - cs))
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(v: &[f64; 9]) -> Result<Self, LinalgError> {
        Self::new(Matrix3::from_row_slice(v))
    }
}

/// Average-gate-fidelity distance `1 - (|Tr(U V†)|² + d) / (d(d+1))`.
pub fn fidelity_distance(u: &UnitaryGate, v: &UnitaryGate) -> f64 {
    let t = u.trace_overlap(v);
    (1.0 - (t * t + 2.0) / 6.0).max(0.0)
}

/// Dense variant for arbitrary dimension (used for multi-mode checks).
pub fn fidelity_distance_dense(u: &DMatrix<C64>, v: &DMatrix<C64>) -> Result<f64, LinalgError> {
    if u.nrows() != v.nrows() || u.ncols() != v.ncols() {
        return Err(LinalgError::DimensionMismatch(u.nrows(), v.nrows()));
    }
    let d = u.nrows() as f64;
    let t = (u * v.adjoint()).trace().norm();
    Ok((1.0 - (t * t + d) / (d * (d + 1.0))).max(0.0))
}

/// Phase-invariant Frobenius distance `min_φ |U - e^{iφ}V|_F = sqrt(4 - 2|Tr(UV†)|)`.
///
/// A metric on U(2)/U(1), monotone in [`fidelity_distance`].
///
/// Evaluated as `|U - e^{iφ*}V|_F` at the optimal phase, which keeps full
/// precision for nearby gates.
pub fn phase_invariant_distance(u: &UnitaryGate, v: &UnitaryGate) -> f64 {
    let (a, b) = (&u.0, &v.0);
    let t: C64 = a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum();
    if t.norm() == 0.0 {
        return 2.0;
    }
    let phase = t / t.norm();
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y * phase).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `R_ij = ½ Tr[σ_i U σ_j U†]`.
pub fn su2_to_bloch(u: &UnitaryGate) -> BlochRotation {
    let p = paulis();
    let m = u.matrix();
    let md = m.adjoint();
    let mut r = Matrix3::zeros();
    for j in 0..3 {
        let conj = m * p[j] * md;
        for i in 0..3 {
            r[(i, j)] = 0.5 * (p[i] * conj).trace().re;
        }
    }
    BlochRotation(r)
}

/// Unit quaternion `(w, x, y, z)` with `w ≥ 0` for a proper rotation.
fn rotation_to_quaternion(r: &Matrix3<f64>) -> [f64; 4] {
    let tr = r.trace();
    let candidates = [tr, r[(0, 0)], r[(1, 1)], r[(2, 2)]];
    let mut best = 0;
    for k in 1..4 {
        if candidates[k] > candidates[best] {
            best = k;
        }
    }
    let q = match best {
        0 => {
            let s = (1.0 + tr).max(0.0).sqrt() * 2.0;
            [
                0.25 * s,
                (r[(2, 1)] - r[(1, 2)]) / s,
                (r[(0, 2)] - r[(2, 0)]) / s,
                (r[(1, 0)] - r[(0, 1)]) / s,
            ]
        }
        1 => {
            let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).max(0.0).sqrt() * 2.0;
            [
                (r[(2, 1)] - r[(1, 2)]) / s,
                0.25 * s,
                (r[(0, 1)] + r[(1, 0)]) / s,
                (r[(0, 2)] + r[(2, 0)]) / s,
            ]
        }
        2 => {
            let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).max(0.0).sqrt() * 2.0;
            [
                (r[(0, 2)] - r[(2, 0)]) / s,
                (r[(0, 1)] + r[(1, 0)]) / s,
                0.25 * s,
                (r[(1, 2)] + r[(2, 1)]) / s,
            ]
        }
        _ => {
            let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).max(0.0).sqrt() * 2.0;
            [
                (r[(1, 0)] - r[(0, 1)]) / s,
                (r[(0, 2)] + r[(2, 0)]) / s,
                (r[(1, 2)] + r[(2, 1)]) / s,
                0.25 * s,
            ]
        }
    };
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
    q.map(|v| sign * v / norm)
}

/// Axis and angle in `[0, π]` of a proper rotation. The axis is arbitrary
/// (`z`) when the angle vanishes.
pub fn rotation_axis_angle(r: &BlochRotation) -> (Vector3<f64>, f64) {
    let [w, x, y, z] = rotation_to_quaternion(&r.0);
    let v = Vector3::new(x, y, z);
    let s = v.norm();
    let angle = 2.0 * s.atan2(w);
    if s < 1e-15 {
        (Vector3::z(), 0.0)
    } else {
        (v / s, angle)
    }
}

/// Inverse of [`su2_to_bloch`] with canonical phase: top-left entry real
/// nonnegative, or bottom-left when the top-left vanishes.
pub fn bloch_to_su2(r: &BlochRotation) -> Result<UnitaryGate, LinalgError> {
    if r.orientation() < 0 {
        return Err(LinalgError::OrientationReversing);
    }
    let [w, x, y, z] = rotation_to_quaternion(&r.0);
    // U = w I - i (x X + y Y + z Z)
    let m = Matrix2::new(c(w, -z), c(-y, -x), c(y, -x), c(w, z));
    let anchor = if m[(0, 0)].norm() >= 1e-12 {
        m[(0, 0)]
    } else {
        m[(1, 0)]
    };
    let phase = -anchor.arg();
    Ok(UnitaryGate(m * C64::from_polar(1.0, phase)))
}

/// Index (row-major) of the entry with largest magnitude; near-ties resolved
/// toward the first index so noise cannot flip the choice.
fn dominant_entry(m: &Matrix2<C64>) -> (usize, usize) {
    let idx = [(0, 0), (0, 1), (1, 0), (1, 1)];
    let max = idx.iter().map(|&ij| m[ij].norm()).fold(0.0, f64::max);
    *idx
        .iter()
        .find(|&&ij| m[ij].norm() >= max - 1e-9)
        .expect("max is attained")
}

/// Multiply by the global phase that makes the largest-magnitude entry real
/// nonnegative.
pub fn phase_normalize(u: &UnitaryGate) -> UnitaryGate {
    let ij = dominant_entry(&u.0);
    let phase = -u.0[ij].arg();
    let mut m = u.0 * C64::from_polar(1.0, phase);
    m[ij] = c(m[ij].norm(), 0.0);
    UnitaryGate(m)
}

/// Haar-random 2×2 unitary from four Gaussian samples.
pub fn haar_unitary<R: rand::Rng + ?Sized>(rng: &mut R) -> UnitaryGate {
    use rand_distr::{Distribution, StandardNormal};
    let g: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = g.map(|v| v / n);
    let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let m = Matrix2::new(c(w, -z), c(-y, -x), c(y, -x), c(w, z));
    UnitaryGate(m * C64::from_polar(1.0, phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn s_gate() -> UnitaryGate {
        UnitaryGate::new(Matrix2::new(c(1., 0.), c(0., 0.), c(0., 0.), c(0., 1.))).unwrap()
    }

    fn hadamard() -> UnitaryGate {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        UnitaryGate::new(Matrix2::new(c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.))).unwrap()
    }

    /// Haar-random pure state.
    fn random_state(rng: &mut ChaCha8Rng) -> nalgebra::Vector2<C64> {
        let u = haar_unitary(rng);
        u.matrix().column(0).into_owned()
    }

    /// Monte-Carlo estimate of ∫ dψ |⟨ψ|U V†|ψ⟩|².
    fn mc_fidelity(u: &UnitaryGate, v: &UnitaryGate, samples: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = u.matrix() * v.matrix().adjoint();
        let mut acc = 0.0;
        for _ in 0..samples {
            let psi = random_state(&mut rng);
            let amp = (psi.adjoint() * w * psi)[(0, 0)];
            acc += amp.norm_sqr();
        }
        acc / samples as f64
    }

    #[test]
    fn distance_to_self_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let u = haar_unitary(&mut rng);
            assert!(fidelity_distance(&u, &u) < 1e-14);
        }
    }

    #[test]
    fn identity_vs_pauli_x() {
        let x = UnitaryGate::new(pauli_x()).unwrap();
        let i = UnitaryGate::identity();
        assert!((fidelity_distance(&i, &x) - 2.0 / 3.0).abs() < 1e-14);
        let mc = 1.0 - mc_fidelity(&i, &x, 100_000);
        assert!((mc - 2.0 / 3.0).abs() < 1e-2, "monte carlo {mc}");
    }

    #[test]
    fn identity_vs_s_gate() {
        let i = UnitaryGate::identity();
        assert!((fidelity_distance(&i, &s_gate()) - 1.0 / 3.0).abs() < 1e-14);
        let mc = 1.0 - mc_fidelity(&i, &s_gate(), 100_000);
        assert!((mc - 1.0 / 3.0).abs() < 1e-2, "monte carlo {mc}");
    }

    #[test]
    fn monte_carlo_agrees_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let u = haar_unitary(&mut rng);
            let v = haar_unitary(&mut rng);
            let mc = 1.0 - mc_fidelity(&u, &v, 100_000);
            assert!((mc - fidelity_distance(&u, &v)).abs() < 1e-2);
        }
    }

    #[test]
    fn dense_distance_rejects_mismatch() {
        let a = DMatrix::<C64>::identity(2, 2);
        let b = DMatrix::<C64>::identity(4, 4);
        assert_eq!(
            fidelity_distance_dense(&a, &b),
            Err(LinalgError::DimensionMismatch(2, 4))
        );
        assert!(fidelity_distance_dense(&b, &b).unwrap() < 1e-15);
    }

    #[test]
    fn rejects_non_unitary() {
        let m = Matrix2::new(c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.));
        assert!(matches!(UnitaryGate::new(m), Err(LinalgError::NotUnitary(_))));
    }

    #[test]
    fn bloch_of_identity_s_and_h() {
        let r = su2_to_bloch(&UnitaryGate::identity());
        assert!((r.matrix() - Matrix3::identity()).norm() < 1e-14);

        // S: x -> y, y -> -x, z -> z
        let r = su2_to_bloch(&s_gate());
        let expect = Matrix3::new(0., -1., 0., 1., 0., 0., 0., 0., 1.);
        assert!((r.matrix() - expect).norm() < 1e-14);
        assert_eq!(r.orientation(), 1);

        // H: x <-> z, y -> -y
        let r = su2_to_bloch(&hadamard());
        let expect = Matrix3::new(0., 0., 1., 0., -1., 0., 1., 0., 0.);
        assert!((r.matrix() - expect).norm() < 1e-14);
    }

    #[test]
    fn bloch_to_su2_examples() {
        let u = bloch_to_su2(&BlochRotation::identity()).unwrap();
        assert!((u.matrix() - Matrix2::identity()).norm() < 1e-14);

        let rz = BlochRotation::about_axis(&Vector3::z(), PI / 2.0);
        let u = bloch_to_su2(&rz).unwrap();
        assert!(fidelity_distance(&u, &s_gate()) < 1e-14);
        assert!((su2_to_bloch(&u).matrix() - rz.matrix()).norm() < 1e-12);
        // canonical phase: top-left real nonnegative
        assert!(u.matrix()[(0, 0)].im.abs() < 1e-15 && u.matrix()[(0, 0)].re > 0.0);

        let reflection = BlochRotation::new(Matrix3::from_diagonal(&Vector3::new(-1., 1., 1.))).unwrap();
        assert_eq!(
            bloch_to_su2(&reflection),
            Err(LinalgError::OrientationReversing)
        );
    }

    #[test]
    fn bloch_to_su2_uses_bottom_left_when_top_left_vanishes() {
        let x = UnitaryGate::new(pauli_x()).unwrap();
        let u = bloch_to_su2(&su2_to_bloch(&x)).unwrap();
        assert!(u.matrix()[(0, 0)].norm() < 1e-12);
        let bl = u.matrix()[(1, 0)];
        assert!(bl.im.abs() < 1e-15 && bl.re > 0.0);
        assert!(fidelity_distance(&u, &x) < 1e-14);
    }

    #[test]
    fn phase_normalize_examples() {
        let i = UnitaryGate::identity();
        assert_eq!(phase_normalize(&i), i);
        let shifted = i.scale_phase(PI / 3.0);
        assert!((phase_normalize(&shifted).matrix() - i.matrix()).norm() < 1e-15);
        let ii = UnitaryGate::new(Matrix2::new(c(0., 1.), c(0., 0.), c(0., 0.), c(0., 1.))).unwrap();
        assert!((phase_normalize(&ii).matrix() - i.matrix()).norm() < 1e-15);
    }

    #[test]
    fn phase_normalize_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let u = haar_unitary(&mut rng);
            let n = phase_normalize(&u);
            assert_eq!(phase_normalize(&n), n);
            assert!(fidelity_distance(&n, &u) < 1e-14);
        }
    }

    #[test]
    fn axis_angle_recovers_rotation() {
        let axis = Vector3::new(1.0, -2.0, 0.5).normalize();
        for &angle in &[1e-9, 0.3, 2.0, PI - 1e-9, PI] {
            let r = BlochRotation::about_axis(&axis, angle);
            let (n, a) = rotation_axis_angle(&r);
            assert!((a - angle).abs() < 1e-8, "{a} vs {angle}");
            if angle > 1e-6 && angle < PI - 1e-6 {
                assert!((n - axis).norm() < 1e-8);
            }
        }
    }
}
