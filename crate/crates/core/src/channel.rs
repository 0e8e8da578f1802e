//! Affine Bloch-ball representation `a ↦ T a + t` of single-qubit channels.

use nalgebra::{Matrix2, Matrix3, Matrix4, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{paulis, BlochRotation, C64};

/// Slack on singular values of `T` and on the Choi spectrum.
pub const CPTP_TOL: f64 = 1e-9;
/// Allowed deviation of `Σ K†K` from the identity.
pub const KRAUS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("Kraus operators are not trace preserving (|ΣK†K - I|_F = {0:.3e})")]
    NotTracePreserving(f64),
    #[error("empty Kraus set")]
    EmptyKraus,
    #[error("distortion has singular value {0} > 1")]
    ExpandingDistortion(f64),
    #[error("non-finite channel parameters")]
    NonFinite,
    #[error("expected 12 parameters, got {0}")]
    BadParameterCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AffineChannel {
    distortion: Matrix3<f64>,
    shift: Vector3<f64>,
}

impl TryFrom<Vec<f64>> for AffineChannel {
    type Error = ChannelError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        AffineChannel::from_params(&v)
    }
}

impl From<AffineChannel> for Vec<f64> {
    fn from(c: AffineChannel) -> Self {
        c.params().to_vec()
    }
}

impl AffineChannel {
    pub fn new(distortion: Matrix3<f64>, shift: Vector3<f64>) -> Result<Self, ChannelError> {
        if distortion.iter().chain(shift.iter()).any(|v| !v.is_finite()) {
            return Err(ChannelError::NonFinite);
        }
        let top = distortion.singular_values().max();
        if top > 1.0 + CPTP_TOL {
            return Err(ChannelError::ExpandingDistortion(top));
        }
        Ok(Self { distortion, shift })
    }

    pub(crate) fn from_parts_unchecked(distortion: Matrix3<f64>, shift: Vector3<f64>) -> Self {
        Self { distortion, shift }
    }

    pub fn identity() -> Self {
        Self::from_parts_unchecked(Matrix3::identity(), Vector3::zeros())
    }

    /// Channel of an orthogonal Bloch map (a unitary when the orientation is +1).
    pub fn from_rotation(r: &BlochRotation) -> Self {
        Self::from_parts_unchecked(*r.matrix(), Vector3::zeros())
    }

    pub fn diagonal(diag: [f64; 3], shift: [f64; 3]) -> Result<Self, ChannelError> {
        Self::new(
            Matrix3::from_diagonal(&Vector3::from(diag)),
            Vector3::from(shift),
        )
    }

    pub fn distortion(&self) -> &Matrix3<f64> {
        &self.distortion
    }

    pub fn shift(&self) -> &Vector3<f64> {
        &self.shift
    }

    pub fn apply(&self, a: &Vector3<f64>) -> Vector3<f64> {
        self.distortion * a + self.shift
    }

    /// Row-major `T` followed by `t`.
    pub fn params(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for i in 0..3 {
            for j in 0..3 {
                out[3 * i + j] = self.distortion[(i, j)];
            }
            out[9 + i] = self.shift[i];
        }
        out
    }

    pub fn from_params(v: &[f64]) -> Result<Self, ChannelError> {
        if v.len() != 12 {
            return Err(ChannelError::BadParameterCount(v.len()));
        }
        Self::new(
            Matrix3::from_row_slice(&v[..9]),
            Vector3::new(v[9], v[10], v[11]),
        )
    }

    pub fn from_kraus(operators: &[Matrix2<C64>]) -> Result<Self, ChannelError> {
        from_kraus(operators)
    }

    /// Image of a 2×2 operator under the channel, via the Pauli expansion.
    pub fn act_on_operator(&self, rho: &Matrix2<C64>) -> Matrix2<C64> {
        let p = paulis();
        let r0 = rho.trace();
        let coeffs: Vec<C64> = p.iter().map(|s| (s * rho).trace()).collect();
        // rho = ½(r0 I + Σ r_j σ_j)
        let mut out = Matrix2::identity() * r0;
        for i in 0..3 {
            let mut c = self.shift[i] * r0;
            for j in 0..3 {
                c += self.distortion[(i, j)] * coeffs[j];
            }
            out += p[i] * c;
        }
        out * C64::new(0.5, 0.0)
    }
}

/// `T_ij = ½Tr[σ_i ℰ(σ_j)]`, `t_i = ½Tr[σ_i ℰ(I)]`.
pub fn from_kraus(operators: &[Matrix2<C64>]) -> Result<AffineChannel, ChannelError> {
    if operators.is_empty() {
        return Err(ChannelError::EmptyKraus);
    }
    let sum: Matrix2<C64> = operators.iter().map(|k| k.adjoint() * k).sum();
    let dev = (sum - Matrix2::identity()).norm();
    if dev > KRAUS_TOL {
        return Err(ChannelError::NotTracePreserving(dev));
    }
    let apply = |x: &Matrix2<C64>| -> Matrix2<C64> { operators.iter().map(|k| k * x * k.adjoint()).sum() };
    let p = paulis();
    let mut t = Matrix3::zeros();
    let mut s = Vector3::zeros();
    let image_id = apply(&Matrix2::identity());
    for i in 0..3 {
        s[i] = 0.5 * (p[i] * image_id).trace().re;
        for j in 0..3 {
            t[(i, j)] = 0.5 * (p[i] * apply(&p[j])).trace().re;
        }
    }
    AffineChannel::new(t, s)
}

/// `later ∘ earlier`: `a ↦ T₂(T₁a + t₁) + t₂`.
pub fn compose(later: &AffineChannel, earlier: &AffineChannel) -> AffineChannel {
    AffineChannel::from_parts_unchecked(
        later.distortion * earlier.distortion,
        later.distortion * earlier.shift + later.shift,
    )
}

/// `max_{|a| ≤ 1} |M a + v|`, the support radius of an affine image of the ball.
///
/// Stationary points on the sphere satisfy `(MᵀM - μI) a = -Mᵀv`. In the
/// eigenbasis of `MᵀM` this is a secular equation in `μ` with the global
/// maximum at the root beyond the largest eigenvalue; the degenerate
/// ("hard") case where `Mᵀv` has no component along the top eigenvector is
/// evaluated separately and the better candidate wins.
pub fn max_affine_norm(m: &Matrix3<f64>, v: &Vector3<f64>) -> f64 {
    let a = m.transpose() * m;
    let eig = SymmetricEigen::new(a);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let lam: [f64; 3] = order.map(|k| eig.eigenvalues[k].max(0.0));
    let q: [Vector3<f64>; 3] = order.map(|k| eig.eigenvectors.column(k).into_owned());
    let mtv = m.transpose() * v;
    let b: [f64; 3] = q.map(|qk| qk.dot(&mtv));
    let bnorm = mtv.norm();

    let value = |x: &Vector3<f64>| (m * x + v).norm();
    let mut best = v.norm();
    for qk in &q {
        best = best.max(value(qk)).max(value(&-qk));
    }
    if bnorm == 0.0 {
        return best.max(lam[0].sqrt() + 0.0);
    }

    // secular root: Σ b_k² / (μ - λ_k)² = 1 on (λ₀, λ₀ + |b|]
    let norm_sq = |mu: f64| -> f64 {
        (0..3)
            .map(|k| {
                let d = mu - lam[k];
                if d <= 0.0 {
                    f64::INFINITY
                } else {
                    b[k] * b[k] / (d * d)
                }
            })
            .sum()
    };
    let mut lo = lam[0];
    let mut hi = lam[0] + bnorm;
    if norm_sq(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm_sq(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = hi;
    let mut x = Vector3::zeros();
    for k in 0..3 {
        let d = mu - lam[k];
        if d > 0.0 {
            x += q[k] * (b[k] / d);
        }
    }
    let n = x.norm();
    if n > 0.0 {
        best = best.max(value(&(x / n)));
    }

    // hard case: μ = λ₀ with the free top-eigenvector component filling the sphere
    let mut partial = Vector3::zeros();
    let mut ok = true;
    for k in 1..3 {
        let d = lam[0] - lam[k];
        if d > 1e-14 {
            partial += q[k] * (b[k] / d);
        } else if b[k].abs() > 0.0 {
            ok = false;
        }
    }
    if ok && partial.norm() <= 1.0 {
        let rest = (1.0 - partial.norm_squared()).max(0.0).sqrt();
        for sign in [-1.0, 1.0] {
            best = best.max(value(&(partial + q[0] * (sign * rest))));
        }
    }
    best
}

/// Halved trace-distance convention: `½ max_{|a|≤1} |ΔT a + Δt|`.
pub fn channel_distance(e1: &AffineChannel, e2: &AffineChannel) -> f64 {
    0.5 * max_affine_norm(
        &(e1.distortion - e2.distortion),
        &(e1.shift - e2.shift),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CptpCheck {
    pub is_cptp: bool,
    /// Smallest eigenvalue of the Choi matrix.
    pub min_choi_eigenvalue: f64,
}

/// `C = Σ_{kl} ℰ(|k⟩⟨l|) ⊗ |k⟩⟨l|`, rows indexed `(output, input)`.
pub fn choi_matrix(e: &AffineChannel) -> Matrix4<C64> {
    let mut choi = Matrix4::zeros();
    for k in 0..2 {
        for l in 0..2 {
            let mut unit = Matrix2::zeros();
            unit[(k, l)] = C64::new(1.0, 0.0);
            let img = e.act_on_operator(&unit);
            for i in 0..2 {
                for j in 0..2 {
                    choi[(2 * i + k, 2 * j + l)] = img[(i, j)];
                }
            }
        }
    }
    choi
}

pub fn is_cptp(e: &AffineChannel) -> CptpCheck {
    let choi = choi_matrix(e);
    let herm = (choi + choi.adjoint()) * C64::new(0.5, 0.0);
    let min = SymmetricEigen::new(herm).eigenvalues.min();
    CptpCheck {
        is_cptp: min >= -CPTP_TOL,
        min_choi_eigenvalue: min,
    }
}

/// `T = W·diag(s ⊙ σ)·Vᵀ` and `t = W·(g ⊙ τ)` with `W, V ∈ SO(3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelFactorization {
    /// `Vᵀ`.
    pub pre_rotation: BlochRotation,
    /// `W`; its columns are the frame axes.
    pub post_rotation: BlochRotation,
    /// `σ`, descending.
    pub diag_magnitudes: [f64; 3],
    pub diag_signs: [f64; 3],
    /// `τ = |Wᵀt|` entrywise.
    pub shift_in_frame: [f64; 3],
    pub shift_signs: [f64; 3],
}

impl ChannelFactorization {
    pub fn reassemble(&self) -> AffineChannel {
        let signed = Vector3::from_fn(|i, _| self.diag_signs[i] * self.diag_magnitudes[i]);
        let shift = Vector3::from_fn(|i, _| self.shift_signs[i] * self.shift_in_frame[i]);
        let w = self.post_rotation.matrix();
        AffineChannel::from_parts_unchecked(
            w * Matrix3::from_diagonal(&signed) * self.pre_rotation.matrix(),
            w * shift,
        )
    }
}

fn sign_of(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Real SVD canonicalized to proper rotations; sign flips needed for that are
/// moved into `diag_signs`.
pub fn factorize(e: &AffineChannel) -> ChannelFactorization {
    let svd = e.distortion.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let mut cols: Vec<(f64, Vector3<f64>, Vector3<f64>)> = (0..3)
        .map(|k| {
            (
                svd.singular_values[k],
                u.column(k).into_owned(),
                vt.row(k).transpose(),
            )
        })
        .collect();
    // descending singular values; ties broken lexicographically on the left vector
    cols.sort_by(|a, b| {
        b.0.total_cmp(&a.0).then_with(|| {
            a.1.iter()
                .zip(b.1.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut w = Matrix3::from_columns(&[cols[0].1, cols[1].1, cols[2].1]);
    let mut v = Matrix3::from_columns(&[cols[0].2, cols[1].2, cols[2].2]);
    let mags = [cols[0].0, cols[1].0, cols[2].0];
    let mut signs = [1.0; 3];
    if w.determinant() < 0.0 {
        w.column_mut(2).neg_mut();
        signs[2] = -signs[2];
    }
    if v.determinant() < 0.0 {
        v.column_mut(2).neg_mut();
        signs[2] = -signs[2];
    }
    let framed = w.transpose() * e.shift;
    ChannelFactorization {
        pre_rotation: BlochRotation::from_matrix_unchecked(v.transpose()),
        post_rotation: BlochRotation::from_matrix_unchecked(w),
        diag_magnitudes: mags,
        diag_signs: signs,
        shift_in_frame: [framed[0].abs(), framed[1].abs(), framed[2].abs()],
        shift_signs: [sign_of(framed[0]), sign_of(framed[1]), sign_of(framed[2])],
    }
}

/// Amplitude damping with decay probability `gamma`.
pub fn amplitude_damping_kraus(gamma: f64) -> [Matrix2<C64>; 2] {
    let z = C64::new(0.0, 0.0);
    [
        Matrix2::new(C64::new(1.0, 0.0), z, z, C64::new((1.0 - gamma).sqrt(), 0.0)),
        Matrix2::new(z, C64::new(gamma.sqrt(), 0.0), z, z),
    ]
}

/// Random CPTP channel from a Haar-like Stinespring isometry with `rank`
/// Kraus operators.
pub fn random_cptp<R: rand::Rng + ?Sized>(rng: &mut R, rank: usize) -> AffineChannel {
    use rand_distr::{Distribution, StandardNormal};
    let rank = rank.max(1);
    let blocks: Vec<Matrix2<C64>> = (0..rank)
        .map(|_| {
            Matrix2::from_fn(|_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re, im)
            })
        })
        .collect();
    let gram: Matrix2<C64> = blocks.iter().map(|a| a.adjoint() * a).sum();
    let eig = SymmetricEigen::new(gram);
    let inv_sqrt = Matrix2::from_diagonal(&eig.eigenvalues.map(|l| C64::new(1.0 / l.sqrt(), 0.0)));
    let root = eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    let kraus: Vec<Matrix2<C64>> = blocks.iter().map(|a| a * root).collect();
    from_kraus(&kraus).expect("normalized Stinespring isometry is trace preserving")
}
