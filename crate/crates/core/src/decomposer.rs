//! Constructive decomposition of a single-qubit channel into elementary
//! contraction channels framed by two orthogonal Bloch maps.
//!
//! A target `a ↦ T a + t` is factorized as `F ∘ D ∘ P`, where `P` and `F` are
//! orthogonal and `D(x) = Σ x + τ` is diagonal with `Σ, τ ≥ 0`. `D` is then
//! approximated by a product of the fourteen elementary channels chosen by
//! per-axis digit expansions.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{channel_distance, compose, factorize, is_cptp, AffineChannel};
use crate::linalg::BlochRotation;

/// Number of elementary channels.
pub const ELEMENTARY_COUNT: usize = 14;
/// Largest accepted `ε`, where `δ = ε/7` reaches one half.
pub const EPSILON_MAX: f64 = 3.5;
/// Magnitudes and shifts at or below this count as exactly zero when choosing
/// free sign flips.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error("epsilon {0} outside (0, 3.5]")]
    EpsilonOutOfRange(f64),
    #[error("delta {0} outside (0, 0.5]")]
    DeltaOutOfRange(f64),
    #[error("magnitude {0} outside [0, 1]")]
    MagnitudeOutOfRange(f64),
    #[error("target shift {shift} outside [0, {limit}]")]
    ShiftOutOfRange { shift: f64, limit: f64 },
    #[error("digit plan not increasing: k = {0:?}")]
    UnorderedDigits([usize; 3]),
    #[error("bit string lengths {bits:?} do not match k = {k:?}")]
    LengthMismatch { k: [usize; 3], bits: [usize; 3] },
    #[error("target is not CPTP (minimum Choi eigenvalue {0:.3e})")]
    NotCptp(f64),
    #[error("elementary id {0} outside 1..=14")]
    BadId(u8),
}

fn check_epsilon(epsilon: f64) -> Result<f64, DecomposeError> {
    if epsilon.is_finite() && epsilon > 0.0 && epsilon <= EPSILON_MAX {
        Ok(epsilon / 7.0)
    } else {
        Err(DecomposeError::EpsilonOutOfRange(epsilon))
    }
}

fn check_delta(delta: f64) -> Result<(), DecomposeError> {
    if delta.is_finite() && delta > 0.0 && delta <= 0.5 {
        Ok(())
    } else {
        Err(DecomposeError::DeltaOutOfRange(delta))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementarySet {
    epsilon: f64,
    delta: f64,
    channels: Vec<AffineChannel>,
}

impl ElementarySet {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Channel by its 1-based id.
    pub fn channel(&self, id: u8) -> Result<&AffineChannel, DecomposeError> {
        match id {
            1..=14 => Ok(&self.channels[id as usize - 1]),
            _ => Err(DecomposeError::BadId(id)),
        }
    }

    pub fn channels(&self) -> &[AffineChannel] {
        &self.channels
    }
}

/// Contraction pattern and shift of elementary channel `id`, with `δ = 1`
/// standing in for the parameter.
fn elementary_pattern(id: u8) -> ([bool; 3], [bool; 3]) {
    let all = [true; 3];
    let yz = [false, true, true];
    let z = [false, false, true];
    match id {
        1 => (all, [false, false, false]),
        2 => (all, [true, false, false]),
        3 => (all, [false, true, false]),
        4 => (all, [false, false, true]),
        5 => (all, [true, true, false]),
        6 => (all, [true, false, true]),
        7 => (all, [false, true, true]),
        8 => (all, [true, true, true]),
        9 => (yz, [false, false, false]),
        10 => (yz, [false, true, false]),
        11 => (yz, [false, false, true]),
        12 => (yz, [false, true, true]),
        13 => (z, [false, false, false]),
        14 => (z, [false, false, true]),
        _ => unreachable!("elementary ids are 1..=14"),
    }
}

pub fn build_elementary_set(epsilon: f64) -> Result<ElementarySet, DecomposeError> {
    let delta = check_epsilon(epsilon)?;
    let channels = (1..=ELEMENTARY_COUNT as u8)
        .map(|id| {
            let (contract, shift) = elementary_pattern(id);
            let diag = contract.map(|c| if c { 1.0 - delta } else { 1.0 });
            let t = shift.map(|s| if s { delta } else { 0.0 });
            AffineChannel::diagonal(diag, t).expect("elementary channels are contractions")
        })
        .collect();
    Ok(ElementarySet {
        epsilon,
        delta,
        channels,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitPlan {
    pub k: [usize; 3],
    pub bits_x: Vec<bool>,
    pub bits_y: Vec<bool>,
    pub bits_z: Vec<bool>,
}

/// `log_{1-δ} x`.
fn log_base(x: f64, delta: f64) -> f64 {
    x.ln() / (1.0 - delta).ln()
}

/// `⌈min(log_{1-δ} m, log_{1-δ} δ)⌉`, floored at zero.
pub fn digit_count(magnitude: f64, delta: f64) -> Result<usize, DecomposeError> {
    check_delta(delta)?;
    if !(0.0..=1.0 + 1e-12).contains(&magnitude) {
        return Err(DecomposeError::MagnitudeOutOfRange(magnitude));
    }
    let cap = log_base(delta, delta);
    let raw = if magnitude <= 0.0 {
        cap
    } else {
        log_base(magnitude.min(1.0), delta).min(cap)
    };
    // ceiling with a small guard so exact powers of (1-δ) are not bumped up
    let k = (raw - 1e-9).ceil().max(0.0);
    Ok(k as usize)
}

/// Greedy digits: bit `j` is set iff the residue is at least `δ(1-δ)^{j-1}`.
pub fn greedy_bits(target_shift: f64, k: usize, delta: f64) -> Result<Vec<bool>, DecomposeError> {
    check_delta(delta)?;
    if !(target_shift >= -1e-12) || !target_shift.is_finite() {
        return Err(DecomposeError::ShiftOutOfRange {
            shift: target_shift,
            limit: 1.0,
        });
    }
    let mut residue = target_shift.max(0.0);
    let mut weight = delta;
    let mut bits = Vec::with_capacity(k);
    for _ in 0..k {
        let set = residue >= weight;
        if set {
            residue -= weight;
        }
        bits.push(set);
        weight *= 1.0 - delta;
    }
    Ok(bits)
}

/// `δ·Σ_j b_j (1-δ)^{j-1}`.
pub fn realized_shift(bits: &[bool], delta: f64) -> f64 {
    let mut weight = delta;
    let mut acc = 0.0;
    for &b in bits {
        if b {
            acc += weight;
        }
        weight *= 1.0 - delta;
    }
    acc
}

/// Digit count for `magnitude` and greedy bits for `target_shift`.
pub fn digit_expand(
    target_shift: f64,
    magnitude: f64,
    delta: f64,
) -> Result<(usize, Vec<bool>), DecomposeError> {
    check_delta(delta)?;
    if !(0.0..=1.0 + 1e-12).contains(&magnitude) {
        return Err(DecomposeError::MagnitudeOutOfRange(magnitude));
    }
    let limit = 1.0 - magnitude;
    if !(target_shift >= -1e-12 && target_shift <= limit + 1e-12) {
        return Err(DecomposeError::ShiftOutOfRange {
            shift: target_shift,
            limit,
        });
    }
    let k = digit_count(magnitude, delta)?;
    let bits = greedy_bits(target_shift, k, delta)?;
    Ok((k, bits))
}

/// Digit plan for the diagonal channel with magnitudes `sigma` (descending)
/// and nonnegative shifts `tau`.
pub fn plan_digits(sigma: [f64; 3], tau: [f64; 3], delta: f64) -> Result<DigitPlan, DecomposeError> {
    let mut k = [0usize; 3];
    for i in 0..3 {
        k[i] = digit_count(sigma[i], delta)?;
    }
    // sorted magnitudes give sorted counts; rounding ties are pushed up
    k[1] = k[1].max(k[0]);
    k[2] = k[2].max(k[1]);
    let bits: Vec<Vec<bool>> = (0..3)
        .map(|i| greedy_bits(tau[i], k[i], delta))
        .collect::<Result<_, _>>()?;
    let [bits_x, bits_y, bits_z]: [Vec<bool>; 3] = bits.try_into().expect("three axes");
    Ok(DigitPlan {
        k,
        bits_x,
        bits_y,
        bits_z,
    })
}

/// Elementary ids for a digit plan in application order (first applied first).
pub fn assemble_step1(plan: &DigitPlan, _set: &ElementarySet) -> Result<Vec<u8>, DecomposeError> {
    let [k1, k2, k3] = plan.k;
    if !(k1 <= k2 && k2 <= k3) {
        return Err(DecomposeError::UnorderedDigits(plan.k));
    }
    let lens = [plan.bits_x.len(), plan.bits_y.len(), plan.bits_z.len()];
    if lens != plan.k {
        return Err(DecomposeError::LengthMismatch {
            k: plan.k,
            bits: lens,
        });
    }
    let mut table = Vec::with_capacity(k3);
    for j in 0..k3 {
        let sz = plan.bits_z[j];
        let id = if j < k1 {
            match (plan.bits_x[j], plan.bits_y[j], sz) {
                (false, false, false) => 1,
                (true, false, false) => 2,
                (false, true, false) => 3,
                (false, false, true) => 4,
                (true, true, false) => 5,
                (true, false, true) => 6,
                (false, true, true) => 7,
                (true, true, true) => 8,
            }
        } else if j < k2 {
            match (plan.bits_y[j], sz) {
                (false, false) => 9,
                (true, false) => 10,
                (false, true) => 11,
                (true, true) => 12,
            }
        } else if sz {
            14
        } else {
            13
        };
        table.push(id);
    }
    table.reverse();
    Ok(table)
}

/// Composition of elementary channels in application order.
pub fn compose_ids(ids: &[u8], set: &ElementarySet) -> Result<AffineChannel, DecomposeError> {
    ids.iter().try_fold(AffineChannel::identity(), |acc, &id| {
        Ok(compose(set.channel(id)?, &acc))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    pub target: AffineChannel,
    pub epsilon: f64,
    pub delta: f64,
    pub digits: DigitPlan,
    /// Orthogonal map applied before the elementary channels.
    pub pre_map: BlochRotation,
    pub elementary_ids: Vec<u8>,
    /// Orthogonal map applied after the elementary channels.
    pub final_map: BlochRotation,
    /// Either frame map has determinant −1, so the plan is not realizable
    /// with unitary frames.
    pub orientation_reversing: bool,
    /// Exact distance between the replayed plan and the target.
    pub certified_error: f64,
}

pub fn replay(plan: &ChannelPlan) -> Result<AffineChannel, DecomposeError> {
    let set = build_elementary_set(plan.epsilon)?;
    replay_with(plan, &set)
}

pub fn replay_with(plan: &ChannelPlan, set: &ElementarySet) -> Result<AffineChannel, DecomposeError> {
    let pre = AffineChannel::from_rotation(&plan.pre_map);
    let mid = compose(&compose_ids(&plan.elementary_ids, set)?, &pre);
    Ok(compose(&AffineChannel::from_rotation(&plan.final_map), &mid))
}

fn flip(m: &mut Matrix3<f64>, axis: usize) {
    m.row_mut(axis).neg_mut();
}

pub fn decompose_channel(target: &AffineChannel, epsilon: f64) -> Result<ChannelPlan, DecomposeError> {
    let set = build_elementary_set(epsilon)?;
    let cptp = is_cptp(target);
    if !cptp.is_cptp {
        return Err(DecomposeError::NotCptp(cptp.min_choi_eigenvalue));
    }
    let delta = set.delta();
    let f = factorize(target);
    let sigma = f.diag_magnitudes;
    let tau = f.shift_in_frame;
    let mut s = f.diag_signs;
    let mut g = f.shift_signs;

    // T = W S Σ Vᵀ, t = W G τ  ⇒  target = (W G) ∘ (Σ·+τ) ∘ (G S Vᵀ)
    let det = |v: &[f64; 3]| v.iter().product::<f64>();
    let zero_sigma = |i: usize| sigma[i] <= ZERO_TOL;
    let zero_tau = |i: usize| tau[i] <= ZERO_TOL;
    if det(&g) * det(&s) < 0.0 {
        if let Some(i) = (0..3).find(|&i| zero_sigma(i)) {
            s[i] = -s[i];
        } else if let Some(i) = (0..3).find(|&i| zero_tau(i)) {
            g[i] = -g[i];
        }
    }
    if det(&g) < 0.0 {
        if let Some(i) = (0..3).find(|&i| zero_sigma(i) && zero_tau(i)) {
            g[i] = -g[i];
            s[i] = -s[i];
        }
    }

    let mut pre = *f.pre_rotation.matrix();
    let mut post = *f.post_rotation.matrix();
    for i in 0..3 {
        if g[i] * s[i] < 0.0 {
            flip(&mut pre, i);
        }
        if g[i] < 0.0 {
            post.column_mut(i).neg_mut();
        }
    }
    let pre_map = BlochRotation::from_matrix_unchecked(pre);
    let final_map = BlochRotation::from_matrix_unchecked(post);

    let digits = plan_digits(sigma, tau, delta)?;
    let elementary_ids = assemble_step1(&digits, &set)?;
    let mut plan = ChannelPlan {
        target: *target,
        epsilon,
        delta,
        digits,
        pre_map,
        elementary_ids,
        final_map,
        orientation_reversing: pre_map.orientation() < 0 || final_map.orientation() < 0,
        certified_error: 0.0,
    };
    plan.certified_error = channel_distance(&replay_with(&plan, &set)?, target);
    Ok(plan)
}

/// `⌈log_{1-δ} δ⌉ + 1` with `δ = ε/7`.
pub fn length_bound(epsilon: f64) -> Result<usize, DecomposeError> {
    let delta = check_epsilon(epsilon)?;
    Ok(digit_count(0.0, delta)? + 1)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("group order must be at least 2, got {0}")]
    GroupOrder(usize),
    #[error("epsilon must lie in (0, 1], got {0}")]
    Epsilon(f64),
}

/// `(d² − 1)·log₂(1/ε)/log₂|G|`, the T-count lower bound with unit constant.
pub fn t_count_lower_bound(dim: usize, group_order: usize, epsilon: f64) -> Result<f64, BoundError> {
    if dim < 2 {
        return Err(BoundError::Dimension(dim));
    }
    if group_order < 2 {
        return Err(BoundError::GroupOrder(group_order));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(BoundError::Epsilon(epsilon));
    }
    let d2 = (dim * dim - 1) as f64;
    Ok(d2 * (1.0 / epsilon).log2() / (group_order as f64).log2())
}

/// Flat line record of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub target: Vec<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub k: [usize; 3],
    pub elementary_ids: Vec<u8>,
    pub pre_map: Vec<f64>,
    pub final_map: Vec<f64>,
    pub orientation_reversing: bool,
    pub certified_error: f64,
}

impl From<&ChannelPlan> for PlanRecord {
    fn from(p: &ChannelPlan) -> Self {
        PlanRecord {
            target: p.target.params().to_vec(),
            epsilon: p.epsilon,
            delta: p.delta,
            k: p.digits.k,
            elementary_ids: p.elementary_ids.clone(),
            pre_map: p.pre_map.to_row_major().to_vec(),
            final_map: p.final_map.to_row_major().to_vec(),
            orientation_reversing: p.orientation_reversing,
            certified_error: p.certified_error,
        }
    }
}

impl ChannelPlan {
    pub fn to_record(&self) -> PlanRecord {
        PlanRecord::from(self)
    }

    /// One JSON object, no trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("plan records serialize")
    }
}
