//! Majorana braid generators plus the T gate, and gate sequences over them.
//!
//! Sequences are stored in circuit order: the first id acts first, so
//! `evaluate([g1, …, gn]) = M(gn) ⋯ M(g1)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{UnitaryGate, C64};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GateParseError {
    #[error("unknown gate token `{0}` (expected B12 B12' B23 B23' T T')")]
    UnknownToken(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateId {
    B12,
    B12Inv,
    B23,
    B23Inv,
    T,
    TInv,
}

impl GateId {
    /// Action-space order used by the policy head.
    pub const ALL: [GateId; 6] = [
        GateId::B12,
        GateId::B12Inv,
        GateId::B23,
        GateId::B23Inv,
        GateId::T,
        GateId::TInv,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<GateId> {
        Self::ALL.get(i).copied()
    }

    pub fn inverse(self) -> GateId {
        match self {
            GateId::B12 => GateId::B12Inv,
            GateId::B12Inv => GateId::B12,
            GateId::B23 => GateId::B23Inv,
            GateId::B23Inv => GateId::B23,
            GateId::T => GateId::TInv,
            GateId::TInv => GateId::T,
        }
    }

    pub fn is_t(self) -> bool {
        matches!(self, GateId::T | GateId::TInv)
    }

    pub fn token(self) -> &'static str {
        match self {
            GateId::B12 => "B12",
            GateId::B12Inv => "B12'",
            GateId::B23 => "B23",
            GateId::B23Inv => "B23'",
            GateId::T => "T",
            GateId::TInv => "T'",
        }
    }

    pub fn matrix(self) -> UnitaryGate {
        generator_matrix(self)
    }
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for GateId {
    type Err = GateParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "B12" => GateId::B12,
            "B12'" => GateId::B12Inv,
            "B23" => GateId::B23,
            "B23'" => GateId::B23Inv,
            "T" => GateId::T,
            "T'" => GateId::TInv,
            other => return Err(GateParseError::UnknownToken(other.to_string())),
        })
    }
}

fn generator_table() -> &'static [UnitaryGate; 6] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[UnitaryGate; 6]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let b12 = Matrix2::new(one, zero, zero, C64::new(0.0, 1.0));
        let b23 = Matrix2::new(C64::new(h, 0.0), C64::new(0.0, -h), C64::new(0.0, -h), C64::new(h, 0.0));
        let t = Matrix2::new(one, zero, zero, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4));
        [b12, b12.adjoint(), b23, b23.adjoint(), t, t.adjoint()]
            .map(|m| UnitaryGate::new(m).expect("generators are unitary"))
    })
}

/// B12 = diag(1, i), B23 = (1/√2)[[1, -i], [-i, 1]], T = diag(1, e^{iπ/4});
/// inverses are adjoints. B34 coincides with B12.
pub fn generator_matrix(id: GateId) -> UnitaryGate {
    generator_table()[id.index()]
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GateSequence {
    ids: Vec<GateId>,
}

impl GateSequence {
    pub fn new(ids: Vec<GateId>) -> Self {
        Self { ids }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn ids(&self) -> &[GateId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn push(&mut self, id: GateId) {
        self.ids.push(id);
    }

    pub fn t_count(&self) -> usize {
        self.ids.iter().filter(|g| g.is_t()).count()
    }

    /// Sequence whose evaluation is the adjoint of this one's.
    pub fn inverse(&self) -> GateSequence {
        GateSequence::new(self.ids.iter().rev().map(|g| g.inverse()).collect())
    }

    /// Circuit concatenation: `self` acts first.
    pub fn then(&self, next: &GateSequence) -> GateSequence {
        let mut ids = self.ids.clone();
        ids.extend_from_slice(&next.ids);
        GateSequence::new(ids)
    }

    pub fn has_adjacent_inverse_pair(&self) -> bool {
        self.ids.windows(2).any(|w| w[1] == w[0].inverse())
    }

    pub fn evaluate(&self) -> UnitaryGate {
        evaluate(self)
    }

    pub fn to_tokens(&self) -> String {
        self.ids.iter().map(|g| g.token()).collect::<Vec<_>>().join(" ")
    }

    pub fn parse(text: &str) -> Result<Self, GateParseError> {
        text.split_whitespace()
            .map(GateId::from_str)
            .collect::<Result<Vec<_>, _>>()
            .map(GateSequence::new)
    }
}

impl fmt::Display for GateSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tokens())
    }
}

impl From<Vec<GateId>> for GateSequence {
    fn from(ids: Vec<GateId>) -> Self {
        Self::new(ids)
    }
}

/// `M(gn) ⋯ M(g1)`; the empty sequence is `I`.
pub fn evaluate(seq: &GateSequence) -> UnitaryGate {
    let mut acc = *UnitaryGate::identity().matrix();
    for g in &seq.ids {
        acc = generator_matrix(*g).matrix() * acc;
    }
    UnitaryGate::from_matrix_unchecked(acc)
}

/// Ids drawn uniformly and independently; adjacent inverse pairs are kept.
pub fn random_sequence(length: usize, rng_seed: u64) -> GateSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    random_sequence_with(length, &mut rng)
}

pub fn random_sequence_with<R: Rng + ?Sized>(length: usize, rng: &mut R) -> GateSequence {
    GateSequence::new(
        (0..length)
            .map(|_| GateId::ALL[rng.random_range(0..GateId::ALL.len())])
            .collect(),
    )
}
