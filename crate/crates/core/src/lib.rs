//! Single-qubit channel decomposition and the Majorana braid + T gate set.

pub mod channel;
pub mod decomposer;
pub mod gateset;
pub mod linalg;
pub mod majorana;

pub use channel::{AffineChannel, ChannelFactorization};
pub use decomposer::{ChannelPlan, DigitPlan, ElementarySet};
pub use gateset::{GateId, GateSequence};
pub use linalg::{BlochRotation, UnitaryGate, C64};
