//! Solovay-Kitaev compilation onto the braid + T gate set.

pub mod net;
pub mod sk;
pub mod vptree;

pub use net::{build_net, load_or_build, EpsilonNet, NetEntry, NetError};
pub use sk::{base_approx, gc_decompose, sk_compile, SkError, SkResult};
