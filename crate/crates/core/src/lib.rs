//! Affine differential invariants of surfaces in R⁴ and the singularities of
//! their affine distance functions and plane congruences.

pub mod error;
pub mod expr;
pub mod frame;
pub mod congruence;
pub mod distance;
pub mod document;
pub mod invariants;
pub mod jet;
pub mod loci;
pub mod oracle;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};
pub use expr::{parse, Expr};
pub use jet::{Jet, JetVec4};
