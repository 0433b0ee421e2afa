//! Finite-dimensional Hilbert C*-modules over direct sums of matrix algebras:
//! completely positive maps, Stinespring dilations, Kolmogorov decompositions,
//! phi-maps and factorizations of completely bounded module maps.

pub mod algebra;
pub mod cb;
pub mod cp;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod maps;
pub mod phi;
pub mod random;

/// Version tag carried by every JSON document.
pub const SCHEMA: &str = "cstar-mod/1";

pub use algebra::{AlgebraElement, BlockAlgebra, HilbertModule, LinkingElement, ModuleElement};
pub use error::{AlgebraError, CbError, KernelError, LinalgError, MapError, PhiError};
pub use linalg::{CMatrix, IsometryClass, Tolerance};
pub use maps::{ModuleMap, OperatorMap};
