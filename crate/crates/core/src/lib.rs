//! Numerical toolkit for studying critical points of the 1-norm
//! `‖U‖₁ = Σ|U_ij|` on the unitary group `U(N)`.
//!
//! A complex Hadamard matrix `H` rescales to a global maximizer `H/√N`.
//! The modules here build candidate unitaries, certify first-order
//! criticality, evaluate the second-order form `Φ(U,B)` and its closed-form
//! specializations, estimate expectations of `Φ` over random directions, run
//! Riemannian ascent, and compute defect spaces of Hadamard matrices.
//!
//! Conventions used throughout:
//!
//! * `J` (written `all_ones` in code) is the all-ones matrix, `I` the identity.
//! * `S = sgn(U)` entrywise and `X = S*U`; `U` is critical iff `X` is self-adjoint.
//! * `Φ(U,B) = Tr(X B²) − Σ Re[(UB)_ij S̄_ij]² / |U_ij|` for hermitian `B`.
//!   A negative value certifies that `U` is not a local maximizer.
//! * Circulant matrices are stored by first row: `U_ij = γ_{j−i mod N}`.

pub mod constructors;
pub mod criticality;
pub mod error;
pub mod hessian;
pub mod io;
pub mod matrix;
pub mod probes;
pub mod rng;
pub mod tolerance;

pub use error::{Error, Result};
pub use matrix::{ComplexMatrix, UnitaryCandidate};
pub use tolerance::Tolerances;
