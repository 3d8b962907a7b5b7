//! Error type shared by every module.

use thiserror::Error;

/// Failure modes of the toolkit.
///
/// Variants fall in three groups: malformed input (`Parse`, `InvalidInput`,
/// `NotSquare`, `NonFinite`), violated mathematical preconditions (most
/// variants), and internal numerical cross-check failures (`Numerical`).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("entry ({0}, {1}) is zero; the 1-norm is not differentiable there")]
    ZeroEntry(usize, usize),
    #[error("matrix is not anti-hermitian (‖A + A*‖_F = {0:.3e})")]
    NotSkew(f64),
    #[error("matrix is not hermitian (‖B − B*‖_F = {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (‖UU* − I‖_F = {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix is not square ({rows}×{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has a non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("requested solution branch is unavailable: {0}")]
    BranchUnavailable(String),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("eigenphase {index} has modulus {modulus}, expected 1")]
    NotUnimodular { index: usize, modulus: f64 },
    #[error("matrix is not critical (‖X − X*‖_F = {0:.3e})")]
    NotCritical(f64),
    #[error("pattern matrices are not symmetric")]
    NotSymmetricPattern,
    #[error("operation requires the {0} branch")]
    WrongBranch(&'static str),
    #[error("operation requires a real solution branch")]
    ComplexBranch,
    #[error("matrix is not circulant")]
    NotCirculant,
    #[error("matrix is not real")]
    NotReal,
    #[error("matrix is not self-adjoint")]
    NotSelfAdjoint,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not a complex Hadamard matrix")]
    NotHadamard,
    #[error("moduli clustering is ambiguous near {lo:.3e} and {hi:.3e}; lower the cluster tolerance")]
    AmbiguousClustering { lo: f64, hi: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by malformed input rather than mathematics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::InvalidInput(_) | Error::NotSquare { .. } | Error::NonFinite(..)
        )
    }

    /// True for failures of an internal consistency check.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
