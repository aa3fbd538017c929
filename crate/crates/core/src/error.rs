use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit count mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("{n} qubits exceeds the dense limit of {limit}")]
    DenseLimit { n: usize, limit: usize },

    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },

    #[error("classical bit {index} out of range for {n} bits")]
    BitOutOfRange { index: usize, n: usize },

    #[error("duplicate target qubit {0}")]
    DuplicateTarget(usize),

    #[error("overlapping blocks: qubit {0} appears twice")]
    OverlappingBlocks(usize),

    #[error("matrix is not unitary (deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix of dimension {dim} does not act on {targets} target qubits")]
    DimensionMismatch { dim: usize, targets: usize },

    #[error("operator is not an involution")]
    NotInvolution,

    #[error("invalid correction operator: {0}")]
    InvalidCorrection(String),

    #[error("operator has no transversal decomposition")]
    NotTransversal,

    #[error("branch count {count} exceeds cap {cap}; use sample mode")]
    BranchCap { count: usize, cap: usize },

    #[error("state does not factorize over the requested qubits (fidelity {fidelity})")]
    NotProduct { fidelity: f64 },

    #[error("cat-state verification failed after {0} attempts")]
    CatVerification(usize),

    #[error("known amplitudes inconsistent with data: {0}")]
    InconsistentAmplitudes(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),
}
