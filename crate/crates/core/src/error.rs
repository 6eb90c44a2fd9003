use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("operator is not Hermitian: max |M - M^dagger| = {residual:e} exceeds {tolerance:e}")]
    NotHermitian { residual: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("eigendecomposition failed to converge")]
    NoConvergence,

    #[error("density matrix trace is {trace}, expected 1")]
    TraceNotUnit { trace: f64 },

    #[error("density matrix has eigenvalue {eigenvalue:e} below the positivity floor")]
    NotPositive { eigenvalue: f64 },

    #[error("spectral function hit kernel eigenvalue {eigenvalue:e}")]
    KernelEigenvalue { eigenvalue: f64 },

    #[error("spectral function received negative eigenvalue {eigenvalue:e}")]
    NegativeEigenvalue { eigenvalue: f64 },

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("duplicate qubit index {0}")]
    DuplicateQubit(usize),

    #[error("qubit subset must be nonempty")]
    EmptySubsystem,

    #[error("qubit subset must be a proper subset of the register")]
    FullSubsystem,

    #[error("lattice {rows}x{cols} needs {qubits} qubits; at most 8 are supported")]
    LatticeTooLarge { rows: usize, cols: usize, qubits: usize },

    #[error("lattice dimensions must be positive")]
    EmptyLattice,

    #[error("{kind} index {index} out of range (lattice has {count})")]
    StabilizerOutOfRange { kind: &'static str, index: usize, count: usize },

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("generators are linearly dependent: Gram determinant {gram:e}")]
    LinearlyDependent { gram: f64 },

    #[error("hygiene abort at step {step}: {reason}")]
    HygieneAbort { step: usize, reason: String },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("time grids of paired trajectories differ")]
    GridMismatch,
}

pub type Result<T> = core::result::Result<T, Error>;
