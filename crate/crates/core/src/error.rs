use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("duplicate target qubit {0}")]
    DuplicateTarget(usize),

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("empty keep set in partial trace")]
    EmptyKeepSet,

    #[error("unsupported dimension {0} for Pauli expansion")]
    UnsupportedDimension(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("equilibrium solver did not converge after {iterations} iterations (gradient {gradient:.3e})")]
    EquilibriumNotConverged { iterations: usize, gradient: f64 },

    #[error("radial confinement too weak: mode {mode} has negative curvature {eigenvalue:.4}")]
    ChainBuckling { mode: usize, eigenvalue: f64 },

    #[error("rotation angle {0} outside (0, 2pi)")]
    AngleOutOfRange(f64),

    #[error("decomposition search failed after {restarts} restarts (best residual {best:.3e})")]
    DecompositionFailed { restarts: usize, best: f64 },

    #[error("ions {0} and {1} are not nearest neighbours")]
    NotAdjacent(usize, usize),

    #[error("echo sequence needs at least one targeted ion")]
    NoTargets,

    #[error("Fock truncation did not converge: shift {shift:.3e} when n_max raised to {n_max}")]
    TruncationNotConverged { shift: f64, n_max: usize },

    #[error("invalid circuit at gate {index}: {reason}")]
    InvalidGate { index: usize, reason: String },

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("illegal program: {0}")]
    IllegalProgram(String),

    #[error("confusion model is singular (crosstalk {0} >= 0.5)")]
    SingularConfusion(f64),

    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),

    #[error("truncation point {k} out of range (program has {len} gate steps)")]
    ScanOutOfRange { k: usize, len: usize },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("value {name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("tomography error: {0}")]
    Tomography(String),
}

pub type Result<T> = std::result::Result<T, Error>;
