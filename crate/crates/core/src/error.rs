use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (‖H − H*‖_F = {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("element {index} is not a projection (‖P − P*‖ = {hermiticity:e}, ‖P²−P‖ = {idempotency:e})")]
    NotProjection {
        index: usize,
        hermiticity: f64,
        idempotency: f64,
    },
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error("outcome has probability {probability:e}, at or below the floor {floor:e}")]
    ZeroProbability { probability: f64, floor: f64 },
    #[error("system is not measure preserving (worst preimage defect {defect:e})")]
    NotMeasurePreserving { defect: f64 },
    #[error("subset has measure zero")]
    NullSet,
    #[error("functional is not a state: {0}")]
    NotAState(String),
    #[error("dynamics is not sub-invariant: φ(τ(A*A)) − φ(A*A) = {excess:e}")]
    SubInvarianceViolated { excess: f64 },
    #[error("dynamics does not map the GNS null space into itself (leak {leak:e})")]
    NullSpaceLeak { leak: f64 },
    #[error("sampled φ(τ(A*A)) exceeds φ(A*A) by {excess:e}")]
    ContractivityViolated { excess: f64 },
    #[error("Cesàro average not within target after {n_max} steps (achieved error {achieved:e}, target {target:e})")]
    NMaxExceeded { n_max: usize, achieved: f64, target: f64 },
    #[error("algebra has {blocks} blocks; a factor (single block) is required")]
    NotFactor { blocks: usize },
    #[error("recurrence search exhausted after {n_max} steps; {found} moments found")]
    SearchExhausted {
        n_max: usize,
        found: usize,
        partial: Vec<f64>,
    },
    #[error("window center fails: ω(τ_s(P)) = {value} is not above the target {target}")]
    CenterFails { value: f64, target: f64 },
    #[error("numerical invariant violated: {0}")]
    InvariantViolation(String),
}
