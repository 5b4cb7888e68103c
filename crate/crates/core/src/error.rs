use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("matrix is not unitary (residual {residual:.3e} > {tolerance:.1e})")]
    InvalidUnitary { residual: f64, tolerance: f64 },

    #[error("matrix is not orthogonal (residual {residual:.3e} > {tolerance:.1e})")]
    InvalidOrthogonal { residual: f64, tolerance: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("coupling matrix is not symmetric (residual {0:.3e})")]
    Symmetry(f64),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dispersive condition |Δ - ω_k| > g_k violated by modes {0:?}")]
    DispersiveViolation(Vec<usize>),

    #[error("invalid sector: {0}")]
    InvalidSector(String),

    #[error("hamiltonian is not hermitian at t = {time} (residual {residual:.3e})")]
    InvalidHamiltonian { time: f64, residual: f64 },

    #[error("invalid filling: N = {excitations} with M = {ports}")]
    InvalidFilling { excitations: usize, ports: usize },

    #[error("invalid dark-state spec: {0}")]
    InvalidSpec(String),

    #[error("fock cutoff {cutoff} cannot hold {excitations} excitations")]
    Truncation { cutoff: usize, excitations: usize },

    #[error("invalid time step: {0}")]
    InvalidStep(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
