//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building rules, kernels, spectra, or
/// running the verification operators.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Ambient dimension outside the supported range (d >= 2, or d >= 1 where noted).
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// Malformed construction input (lengths, orderings, signs, ranges).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The combined endpoint exponents make the integral infinite.
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    /// Successive quadrature refinements failed to agree to tolerance.
    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    /// A vector supposed to be tangent at a base point is not.
    #[error("vector is not tangent: {0}")]
    NotTangent(String),

    /// Argument outside [-1, 1].
    #[error("argument outside [-1, 1]: {0}")]
    DomainError(f64),

    /// Heat-kernel series truncated before the tail bound was met.
    #[error("series truncation not certified: {0}")]
    TruncationError(String),

    /// Parameter outside the admissible range of a closed-form family.
    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    /// Symmetrized kernel ratio diverges or degenerates to zero on refinement.
    #[error("unbounded kernel ratio: {0}")]
    UnboundedRatio(String),

    /// Operation requires d >= 3.
    #[error("dimension too small: {0}")]
    DimensionTooSmall(String),

    /// No lower-bound route applies to the given kernel and options.
    #[error("no route applicable: {0}")]
    NoRouteApplicable(String),

    /// The spectral sup could not be pinned at a finite mode index.
    #[error("spectral tail not certified: {0}")]
    TailNotCertified(String),

    /// A function exceeds the band limit of the spectrum acting on it.
    #[error("band limit exceeded: {0}")]
    BandLimitExceeded(String),

    /// A log-based functional received a function that is not strictly positive.
    #[error("function not strictly positive: {0}")]
    NonPositive(String),

    /// Finite-difference step too large for the requested accuracy.
    #[error("finite-difference step too large: {0}")]
    StepTooLarge(String),

    /// Operation requires a continuously differentiable kernel.
    #[error("kernel not smooth: {0}")]
    KernelNotSmooth(String),

    /// Every sampled test function had a degenerate right-hand side.
    #[error("all sampled test functions degenerate: {0}")]
    AllDegenerate(String),

    /// Evolved function lost positivity (band-limit artifact).
    #[error("positivity lost along the flow: {0}")]
    PositivityLost(String),
}
