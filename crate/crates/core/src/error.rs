use thiserror::Error;

/// Errors raised by state construction, channel maps, series evaluation and
/// the probe simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A truncation dimension of zero was requested.
    #[error("invalid truncation dimension {0}")]
    InvalidDimension(usize),

    /// Two operands live in Fock spaces of different truncation.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The normalization of a superposition vanishes.
    #[error("degenerate state: normalization denominator {0:e}")]
    DegenerateState(f64),

    /// A matrix or distribution violates a physical invariant beyond round-off.
    #[error("unphysical state: {0}")]
    UnphysicalState(String),

    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The Fock truncation cannot hold the displaced state.
    #[error("insufficient truncation: displaced state loses {loss:e} of its trace (limit {limit:e}) at dim {dim}")]
    InsufficientTruncation { loss: f64, limit: f64, dim: usize },

    /// The weighted photon-number series cannot be certified as converged.
    #[error("truncation-unsafe series: tail bound {bound:e} exceeds {limit:e}")]
    TruncationUnsafe { bound: f64, limit: f64 },

    /// The inversion-trace sampling is too coarse for the requested cutoff.
    #[error("sampling too coarse: m_max {m_max} needs more than {samples} samples")]
    SamplingTooCoarse { m_max: usize, samples: usize },

    /// A generalized Rabi frequency vanishes in the exact inversion formula.
    #[error("degenerate Rabi frequency for photon number {0}")]
    DegenerateRabi(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
