use thiserror::Error;

/// Errors raised by the numerical kernels, the secrecy layer and the
/// Monte-Carlo oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("series for {what} did not converge within {iterations} iterations")]
    Convergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("truncated series did not meet its tail criterion within {max_terms} terms")]
    Truncation { max_terms: usize },

    #[error("d_{j} has imaginary residue {imag:e} against real part {real:e}")]
    ImaginaryResidue { j: usize, real: f64, imag: f64 },

    #[error("{what} overflowed the f64 range")]
    Overflow { what: &'static str },

    #[error("adaptive quadrature failed to reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error(
        "only {survivors} samples satisfied the reliability condition (need at least {required})"
    )]
    InsufficientConditioningSamples { survivors: u64, required: u64 },

    #[error("secrecy outage probability underflowed to zero at {avg_snr_db} dB")]
    Underflow { avg_snr_db: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
