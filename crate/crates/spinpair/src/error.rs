//! Error type shared across the toolkit.

use alloc::string::String;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Domain errors. Each variant carries enough context to produce a
/// machine-readable error record at the CLI boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidArgument(String),
    /// A matrix expected to be Hermitian was not (relative Frobenius
    /// deviation above tolerance).
    NonHermitian { deviation: f64 },
    /// Eigenvector labeling was ambiguous: the two best available basis
    /// overlaps differ by less than the tie tolerance.
    DegenerateLabeling { overlap_gap: f64 },
    /// The requested state pair does not undergo flip-flop dynamics at this
    /// field and geometry.
    NoFlipFlop,
    /// Zero flip-flop coupling: no decoupling resonance exists.
    NoResonance,
    /// Zero detuning: no NV-conditional phase accumulates.
    NoConditionalPhase,
    /// Time integration lost unitarity beyond tolerance.
    IntegrationAccuracy { norm_drift: f64 },
    /// No truth-table assignment is consistent with the observations.
    InconsistentObservation,
    /// Every optimizer start diverged.
    FitFailure { n_starts: usize },
    /// The supplied trace is too short for the requested sampling.
    InsufficientData,
    /// A conditional probability was requested on an empty conditioning set.
    UndefinedFidelity,
}

impl Error {
    /// Stable machine-readable name for CLI error records.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::NonHermitian { .. } => "non-hermitian",
            Error::DegenerateLabeling { .. } => "degenerate-labeling",
            Error::NoFlipFlop => "no-flip-flop",
            Error::NoResonance => "no-resonance",
            Error::NoConditionalPhase => "no-conditional-phase",
            Error::IntegrationAccuracy { .. } => "integration-accuracy",
            Error::InconsistentObservation => "inconsistent-observation",
            Error::FitFailure { .. } => "fit-failure",
            Error::InsufficientData => "insufficient-data",
            Error::UndefinedFidelity => "undefined-fidelity",
        }
    }
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonHermitian { deviation } => {
                write!(f, "matrix is not Hermitian (relative deviation {deviation:.3e})")
            }
            Error::DegenerateLabeling { overlap_gap } => {
                write!(f, "ambiguous eigenvector labeling (overlap gap {overlap_gap:.3e})")
            }
            Error::NoFlipFlop => write!(f, "state pair is not coupled by flip-flop dynamics"),
            Error::NoResonance => write!(f, "zero coupling: no resonance"),
            Error::NoConditionalPhase => write!(f, "zero detuning: no conditional phase"),
            Error::IntegrationAccuracy { norm_drift } => {
                write!(f, "integration lost unitarity (norm drift {norm_drift:.3e})")
            }
            Error::InconsistentObservation => {
                write!(f, "no configuration is consistent with the observations")
            }
            Error::FitFailure { n_starts } => {
                write!(f, "all {n_starts} optimizer starts diverged")
            }
            Error::InsufficientData => write!(f, "trace exhausted before requested sampling"),
            Error::UndefinedFidelity => write!(f, "conditioning set is empty"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
