use thiserror::Error;

/// Errors raised by the simulation models.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vanishing transverse coherence (|<F+>| = {0:e})")]
    VanishingCoherence(f64),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("unstable drift: {0}")]
    Unstable(String),
    #[error("step size underflow at t = {t:e} s (h = {h:e} s)")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state encountered at t = {0:e} s")]
    NonFinite(f64),
    #[error("did not converge: {0}")]
    NotConverged(String),
    #[error("phase slope vanishes; drive is off resonance")]
    VanishingSlope,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad inputs rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::DimensionMismatch { .. } | Error::Infeasible(_)
        )
    }
}
