use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Every Markov parameter `C A^i B` for `i <= n` vanished.
    #[error("zero transfer function: C A^i B vanishes for all i <= {0}")]
    ZeroTransferFunction(usize),

    #[error("degenerate realization: {0}")]
    DegenerateRealization(String),

    #[error("unsupported shape parameter p = {0} (need p >= 1)")]
    UnsupportedShape(f64),

    #[error("invalid norm order {0} (need p >= 1 or inf)")]
    InvalidOrder(String),

    #[error("invalid disturbance: {0}")]
    InvalidDisturbance(String),

    #[error("spectrum not log-integrable: S = {value} at grid index {index}")]
    SpectrumNotLogIntegrable { index: usize, value: f64 },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("closed loop is unstable: all {0} trajectories diverged")]
    UnstableLoop(usize),

    #[error("certification refused: {0}")]
    CertificationRefused(String),

    #[error("empirical norm of an empty sample")]
    EmptySamples,
}
