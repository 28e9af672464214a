use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    /// `C x <= 1`: the abscissa is outside the range of the regressor curve.
    #[error("abscissa x = {x} is outside the curve range (C x must exceed 1)")]
    CurveDomain { x: f64 },

    #[error("invalid design space: {0}")]
    InvalidSpace(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    /// The mean time `exp(L*phi^2)/C - 1` is not positive at `phi`.
    #[error("non-positive mean time at phi = {phi} (C = {c}, L = {l})")]
    Domain { phi: f64, c: f64, l: f64 },

    /// `T0` does not exceed `max(0, (1 - C)/C)`, so `log(C(T0 + 1)) <= 0`.
    #[error("threshold T0 = {t0} must exceed {lower}")]
    Threshold { t0: f64, lower: f64 },

    #[error("invalid probability threshold: {0}")]
    Probability(String),

    /// `c` is not in the range of the information matrix.
    #[error("c-vector is not estimable under the design")]
    Inestimable,

    /// The c-line is parallel to the hull side it should cross.
    #[error("c-line is parallel to hull segment {segment}")]
    ParallelCrossing { segment: u8 },

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("invalid simulation config: {0}")]
    Config(String),

    #[error("{failed} of {total} replicates were degenerate (limit {limit})")]
    ExcessiveFailures {
        failed: usize,
        total: usize,
        limit: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
