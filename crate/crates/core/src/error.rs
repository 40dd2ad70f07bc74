use thiserror::Error;

/// Errors raised by the simulation, demodulation and analysis layers.
///
/// Each variant names the precondition it guards so that front ends can surface the rule.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Nyquist rule violated: {frequency} Hz requires a sample rate above {required} Hz (have {sample_rate} Hz)")]
    Nyquist {
        frequency: f64,
        sample_rate: f64,
        required: f64,
    },

    #[error("time {t} s lies outside the sequence period [0, {period}) s")]
    OutsidePeriod { t: f64, period: f64 },

    #[error("negative angular frequency {0} rad/s")]
    NegativeFrequency(f64),

    #[error("even-N rule violated: pair rate / delta_f = {ratio} must be an even integer >= 4")]
    OddSamplesPerCycle { ratio: f64 },

    #[error("reference index k = {k} is out of band: |f - k/T_seq| = {offset} Hz exceeds half the sampling rate {half_rate} Hz")]
    OutOfBand { k: i64, offset: f64, half_rate: f64 },

    #[error("sample-rate mismatch: series at {actual} Hz, expected {expected} Hz")]
    RateMismatch { expected: f64, actual: f64 },

    #[error("phase undefined: fitted amplitude {amplitude} is below the resolution floor")]
    PhaseUndefined { amplitude: f64 },

    #[error("infeasible section plan: {0}")]
    InfeasiblePlan(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("audio I/O: {0}")]
    Audio(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
