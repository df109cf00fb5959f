use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("{path}: {message}")]
    Invalid { path: String, message: String },

    #[error("{path}: unknown modulation format `{name}`")]
    UnknownModulation { path: String, name: String },

    #[error("lightpaths `{first}` and `{second}` both occupy grid slot {slot}")]
    DuplicateSlot {
        slot: i64,
        first: String,
        second: String,
    },

    #[error("tau = {tau} years lies outside the lifetime [{tau0}, {tau_end}]")]
    TauOutOfRange { tau: f64, tau0: f64, tau_end: f64 },

    #[error("channel index {index} out of range for {len} channels")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("channel {0} has zero bandwidth")]
    ZeroBandwidth(usize),

    #[error("channels {i} and {j} overlap on the frequency grid")]
    GridViolation { i: usize, j: usize },

    #[error("channel {0} has zero total noise PSD")]
    ZeroNoise(usize),

    #[error("pairwise parcel update needs at least two channels, got {0}")]
    TooFewChannels(usize),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("initial power vector is infeasible: {0}")]
    InfeasibleStart(String),

    #[error("reference power vector is zero")]
    ZeroReference,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("power must be positive and finite, got {0}")]
    NonPositivePower(f64),

    #[error("parameter grid is empty")]
    EmptyGrid,

    #[error("objective returned a non-finite value at {0}")]
    NonFiniteObjective(f64),

    #[error("unknown route `{0}`")]
    UnknownRoute(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}
