use thiserror::Error;

use crate::profile::ValidationReport;

pub type Result<T> = std::result::Result<T, DefireError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DefireError {
    #[error("epsilon out of range: epsilon = {epsilon} must lie in (0, 1/eta) with eta = {eta}")]
    EpsilonOutOfRange { epsilon: f64, eta: f64 },

    #[error("eta out of range: eta = {0} must lie in (0, 1)")]
    EtaOutOfRange(f64),

    #[error("malformed profile: {0}")]
    MalformedProfile(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(ValidationReport),

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("cluster index {index} out of range for {count} clusters")]
    ClusterOutOfRange { index: usize, count: usize },

    #[error("rotation {k} out of range for {count} clusters")]
    RotationOutOfRange { k: usize, count: usize },

    #[error("partitions cannot be compared: total lengths {left} and {right} differ")]
    PartitionMismatch { left: f64, right: f64 },

    #[error("internal consistency: every cluster would fire together (full synchrony)")]
    FullSynchrony,

    #[error("cycle did not close within {cap} firings")]
    CycleCapExceeded { cap: usize },

    #[error("{requested} cycles requested, cap is {cap}")]
    CycleLimitExceeded { requested: usize, cap: usize },

    #[error("no firing found before horizon {horizon}")]
    NoFiringWithinHorizon { horizon: f64 },

    #[error("time {t} lies beyond the simulated horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("outside applicability regime: cluster {cluster} has firing time {time} above its level {level}")]
    OutsideApplicability {
        cluster: usize,
        time: f64,
        level: f64,
    },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("contraction ratio {ratio} exceeds the bound {bound}")]
    ContractionBoundExceeded { ratio: f64, bound: f64 },

    #[error("product radius {value} exceeds the ratio bound {bound}")]
    RatioBoundExceeded { value: f64, bound: f64 },

    #[error("at least {required} clusters are required, got {got}")]
    TooFewClusters { required: usize, got: usize },

    #[error("not enough usable data points ({points})")]
    InsufficientData { points: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
