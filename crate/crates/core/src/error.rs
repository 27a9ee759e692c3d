use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("duplicate factor label `{0}`")]
    DuplicateLabel(String),
    #[error("invalid factor `{label}`: {reason}")]
    InvalidFactor { label: String, reason: String },
    #[error("unknown factor label `{0}`")]
    UnknownLabel(String),
    #[error("operators live on different spaces")]
    SpaceMismatch,
    #[error("hamiltonian is not hermitian (max deviation {deviation:e})")]
    NonHermitian { deviation: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate steady state")]
    DegenerateSteadyState,
    #[error("steady state not converged (residual {residual:e})")]
    SteadyStateNotConverged { residual: f64 },

    #[error("propagation failed at t = {t:e} (step size underflow)")]
    PropagationFailed { t: f64 },
    #[error("propagation diverged")]
    PropagationDiverged,
    #[error("invalid delay grid: {0}")]
    InvalidDelays(String),
    #[error("normalization undefined (zero population)")]
    NormalizationUndefined,

    #[error("sensor back-action regime: sensor {index} has epsilon {epsilon:e} >= bound {bound:e}")]
    SensorBackAction { index: usize, epsilon: f64, bound: f64 },
    #[error("sensor starved (no emission at omega = {omega}): sensor {index} population {population:e}")]
    SensorStarved { index: usize, omega: f64, population: f64 },
    #[error("epsilon too large: sensor {index} population {population:e} exceeds 1e-3")]
    EpsilonTooLarge { index: usize, population: f64 },
    #[error("epsilon not converged after {halvings} halvings (last relative change {last_change:e}, values {values:?})")]
    EpsilonNotConverged { halvings: usize, last_change: f64, values: Vec<f64> },

    #[error("resolvent singular at shift {re:e}{im:+e}i")]
    ResolventSingular { re: f64, im: f64 },
    #[error("oracle restricted to small systems (Liouville dimension {dim} > 4096)")]
    OracleTooLarge { dim: usize },
    #[error("defective Liouvillian (eigenvector matrix ill-conditioned, reconstruction error {error:e})")]
    DefectiveLiouvillian { error: f64 },
    #[error("eigendecomposition failed")]
    EigenFailed,

    #[error("transition overdamped at rung {0}")]
    TransitionOverdamped(u32),
    #[error("no steady state (thermal divergence)")]
    ThermalDivergence,

    #[error("checkpoint unreadable: {0}")]
    CheckpointUnreadable(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
