use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid instance (n={n}, alpha={alpha}, c={c}): {reason}")]
    InvalidInstance {
        n: usize,
        alpha: f64,
        c: f64,
        reason: String,
    },

    #[error("hamming weight {value} out of range 0..={n}")]
    WeightOutOfRange { value: usize, n: usize },

    #[error("interpolation parameter s={0} outside [0, 1]")]
    ScheduleOutOfRange(f64),

    #[error("malformed tridiagonal operator: {0}")]
    MalformedOperator(String),

    #[error("ground state degenerate at s={s}: gap {gap:e} below resolution")]
    DegenerateGap { s: f64, gap: f64 },

    #[error("gap minimum at scan boundary s={s}; cannot bracket for refinement")]
    MinimumAtBoundary { s: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scaling series needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("duplicate or non-increasing system size {0} in scaling series")]
    DegenerateSpacing(usize),

    #[error("configuration has zero Boltzmann weight at s={s}")]
    ZeroWeight { s: f64 },

    #[error("annealing stalled at s={s} after {sweeps} sweeps")]
    AnnealTimeout { s: f64, sweeps: u64 },

    #[error("oracle size limit exceeded: {0}")]
    OracleTooLarge(String),

    #[error("no valid system sizes for alpha={alpha}, c={c} in {n_min}..={n_max}")]
    EmptySizeRange {
        alpha: f64,
        c: f64,
        n_min: usize,
        n_max: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("replica {replica}: {source}")]
    Replica {
        replica: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable snake_case tag for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInstance { .. } => "invalid_instance",
            Error::WeightOutOfRange { .. } => "weight_out_of_range",
            Error::ScheduleOutOfRange(_) => "schedule_out_of_range",
            Error::MalformedOperator(_) => "malformed_operator",
            Error::DegenerateGap { .. } => "degenerate_gap",
            Error::MinimumAtBoundary { .. } => "minimum_at_boundary",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::TooFewPoints { .. } => "too_few_points",
            Error::DegenerateSpacing(_) => "degenerate_spacing",
            Error::ZeroWeight { .. } => "zero_weight",
            Error::AnnealTimeout { .. } => "anneal_timeout",
            Error::OracleTooLarge(_) => "oracle_too_large",
            Error::EmptySizeRange { .. } => "empty_size_range",
            Error::Config(_) => "config",
            Error::Replica { source, .. } => source.kind(),
            Error::Io(_) => "io",
        }
    }
}
