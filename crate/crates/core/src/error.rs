use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("grid too coarse: need at least {needed} nodes, got {got}")]
    GridTooCoarse { needed: usize, got: usize },

    #[error("value {value} lies outside the profile domain [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("singular tridiagonal system at row {row}")]
    SingularSystem { row: usize },

    #[error("monotonicity lost at node {node}: increment {increment:e}")]
    Monotonicity { node: usize, increment: f64 },

    #[error("time {t} is at or beyond the barrier blow-up time {t_star}")]
    BeyondBlowupTime { t: f64, t_star: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("infeasible concentration threshold: {0}")]
    Infeasible(String),

    #[error("incompatible probe lattices: {0}")]
    IncompatibleLattice(String),

    #[error("step budget of {0} steps exhausted")]
    StepLimit(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
