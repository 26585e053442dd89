use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} is in collision")]
    InCollision { what: String },

    #[error("time limit of {0:.1} s exceeded")]
    Timeout(f64),

    #[error("no path for robot {robot}")]
    Infeasible { robot: usize },

    #[error("search space exhausted without a solution")]
    NoSolution,

    #[error("parameter {value} outside [0, {max}]")]
    OutOfRange { value: f64, max: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
