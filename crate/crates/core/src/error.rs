use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("scalar curvature undefined at r = {r}: {reason}")]
    CurvatureDefect { r: f64, reason: String },
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("root finding failure: {0}")]
    Root(String),
    #[error("fit failure: {0}")]
    Fit(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("empty sublevel set at t = {0}")]
    EmptySublevel(f64),
    #[error("flow failed on family member {index}: {source}")]
    Member {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}
