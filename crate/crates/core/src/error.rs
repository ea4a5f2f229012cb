use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty region")]
    EmptyRegion,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point ({0}, {1}) lies outside the grid")]
    OutsideGrid(f64, f64),
    #[error("disk not contained in domain")]
    DiskNotContained,
    #[error("rescaling window lies entirely outside the source grid")]
    WindowOutside,
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("disconnected: no path between the given points")]
    Disconnected,
    #[error("space has {0} points; exact Gromov-Hausdorff search is capped at {1}, use gh_bounds")]
    TooLarge(usize, usize),
    #[error("metric space invariant violated: {0}")]
    NotAMetric(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
