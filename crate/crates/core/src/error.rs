use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported quadrature degree {degree} (maximum {max})")]
    UnsupportedDegree { degree: usize, max: usize },

    #[error("degenerate cell {cell}: area {area:e}")]
    DegenerateCell { cell: usize, area: f64 },

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("eigensolver did not converge after {iterations} iterations; residuals {residuals:?}")]
    NoConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
