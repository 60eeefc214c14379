use thiserror::Error;

/// Errors reported by mesh construction, discretization and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is numerically singular at pivot {pivot} (of {dim})")]
    SingularMatrix { pivot: usize, dim: usize },

    #[error("eigensolver did not converge after {restarts} restarts (residual {residual:.3e}, tol {tol:.1e})")]
    NotConverged { restarts: usize, residual: f64, tol: f64 },

    #[error("dominant Ritz value is complex ({re:.6e} + {im:.3e}i); the pencil is not symmetric")]
    ComplexRitzValue { re: f64, im: f64 },

    #[error("eigensolver found no positive eigenvalue")]
    NoPositiveEigenvalue,

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
