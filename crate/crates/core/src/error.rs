use std::path::PathBuf;

/// Errors produced by mesh generation, assembly, solvers and filters.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("conjugate gradient did not converge in {iterations} iterations (relative gradient {relative_gradient:.3e})")]
    IterationLimit {
        iterations: usize,
        relative_gradient: f64,
        /// Last control iterate, flattened as `[f, g, h]`.
        last_iterate: Vec<f64>,
    },

    #[error("no admissible alpha on the dyadic grid after {} trials", trace.len())]
    NoAdmissibleAlpha {
        /// `(alpha, residual)` for every trial, in walk order.
        trace: Vec<(f64, f64)>,
    },

    #[error("parse error in {path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
