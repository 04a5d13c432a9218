use alloc::string::String;

/// Errors raised by the numeric kernels, the network, and the trainers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{what} would need a {rows}x{cols} result ({entries} entries), above the cap of {cap}")]
    EntryCapExceeded {
        what: &'static str,
        rows: usize,
        cols: usize,
        entries: u128,
        cap: usize,
    },

    #[error("{0} is the zero matrix")]
    ZeroMatrix(&'static str),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("descent diverged at iteration {iteration} (objective {objective:e}); try a smaller step")]
    Divergence { iteration: usize, objective: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn ensure_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
