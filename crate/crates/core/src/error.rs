use std::path::PathBuf;

/// Errors produced by the correspondence pipeline.
///
/// Variants are grouped by how a caller is expected to react: parse and
/// validation problems are input faults, `Infeasible` is a property of the
/// constrained assignment, and `Internal` flags a broken invariant.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size cap exceeded: {what} needs {requested}x{requested}, cap is {cap}; use column-wise access instead")]
    SizeCap {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("infeasible assignment: {0}")]
    Infeasible(Infeasibility),

    #[error("auction did not converge after {rounds} bids (epsilon reached {eps:e})")]
    NotConverged { rounds: u64, eps: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

/// Evidence that a masked assignment problem has no perfect matching.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    /// A row with no allowed column at all.
    EmptyRow {
        row: usize,
        /// Nearest coarse samples of the offending row, when known.
        nearest_coarse: Vec<usize>,
        hint: String,
    },
    /// Hall violation: `rows` together reach only `columns`, and
    /// `columns.len() < rows.len()`.
    Hall {
        rows: Vec<usize>,
        columns: Vec<usize>,
    },
}

impl std::fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Infeasibility::EmptyRow {
                row,
                nearest_coarse,
                hint,
            } => write!(
                f,
                "row {row} has no allowed column (nearest coarse samples {nearest_coarse:?}); {hint}"
            ),
            Infeasibility::Hall { rows, columns } => write!(
                f,
                "{} rows {:?} can only reach {} columns {:?}",
                rows.len(),
                Truncated(rows),
                columns.len(),
                Truncated(columns)
            ),
        }
    }
}

struct Truncated<'a>(&'a [usize]);

impl std::fmt::Debug for Truncated<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        const SHOW: usize = 16;
        if self.0.len() <= SHOW {
            write!(f, "{:?}", self.0)
        } else {
            write!(f, "{:?}..(+{})", &self.0[..SHOW], self.0.len() - SHOW)
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
