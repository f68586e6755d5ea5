use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Feasibility status stayed undecided inside the bisection bracket.
    #[error("solver undecided for alpha in [{lo}, {hi}]{}", context_suffix(.context))]
    Undecided {
        lo: f64,
        hi: f64,
        context: Option<String>,
    },

    #[error("stationarity unresolved: residual {residual:e}")]
    StationarityUnresolved { residual: f64 },

    #[error("enhanced noise check failed ({check}): violation {violation:e}")]
    Enhancement { check: &'static str, violation: f64 },

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("{key}: {msg}")]
    Parse { key: String, msg: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" ({c})"),
        None => String::new(),
    }
}

/// Exit categories reported by the command-line front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Parse,
    InfeasibleModel,
    Solver,
    Io,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Parse => "PARSE",
            Category::InfeasibleModel => "INFEASIBLE-MODEL",
            Category::Solver => "SOLVER",
            Category::Io => "IO",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Category::Parse => 2,
            Category::InfeasibleModel => 3,
            Category::Solver => 4,
            Category::Io => 5,
        }
    }
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Parse { .. } => Category::Parse,
            Error::Io(_) => Category::Io,
            Error::Undecided { .. }
            | Error::StationarityUnresolved { .. }
            | Error::Enhancement { .. }
            | Error::Internal(_) => Category::Solver,
            Error::DimensionMismatch { .. }
            | Error::NotPositiveDefinite(_)
            | Error::Singular(_)
            | Error::InvalidInput(_)
            | Error::Unsupported(_) => Category::InfeasibleModel,
        }
    }
}
