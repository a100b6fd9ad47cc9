use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite log-likelihood at record {index}")]
    NonFiniteRecord { index: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error("chain initialisation failed: {0}")]
    Init(String),

    #[error("no proposal accepted during {steps} burn-in steps")]
    Adaptation { steps: usize },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("optimisation failed: {0}")]
    Optimization(String),

    #[error("rung {rung} (beta {beta_from} -> {beta_to}) has weight ESS {ess:.2} < 10; refine the schedule")]
    DegenerateRung {
        rung: usize,
        beta_from: f64,
        beta_to: f64,
        ess: f64,
    },

    #[error("importance weights degenerate (ESS {ess:.2} < 10)")]
    DegenerateWeights { ess: f64 },

    #[error("root not bracketed: {0}")]
    Bracket(String),

    #[error("log loss is constant in w; no optimal inverse temperature exists")]
    DegenerateModel,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) | Error::Unsupported(_) | Error::Unavailable(_) => 2,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 2,
            _ => 3,
        }
    }
}

/// Non-fatal conditions attached to a result.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// More than 1% of the integrand mass sits in boundary cells of a grid.
    BoundaryMass { fraction: f64 },
    /// Importance weights are usable but thin.
    LowEss { ess: f64 },
}
