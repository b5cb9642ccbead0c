use thiserror::Error;

/// Errors raised by the design, simulation, counterfactual and bnAb scoring engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("null and alternative hazard ratios are equal; required events are unbounded")]
    DegenerateHypotheses,

    #[error("allocation: both arm shares must be positive, got {arm1}:{arm2}")]
    InvalidAllocation { arm1: u32, arm2: u32 },

    #[error("n_total: need at least 2 participants, got {0}")]
    InvalidSize(usize),

    #[error("no events observed; log-rank statistic undefined")]
    NoEvents,

    #[error("control arm has no events; rate ratio undefined")]
    NoControlEvents,

    #[error("theta_c must be positive for the averted infections ratio")]
    ThetaCZero,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("window of {window_days} days does not cover the last dose on day {last_dose_day}")]
    GridTooShort { window_days: u32, last_dose_day: f64 },

    #[error("no antibody has a finite IC50 against this virus")]
    NoSensitiveAntibody,

    #[error("virus panel is missing IC80 values for: {}", format_pairs(.missing))]
    PanelIncomplete { missing: Vec<(String, String)> },

    #[error("root finding failed: {0}")]
    NonConvergence(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(v, a)| format!("({v}, {a})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::NonConvergence(_) => 4,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
