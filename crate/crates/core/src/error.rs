use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Every violated constraint is listed, one per entry.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("malformed configuration: {0}")]
    Syntax(String),

    #[error("non-finite value in field `{field}` at t = {t}, x = ({}, {})", location[0], location[1])]
    BlowupDetected {
        t: f64,
        location: [f64; 2],
        field: String,
    },

    #[error("slice s = {0} was not fully swept by the evolution")]
    PartialSlice(f64),

    #[error("decay fit needs positive values, found {value} at s = {s}")]
    NonPositive { s: f64, value: f64 },

    #[error("need at least {needed} rows, found {found}")]
    InsufficientRows { needed: usize, found: usize },

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }
}
