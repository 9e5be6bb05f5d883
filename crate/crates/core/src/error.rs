use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scenario: {field}{}: {reason}", device.map(|d| format!(" (device {d})")).unwrap_or_default())]
    InvalidScenario {
        field: String,
        device: Option<usize>,
        reason: String,
    },

    #[error("failed to parse scenario: {0}")]
    ScenarioParse(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("degenerate pilot: pilot power must be positive")]
    DegeneratePilot,

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("bracketing failed: {0}")]
    Bracket(String),

    #[error("gp parse error at line {line}: {reason}")]
    GpParse { line: usize, reason: String },

    #[error("gp solver failed at iteration {iteration}: {reason}")]
    Solver { iteration: usize, reason: String },

    #[error("singular gram matrix")]
    SingularGram,

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
