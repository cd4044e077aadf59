use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Each variant maps onto one CLI exit code through [`SnlsError::exit_code`].
#[derive(Debug, Error)]
pub enum SnlsError {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("capability exceeded: {0}")]
    Capability(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("numerical instability: {0}")]
    Instability(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl SnlsError {
    /// Short machine-readable tag, used in the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            SnlsError::InvalidField(_) => "invalid_field",
            SnlsError::Parameter(_) => "parameter",
            SnlsError::Dimension(_) => "dimension",
            SnlsError::Capability(_) => "capability",
            SnlsError::Range(_) => "range",
            SnlsError::InsufficientData(_) => "insufficient_data",
            SnlsError::Domain(_) => "domain",
            SnlsError::EmptyInput(_) => "empty_input",
            SnlsError::Instability(_) => "instability",
            SnlsError::Config(_) => "config",
            SnlsError::Format(_) => "format",
            SnlsError::Io(_) => "io",
        }
    }

    /// 0 ok, 2 config/validation, 3 numerical instability, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            SnlsError::Instability(_) => 3,
            SnlsError::Io(_) | SnlsError::Format(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, SnlsError>;
