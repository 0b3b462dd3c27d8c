use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("point pattern is empty")]
    EmptyPattern,

    #[error("pattern too small for {what}: {reason}")]
    UndersizedPattern { what: &'static str, reason: String },

    #[error("no base stations in the window")]
    NoBaseStations,

    #[error("quadrature did not converge (estimated error {achieved:.3e}, requested {requested:.3e})")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field, reason: reason.into() }
    }
}
