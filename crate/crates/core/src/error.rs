use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsrError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("requested a {requested}-dimensional basis but the numerical rank is {rank}")]
    RankDeficient { requested: usize, rank: usize },

    /// The complement-projected measurements vanished while the current
    /// labels still do not fit. Usually means the threshold is too tight.
    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("no signal component found above the noise floor")]
    NoSignal,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = JsrError> = std::result::Result<T, E>;
