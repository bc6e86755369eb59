//! TODO
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("stub")]
    Stub,
}
#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("stub")]
    Stub,
    #[error("no bracket")]
    NoBracket { lo: f64, hi: f64 },
}
