use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("LP engine failure: {0}")]
    Engine(String),
}
