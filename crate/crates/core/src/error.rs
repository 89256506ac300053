use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },
    #[error("resource guard in {op}: {msg}")]
    Guard { op: &'static str, msg: String },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(op: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain {
        op,
        msg: msg.into(),
    })
}

pub(crate) fn guard<T>(op: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(Error::Guard {
        op,
        msg: msg.into(),
    })
}
