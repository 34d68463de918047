use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Malformed input bytes or text.
    #[error("format error: {0}")]
    Format(String),
    /// Inputs that are individually valid but disagree with each other.
    #[error("consistency error: {0}")]
    Consistency(String),
    /// Invalid parameters.
    #[error("config error: {0}")]
    Config(String),
    /// Data that cannot support the requested operation.
    #[error("data error: {0}")]
    Data(String),
    /// Non-finite values where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A computation that has no meaningful answer for the given input.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}

pub(crate) use bail;
