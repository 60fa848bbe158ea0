use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("sort mismatch: {0}")]
    Sort(String),
    #[error("unknown symbol '{0}'")]
    UnknownSymbol(String),
    #[error("unbound variable x{0}")]
    Unbound(u32),
    #[error("no declared modulus for '{0}'")]
    NoModulus(String),
    #[error("modulus violation: {0}")]
    ModulusViolation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("parameter cap exceeded: {0}")]
    Cap(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
