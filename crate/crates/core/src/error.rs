use std::fmt;

/// Errors raised anywhere in the library.
#[derive(Debug)]
pub enum Error {
    /// A caller-supplied argument violates a precondition (sizes, ranges).
    Argument(String),
    /// A parameter lies outside the mathematical domain of an operation
    /// (e.g. |d| >= 1/2, non-invertible MA polynomial).
    Domain(String),
    /// A numerical procedure failed (non-positive prediction variance,
    /// rejection-sampling cap exceeded, failed factorisation).
    Numerical(String),
    /// The requested combination of options is not supported
    /// (e.g. Gibbs updates with non-Gaussian innovations).
    Unsupported(String),
    /// Invalid run configuration (CLI / config file level).
    Config(String),
    /// Bad input data (unparseable, non-finite, empty).
    Data(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Argument(m) => write!(f, "invalid argument: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Numerical(m) => write!(f, "numerical failure: {m}"),
            Error::Unsupported(m) => write!(f, "unsupported operation: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Data(m) => write!(f, "data error: {m}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Domain(_) | Error::Unsupported(_) | Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}
