use std::fmt;
use std::io;

/// Everything that can go wrong in the library.
///
/// Variants are grouped by failure class rather than by module so the CLI can
/// map them onto exit codes without inspecting message strings.
#[derive(Debug)]
pub enum Error {
    /// Vector or matrix dimensions do not agree.
    DimensionMismatch { expected: usize, got: usize },
    /// Input is structurally valid but numerically unusable, e.g. a zero
    /// vector handed to the normalizer or a training set with zero spread.
    DegenerateInput(String),
    /// A parameter is outside its documented domain, or two options conflict.
    Validation(String),
    /// An iterative solver ran out of its iteration budget before reaching
    /// its stopping tolerance. `gap` is the stationarity measure at the last
    /// iterate.
    Convergence { iterations: u64, gap: f64 },
    /// The homotopy path hit an active set too ill-conditioned to continue.
    PathBreakdown { lambda: f64, condition: f64 },
    /// A feature file line failed to parse. Line numbers are 1-based and
    /// count the header.
    Parse { line: usize, message: String },
    /// A model file is corrupt: bad magic, wrong version, truncation, or
    /// trailing bytes.
    ModelFile(String),
    /// A claimed identity has no model in a client-specific registry.
    UnknownClient(String),
    /// Training failed for one client; `message` carries the underlying
    /// cause so a batch failure still names the culprit.
    ClientTraining { client: String, message: String },
    /// Score data violates a structural assumption, e.g. one video carrying
    /// both real and attack frames.
    DataIntegrity(String),
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::DegenerateInput(msg) => write!(f, "degenerate input: {msg}"),
            Error::Validation(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Convergence { iterations, gap } => {
                write!(f, "no convergence after {iterations} iterations (gap {gap:e})")
            }
            Error::PathBreakdown { lambda, condition } => write!(
                f,
                "homotopy path breakdown at lambda {lambda:e}: active set condition estimate {condition:e}"
            ),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::ModelFile(msg) => write!(f, "model file error: {msg}"),
            Error::UnknownClient(id) => write!(f, "no model enrolled for client {id}"),
            Error::ClientTraining { client, message } => {
                write!(f, "training failed for client {client}: {message}")
            }
            Error::DataIntegrity(msg) => write!(f, "data integrity error: {msg}"),
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

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}
