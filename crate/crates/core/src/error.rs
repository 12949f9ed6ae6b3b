use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model or solver parameter violates its documented range.
    InvalidParameter { name: &'static str, reason: String },
    /// A grid does not satisfy its size or geometry invariants.
    InvalidGrid(String),
    /// Two inputs were expected to live on the same grid.
    GridMismatch(&'static str),
    /// The capacity annulus `a_eps <= r <= eps/4` is empty.
    AnnulusCollapsed { eps: f64 },
    /// The closed-form capacity constant disagrees with the cell oracle.
    CapacityMismatch { formula: f64, oracle: f64 },
    /// A tridiagonal system hit a zero pivot. The operators solved here are
    /// coercive, so this indicates a defect rather than bad input.
    SingularSystem(&'static str),
    /// NaN or infinity appeared inside an iterative solve.
    NonFinite(&'static str),
    UnknownOperator(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::GridMismatch(what) => write!(f, "grid mismatch: {what}"),
            Error::AnnulusCollapsed { eps } => {
                write!(f, "capacity annulus collapses for eps = {eps}")
            }
            Error::CapacityMismatch { formula, oracle } => write!(
                f,
                "capacity constant {formula} disagrees with cell oracle {oracle}"
            ),
            Error::SingularSystem(what) => write!(f, "singular system in {what}"),
            Error::NonFinite(stage) => write!(f, "non-finite values in {stage}"),
            Error::UnknownOperator(tag) => write!(f, "unknown time operator `{tag}`"),
        }
    }
}

impl core::error::Error for Error {}
