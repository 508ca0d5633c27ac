use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point {x} lies outside the domain [{start}, {end}]")]
    OutOfDomain { x: f64, start: f64, end: f64 },
    #[error("not a density: {0}")]
    NotADensity(String),
    #[error("parameter `{name}` out of range: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("curves live on different domains")]
    DomainMismatch,
    #[error("need at least {need} items, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("node {0} configured twice")]
    DuplicateNode(&'static str),
    #[error("retry budget of {0} attempts exhausted")]
    RetriesExhausted(usize),
}

pub(crate) fn param(name: &'static str, value: f64) -> Error {
    Error::InvalidParameter { name, value }
}
