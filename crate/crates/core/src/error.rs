use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field length {found} does not match expected {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("field is not in the Dirichlet class: node {node} has value {value}")]
    BoundaryViolation { node: usize, value: f64 },

    #[error("invalid exponent field: {0}")]
    InvalidExponent(String),

    #[error("exponents are not conjugate at node {node}: 1/p + 1/q = {sum}")]
    ConjugacyViolation { node: usize, sum: f64 },

    #[error("bisection did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("syntax error at position {pos}: expected {}, found {found}", expected.join(" | "))]
    Syntax {
        pos: usize,
        expected: Vec<String>,
        found: String,
    },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("domain error at node {node} {coords:?}: {message}")]
    Domain {
        node: usize,
        coords: Vec<f64>,
        message: String,
    },

    #[error("no negative direction found down to t = 2^-{0}")]
    NoNegativeDirection(u32),

    #[error("all samples were degenerate")]
    DegenerateSamples,

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("configuration error: {0}")]
    Config(String),
}
