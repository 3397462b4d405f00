use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid parameters do not describe a valid lattice.
    InvalidGrid(&'static str),
    /// Two operands live on different grids.
    GridMismatch,
    /// Input samples or parameters are malformed.
    InvalidInput(String),
    /// An exponent sample is non-positive or non-finite.
    InvalidExponent { index: usize, value: f64 },
    ConjugateUndefined { p_minus: f64 },
    ShiftUndefined { alpha: f64, p_plus: f64 },
    /// A scaled kernel has fewer than four samples across its support.
    UnderResolved { samples: f64 },
    /// Gram matrix of a polynomial projection is numerically singular.
    IllConditioned { condition: f64 },
    /// A cube does not carry enough cells to fit polynomials of the degree.
    DegenerateCube { cells: usize, needed: usize },
    DegreeTooLow { degree: usize, required: usize },
    EmptyDictionary,
    /// A constructed object failed one of its defining invariants.
    ConstructionFailure(String),
    BudgetInfeasible { achievable: f64, requested: f64 },
    /// Exponent outside the range where the operation is defined.
    Regime(String),
    /// Kernel magnitude exceeds what the lattice can integrate.
    Resolution(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::GridMismatch => write!(f, "operands live on different grids"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::InvalidExponent { index, value } => {
                write!(f, "invalid exponent sample {value} at index {index}")
            }
            Error::ConjugateUndefined { p_minus } => {
                write!(f, "conjugate exponent undefined: p_minus = {p_minus} <= 1")
            }
            Error::ShiftUndefined { alpha, p_plus } => write!(
                f,
                "Sobolev shift undefined: alpha/n = {alpha} is not below 1/p_plus with p_plus = {p_plus}"
            ),
            Error::UnderResolved { samples } => {
                write!(f, "scaled kernel under-resolved ({samples:.2} samples across support)")
            }
            Error::IllConditioned { condition } => {
                write!(f, "ill-conditioned projection (condition number {condition:.3e})")
            }
            Error::DegenerateCube { cells, needed } => {
                write!(f, "degenerate cube: {cells} cells, {needed} needed")
            }
            Error::DegreeTooLow { degree, required } => {
                write!(f, "moment degree {degree} below required {required}")
            }
            Error::EmptyDictionary => write!(f, "test-function dictionary is empty"),
            Error::ConstructionFailure(msg) => write!(f, "construction failure: {msg}"),
            Error::BudgetInfeasible { achievable, requested } => write!(
                f,
                "remainder budget infeasible: best achievable {achievable:.3e}, requested {requested:.3e}"
            ),
            Error::Regime(msg) => write!(f, "exponent regime error: {msg}"),
            Error::Resolution(msg) => write!(f, "resolution error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
