//! Crate-wide error type shared by the exact and numeric modules.

use core::fmt;

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Error raised by an operation whose preconditions were violated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Inversion of the zero series was requested.
    ZeroSeries,
    /// A product-family factor was given a non-positive stride.
    NonPositiveStride { stride: i64 },
    /// A factor of the form `(1 - 1)^k` with negative `k` appeared in a product family.
    ZeroFactorInverse,
    /// A coefficient comparison was requested past the truncation order of an input.
    OrderBeyondTruncation { requested: i64, available: i64 },
    /// Exponent regrading would leave the fixed 1/16 grading grid.
    ExponentNotDivisible { exponent_units: i64, divisor: i64 },
    /// An argument that must be a positive integer was zero or negative.
    NonPositiveArgument { name: &'static str, value: i64 },
    /// An argument that must be nonnegative was negative.
    NegativeArgument { name: &'static str },
    /// A variable index fell outside `1..=2m`.
    VarIndexOutOfRange { index: usize, vars: usize },
    /// An evaluation point had the wrong number of coordinates.
    PointLengthMismatch { expected: usize, got: usize },
    /// A cone vector outside both the negative cone and the cusp set was used.
    InvalidConeClass,
    /// The gl-family identity is defined only for odd m at least 3.
    GlRankUnsupported { m: usize },
    /// A theta evaluation was requested outside the upper half-plane.
    NonPositiveImaginaryPart,
    /// A theta parameter pack violated one of its construction invariants.
    InvalidThetaSpec { reason: &'static str },
    /// A truncated lattice sum failed its internal convergence check.
    ConvergenceFailure { what: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroSeries => write!(f, "cannot invert the zero series"),
            Error::NonPositiveStride { stride } => {
                write!(f, "product-family stride must be positive, got {stride}")
            }
            Error::ZeroFactorInverse => {
                write!(f, "product family contains the factor 0 raised to a negative power")
            }
            Error::OrderBeyondTruncation { requested, available } => write!(
                f,
                "comparison up to {requested} exponent-units exceeds a truncation order of {available}"
            ),
            Error::ExponentNotDivisible { exponent_units, divisor } => write!(
                f,
                "exponent {exponent_units} units is not divisible by {divisor}"
            ),
            Error::NonPositiveArgument { name, value } => {
                write!(f, "{name} must be a positive integer, got {value}")
            }
            Error::NegativeArgument { name } => write!(f, "{name} must be nonnegative"),
            Error::VarIndexOutOfRange { index, vars } => {
                write!(f, "variable index {index} outside 1..={vars}")
            }
            Error::PointLengthMismatch { expected, got } => {
                write!(f, "evaluation point has {got} coordinates, expected {expected}")
            }
            Error::InvalidConeClass => {
                write!(f, "cone vector lies in neither the negative cone nor the cusp set")
            }
            Error::GlRankUnsupported { m } => {
                write!(f, "gl identity is defined only for odd m >= 3, got m = {m}")
            }
            Error::NonPositiveImaginaryPart => {
                write!(f, "tau must lie in the upper half-plane")
            }
            Error::InvalidThetaSpec { reason } => write!(f, "invalid theta parameters: {reason}"),
            Error::ConvergenceFailure { what } => {
                write!(f, "{what} failed its internal convergence check")
            }
        }
    }
}

impl core::error::Error for Error {}
