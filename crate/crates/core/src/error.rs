//! Error type shared by all modules.

use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// State grid is empty or not strictly increasing.
    InvalidGrid,
    /// A matrix row has a negative entry or its sum drifts from 1 beyond
    /// the 1e-12 construction tolerance.
    NotStochastic { row: usize, sum: f64 },
    /// Two kernels (or a kernel and a vector) live on different grids.
    GridMismatch,
    /// Kernel list length does not match horizon + lookahead - 1.
    LengthMismatch { expected: usize, got: usize },
    /// Step index outside the valid range for this sequence.
    IndexOutOfRange { index: usize },
    /// Coefficient calculus requires a horizon of at least 2.
    HorizonTooShort,
    /// Initial distribution is not a probability vector on the grid.
    InvalidInitial,
    /// Reward tensor dimensions disagree with the grid or lookahead.
    DimensionMismatch,
    /// The exact engine only supports lookahead windows m <= 1; the
    /// conditioning window for larger m is a state tuple and the grid
    /// tensors blow up.
    WindowBlowup { lookahead: usize },
    /// Operation is only defined for lookahead m = 0.
    RequiresZeroLookahead,
    /// Monte Carlo batch must contain at least one replication.
    EmptyBatch,
    /// Model parameters violate an invariant (message names it).
    InvalidModel(&'static str),
    /// Demand density failed validation (not normalized, empty support, ...).
    InvalidDensity(&'static str),
    /// Grid step too coarse: the base-stock level disagrees with the
    /// quantile formula by more than 2h.
    GridTooCoarse { level: f64, quantile: f64 },
    /// A solver self-check failed; the reconstruction is wrong.
    PropertyViolation(&'static str),
    /// Chain has no step with two distinct reachable successor states.
    DegenerateChain,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid => write!(f, "state grid must be nonempty and strictly increasing"),
            Error::NotStochastic { row, sum } => {
                write!(f, "row {row} is not stochastic (sum = {sum:.17e})")
            }
            Error::GridMismatch => write!(f, "operands live on different state grids"),
            Error::LengthMismatch { expected, got } => {
                write!(f, "kernel list length {got}, expected {expected}")
            }
            Error::IndexOutOfRange { index } => write!(f, "step index {index} out of range"),
            Error::HorizonTooShort => write!(f, "horizon must be at least 2"),
            Error::InvalidInitial => write!(f, "initial distribution is not a probability vector"),
            Error::DimensionMismatch => write!(f, "reward tensor dimensions mismatch"),
            Error::WindowBlowup { lookahead } => write!(
                f,
                "window blowup: exact engine supports lookahead m <= 1, got m = {lookahead}"
            ),
            Error::RequiresZeroLookahead => {
                write!(f, "operation is defined only for lookahead m = 0")
            }
            Error::EmptyBatch => write!(f, "sample batch must be nonempty"),
            Error::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            Error::InvalidDensity(msg) => write!(f, "invalid density: {msg}"),
            Error::GridTooCoarse { level, quantile } => write!(
                f,
                "grid too coarse to bracket the base-stock level: s_1 = {level}, quantile = {quantile}"
            ),
            Error::PropertyViolation(msg) => write!(f, "solver property violation: {msg}"),
            Error::DegenerateChain => {
                write!(f, "chain has no step with two distinct reachable states")
            }
        }
    }
}
