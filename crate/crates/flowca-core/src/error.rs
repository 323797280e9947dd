use crate::grid::NeighborhoodKind;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("grid dimensions must be at least 3x3, got {width}x{height}")]
    DimensionTooSmall { width: usize, height: usize },

    #[error("row {row} has {got} cells, expected {expected}")]
    ShapeMismatch {
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("pattern has {got} cells, neighborhood expects {expected}")]
    ArityMismatch { got: usize, expected: usize },

    #[error("hex string has {got} digits, expected {expected}")]
    BadLength { got: usize, expected: usize },

    #[error("invalid hex digit {digit:?} at position {position}")]
    BadDigit { digit: char, position: usize },

    #[error("{direction} traffic is not admissible on {kind}: {reason}")]
    InadmissibleDirection {
        direction: &'static str,
        kind: NeighborhoodKind,
        reason: String,
    },

    #[error("LUT neighborhood is {got}, expected {expected}")]
    WrongKind {
        got: NeighborhoodKind,
        expected: NeighborhoodKind,
    },

    #[error("rule spec failed validation: {0}")]
    InvalidSpec(String),

    #[error("window {width}x{height} needs 2^{bits} embeddings, over the budget of {budget}")]
    WindowTooLarge {
        width: usize,
        height: usize,
        bits: usize,
        budget: u64,
    },

    #[error("exhaustive {width}x{height} torus scan needs 2^{bits} configurations, over the budget of {budget}")]
    BudgetExceeded {
        width: usize,
        height: usize,
        bits: usize,
        budget: u64,
    },

    #[error("selected cell ({i}, {j}) does not hold a particle")]
    NotAParticle { i: i64, j: i64 },

    #[error("PBM parse error: {0}")]
    Pbm(String),

    #[error("rule spec JSON error: {0}")]
    SpecJson(String),
}

pub type Result<T> = std::result::Result<T, Error>;
