use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice level {level} out of range (max {max})")]
    LevelOutOfRange { level: u32, max: u32 },

    #[error("shift {0} is not a dyadic rational in [0,1) at resolution 2^-{1}")]
    ShiftNotDyadic(f64, u32),

    #[error("cube at level {level} (shift denominator 2^{shift_bits}) is not resolvable on a grid of resolution {resolution}")]
    ResolutionMismatch {
        level: u32,
        shift_bits: u32,
        resolution: u32,
    },

    #[error("point {0} lies outside [0,1)")]
    PointOutOfDomain(f64),

    #[error("grid functions disagree on resolution ({0} vs {1})")]
    GridMismatch(u32, u32),

    #[error("expected {expected} values for resolution {resolution}, got {got}")]
    BadLength {
        resolution: u32,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value at cell {0}")]
    NonFinite(usize),

    #[error("negative value at cell {0} where a nonnegative function is required")]
    Negative(usize),

    #[error("non-positive weight value at cell {0}")]
    NonPositiveWeight(usize),

    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inadmissible exponents: {0}")]
    Inadmissible(String),

    #[error("invalid shift: {0}")]
    InvalidShift(String),

    #[error("paraproduct coefficients violate the Carleson condition on {cube}: {value} > {bound}")]
    Carleson {
        cube: String,
        value: f64,
        bound: f64,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
