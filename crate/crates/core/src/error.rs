use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} must be a probability in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("detector geometry needs at least one row and one column, got {rows}x{cols}")]
    EmptyGeometry { rows: usize, cols: usize },

    #[error("requested {requested} seed cells but the detector has only {cells}")]
    TooManySeeds { requested: usize, cells: usize },

    #[error("cell index {index} is outside a detector of {cells} cells")]
    CellOutOfRange { index: usize, cells: usize },

    #[error("seed cell {index} appears more than once")]
    DuplicateSeed { index: usize },

    #[error("mean photon number must be finite and non-negative, got {0}")]
    InvalidMean(f64),

    #[error("number of detector elements must be positive")]
    ZeroElements,

    #[error("distribution sums to {sum}, expected 1 within 1e-9")]
    Unnormalized { sum: f64 },

    #[error("recursive crosstalk chains diverge at epsilon = 1")]
    DivergentChains,

    #[error("at least one run is required")]
    NoRuns,

    #[error("parameter range {name} = [{lo}, {hi}] with {points} points is invalid")]
    InvalidRange {
        name: &'static str,
        lo: f64,
        hi: f64,
        points: usize,
    },

    #[error("histogram is empty (all counts are zero)")]
    EmptyHistogram,

    #[error("histogram has {occupied} occupied bins; at least 3 are needed to fit 2 parameters")]
    TooFewBins { occupied: usize },

    #[error("full Monte Carlo fits need at least {min} runs, got {got}")]
    TooFewRuns { min: u64, got: u64 },

    #[error("fit objective is not finite anywhere on the parameter grid")]
    NoFiniteObjective,

    #[error("{0}")]
    Invalid(&'static str),
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}
