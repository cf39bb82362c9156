use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    UnknownVariable(String),
    /// A (unit, period) cell has no observation.
    UnbalancedPanel {
        unit: String,
        period: i64,
    },
    DuplicateObservation {
        unit: String,
        period: i64,
    },
    NonConsecutivePeriods {
        previous: i64,
        next: i64,
    },
    InvalidPanel(String),
    ShapeMismatch {
        expected: usize,
        found: usize,
    },
    GapOutOfRange {
        gap: usize,
        periods: usize,
    },
    UnknownPeriod(i64),
    InvalidGapRange {
        k_min: usize,
        k_max: usize,
        periods: usize,
    },
    NoIdentifyingVariation(String),
    Collinear(Vec<String>),
    IrrelevantInstrument,
    InsufficientPresample {
        unit: String,
        period: i64,
        found: usize,
        required: usize,
    },
    InvalidPretrendWindow {
        start: i64,
        end: i64,
    },
    SingleCluster,
    EmptyWeights,
    NoGroundTruth,
    InvalidConfig(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnknownVariable(name) => write!(f, "unknown variable `{name}`"),
            Error::UnbalancedPanel { unit, period } => {
                write!(f, "unbalanced panel: unit `{unit}` has no observation for period {period}")
            }
            Error::DuplicateObservation { unit, period } => {
                write!(f, "duplicate observation for unit `{unit}` in period {period}")
            }
            Error::NonConsecutivePeriods { previous, next } => {
                write!(f, "time labels must be consecutive integers, found {previous} followed by {next}")
            }
            Error::InvalidPanel(msg) => write!(f, "invalid panel: {msg}"),
            Error::ShapeMismatch { expected, found } => {
                write!(f, "shape mismatch: expected {expected}, found {found}")
            }
            Error::GapOutOfRange { gap, periods } => {
                write!(f, "gap {gap} out of range for a panel with {periods} periods")
            }
            Error::UnknownPeriod(p) => write!(f, "period {p} is not in the panel"),
            Error::InvalidGapRange { k_min, k_max, periods } => {
                write!(f, "invalid gap range {k_min}..={k_max} for a panel with {periods} periods")
            }
            Error::NoIdentifyingVariation(what) => write!(f, "no identifying variation: {what}"),
            Error::Collinear(names) => {
                write!(f, "collinear regressors after two-way transformation: ")?;
                for (i, n) in names.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(n)?;
                }
                Ok(())
            }
            Error::IrrelevantInstrument => f.write_str("instrument irrelevant under two-way transformation"),
            Error::InsufficientPresample { unit, period, found, required } => write!(
                f,
                "insufficient pre-sample data for unit `{unit}` at period {period}: \
                 {found} of {required} window points available"
            ),
            Error::InvalidPretrendWindow { start, end } => {
                write!(f, "invalid pre-trend window [{start}, {end}]")
            }
            Error::SingleCluster => f.write_str("cluster-robust inference needs at least two clusters"),
            Error::EmptyWeights => f.write_str("all component weights are zero"),
            Error::NoGroundTruth => f.write_str("audit requires simulated data with ground truth"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
