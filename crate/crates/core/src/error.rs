use alloc::string::String;

/// Errors raised by the forecasting core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("resolutions {from_secs}s and {to_secs}s are not integer multiples of each other")]
    NonCommensurableResolution { from_secs: i64, to_secs: i64 },
    #[error("series are not aligned: {0}")]
    Alignment(String),
    #[error("duplicate channel `{0}`")]
    DuplicateChannel(String),
    #[error("index range is empty or out of bounds")]
    EmptyRange,
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("station subset is empty")]
    EmptySubset,
    #[error("load {load} exceeds capacity {capacity} at step {step}")]
    LoadExceedsCapacity { step: usize, load: f64, capacity: u32 },
    #[error("hour bins overlap or do not cover the day")]
    OverlappingBins,
    #[error("variable `{0}` is not available")]
    MissingVariable(String),
    #[error("no stations available")]
    NoStations,
    #[error("target station set is empty")]
    EmptyTargetSet,
    #[error("window of {window} days exceeds series length of {days} days")]
    WindowTooLarge { window: usize, days: usize },
    #[error("series of length {len} is shorter than the required {required}")]
    SeriesTooShort { len: usize, required: usize },
    #[error("input length {input_len} is below twice the horizon {horizon}")]
    InputTooShort { input_len: usize, horizon: usize },
    #[error("split fractions must be positive and sum to 1")]
    BadFractions,
    #[error("too few instances ({0}) to populate every split")]
    TooFewInstances(usize),
    #[error("series is empty")]
    EmptySeries,
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("set is empty")]
    EmptySet,
    #[error("k = {k} exceeds the {available} available training instances")]
    KTooLarge { k: usize, available: usize },
    #[error("training set is empty")]
    EmptyTrain,
    #[error("state has not been fitted")]
    UnfittedState,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("fold split `{0}` is empty")]
    EmptySplit(&'static str),
    #[error("loss diverged at epoch {0}")]
    DivergedLoss(usize),
    #[error("search space is empty")]
    EmptySpace,
    #[error("no folds to evaluate")]
    EmptyFolds,
    #[error("at least two pairs are required, got {0}")]
    TooFewPairs(usize),
    #[error("resolution must be finer than one day")]
    ResolutionTooCoarse,
    #[error("invalid range: {0}")]
    BadRange(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
