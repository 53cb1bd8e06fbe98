use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TorusError {
    #[error("matrix [[{a}, {b}], [{c}, {d}]] has determinant {det}, expected +1 or -1")]
    NotUnimodular { a: i64, b: i64, c: i64, d: i64, det: i64 },
    #[error("matrix with trace {trace} is not hyperbolic (|trace| must exceed 2)")]
    NotHyperbolic { trace: i64 },
    #[error("observable has a zero-frequency term; base observables must be centered")]
    NotCentered,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("frame has non-positive or non-finite determinant {0}")]
    BadDeterminant(f64),
    #[error("flow time {0} exceeds the single-call limit of 100")]
    FlowTooLong(f64),
    #[error("reduction did not terminate after {steps} steps (cosh distance {cosh_dist:e}); group data is corrupted")]
    ReductionDiverged { steps: usize, cosh_dist: f64 },
    #[error("ball cache radius {cache} is smaller than the radius {needed} required by the observable support")]
    CacheTooSmall { cache: f64, needed: f64 },
    #[error("haar sampler exceeded {0} proposals")]
    SamplerExhausted(usize),
    #[error("invalid group data: {0}")]
    InvalidGroup(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneryError {
    #[error("path must contain at least two points, got {0}")]
    PathTooShort(usize),
    #[error("bin width {dx} is larger than the path range {range}")]
    BinTooWide { dx: f64, range: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("only {usable} points pass the significance filter in the fit range, need at least 3")]
    TooFewPoints { usable: usize },
    #[error("empirical law is empty")]
    EmptyLaw,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Torus(#[from] TorusError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scenery(#[from] SceneryError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
