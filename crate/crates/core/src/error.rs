use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("odd dimension {0}; a Pfaffian needs an even dimension")]
    OddDimension(usize),

    #[error("skew symmetry violated at ({row}, {col}): |A_ij + A_ji| = {deviation:e}")]
    NotSkew {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("point {0} is repeated")]
    DuplicatePoint(usize),

    #[error("site index {index} out of range for {len} sites")]
    SiteOutOfRange { index: usize, len: usize },

    #[error("ground set labels must be distinct and strictly increasing (position {0})")]
    UnorderedLabels(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{context}: block is singular (rcond = {rcond:e})")]
    Singular { context: &'static str, rcond: f64 },

    #[error("not self-adjoint: worst entry ({row}, {col}) off by {deviation:e}")]
    NotSelfAdjoint {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("spectrum out of [0, 1]: eigenvalue {eigenvalue}")]
    SpectrumOutOfRange { eigenvalue: f64 },

    #[error("Gamma relation violated: worst entry ({row}, {col}) off by {deviation:e}")]
    GammaRelationViolated {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("operator is not a projection: max |P^2 - P| = {deviation:e}")]
    NotProjection { deviation: f64 },

    #[error("{what} too large: {size} exceeds the limit {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("configuration {config:#b} has weight {weight:e}; kernel is not a valid PfPP kernel")]
    NegativeWeight { config: u64, weight: f64 },

    #[error("total mass {mass} differs from 1")]
    NotNormalized { mass: f64 },

    #[error("probability has imaginary part {0:e}")]
    ImaginaryPart(f64),

    #[error("conditioning impossible at site {site} ({}): denominator {denominator:e}", if *.occupied { "occupied" } else { "vacated" })]
    ConditioningImpossible {
        site: usize,
        occupied: bool,
        denominator: f64,
    },

    #[error("projection is not regular at site {site} ({})", if *.occupied { "occupied" } else { "vacated" })]
    NotRegular { site: usize, occupied: bool },

    #[error("occupied and vacated sets overlap at site {0}")]
    OverlappingCondition(usize),

    #[error("conditioning event has probability {0:e}")]
    ZeroProbability(f64),

    #[error("kernel diagonal K12({site}, {site}) = {value} outside [0, 1]")]
    KernelInconsistent { site: usize, value: f64 },

    #[error("measure support is not invariant under the transposition ({x}, {y})")]
    NotQuasiInvariant { x: usize, y: usize },

    #[error("transposition needs x < y, got ({x}, {y})")]
    BadTransposition { x: usize, y: usize },

    #[error("invalid specialization: {0}")]
    InvalidSpecialization(String),

    #[error("degenerate two-level block at site {0}: Upsilon and Delta both vanish")]
    DegenerateBlock(usize),

    #[error("vectors are linearly dependent (rank {rank} < {expected})")]
    RankDeficient { rank: usize, expected: usize },

    #[error("window too small for the partition: needs sites from {needed_low} to {needed_high}")]
    WindowTooSmall { needed_low: i64, needed_high: i64 },

    #[error("joint Fock kernel is not one-dimensional: {0}")]
    JointKernel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
