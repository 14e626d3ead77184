use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("field degree {0} outside 1..=64")]
    InvalidDegree(u32),
    #[error("modulus {modulus:#x} is not an irreducible polynomial of degree {degree}")]
    NotIrreducible { degree: u32, modulus: u128 },
    #[error("matrix has rank {rank} but {rows} rows; full row rank required")]
    NotFullRank { rank: usize, rows: usize },
    #[error("matrix has {rows} rows but only {cols} columns")]
    TooManyRows { rows: usize, cols: usize },
    #[error("seed has {got} bits, expected {expected}")]
    BadSeedLength { expected: usize, got: usize },
    #[error("point {x} outside the domain [1, {domain}]")]
    DomainOverflow { x: u64, domain: u64 },
    #[error("range sizes differ: {left} vs {right}")]
    RangeMismatch { left: u64, right: u64 },
    #[error("output width {m} must be smaller than the source width {n}")]
    WidthError { n: usize, m: usize },
    #[error("stage {stage} expects {expected} source bits but {got} remain")]
    WidthMismatch { stage: usize, expected: usize, got: usize },
    #[error("distributions are not comparable: {0}")]
    DomainMismatch(String),
    #[error("seed space of {bits} bits exceeds the exhaustive limit of {limit}; use Monte-Carlo mode")]
    TooLargeForExhaustive { bits: usize, limit: usize },
    #[error("no seed produces coordinate {coordinate} = {value}")]
    ConditionNeverHolds { coordinate: u64, value: u64 },
    #[error("parameter violation: {0}")]
    ParamViolation(String),
    #[error("seed space of {bits} bits exceeds the exhaustive limit of {limit}; rerun with --mode mc")]
    SeedSpaceTooLarge { bits: usize, limit: usize },
    #[error("query needs 1 <= |Y| < |X| with Y a subset of X: {0}")]
    EmptyQuery(String),
    #[error("|X| = {size_x} is not in the {regime} regime for {ell} buckets")]
    RegimeMismatch {
        size_x: usize,
        ell: u64,
        regime: &'static str,
    },
    #[error("invalid seed encoding: {0}")]
    SeedFormat(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
