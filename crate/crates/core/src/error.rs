use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("{what} must be at least {min}, got {got}")]
    TooSmall {
        what: &'static str,
        min: usize,
        got: usize,
    },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("operands belong to different fields (p={left} vs p={right})")]
    FieldMismatch { left: u64, right: u64 },
    #[error("symbol {symbol} is not a residue modulo {p}")]
    SymbolOutOfRange { symbol: u64, p: u64 },
    #[error("index {index} out of range for {count} messages")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("query entry {0} is not in {{-1, 0, 1}}")]
    InvalidQueryEntry(i64),
    #[error("fading plan needs a coefficient vector of length {0}")]
    MissingChannel(usize),
    #[error("could not draw a full-rank {k}x{n} generator over F_{p}")]
    RankDeficient { k: usize, n: usize, p: u64 },
    #[error("codebook size {p}^{k} exceeds the enumeration cap {cap}")]
    EnumerationCap { p: u64, k: usize, cap: u64 },
    #[error("point is not a codeword of this nested lattice code")]
    NotInCodebook,
    #[error("dither coordinate {0} lies outside the coarse Voronoi region")]
    DitherOutOfRange(f64),
    #[error("coefficient vector must be nonzero")]
    ZeroCoefficients,
    #[error("exhaustive privacy audit supports M <= {max}, got {m}")]
    AuditTooLarge { m: usize, max: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
