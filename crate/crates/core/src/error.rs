use thiserror::Error;

use crate::combinatorics::Rational;

/// Errors raised while building or evaluating caching schemes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cache size {m} outside [0, {n}]")]
    CacheOutOfRange { m: Rational, n: usize },

    #[error("unsupported system: K = {k} users exceeds N = {n} files")]
    MoreUsersThanFiles { n: usize, k: usize },

    #[error("need at least one user and one file")]
    EmptySystem,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("demand vector has {got} entries, expected {expected}")]
    DemandLength { got: usize, expected: usize },

    #[error("user {user} demands file {file}, outside 1..={n}")]
    DemandOutOfRange { user: usize, file: usize, n: usize },

    #[error("no lengths")]
    NoLengths,

    #[error("nothing to refine: placement parameter t = {0} already equals K")]
    NothingToRefine(usize),

    #[error("cannot shrink placement: target {target} below current occupancy {current}")]
    CannotShrink { target: Box<Rational>, current: Box<Rational> },

    #[error("file size of {f_bits} bits does not split subfile {subfile} into whole bits")]
    Indivisible { f_bits: u64, subfile: String },

    #[error("transmission {index} mixes segments of unequal length")]
    UnequalSegments { index: usize },

    #[error("instance too large for exhaustive demand enumeration ({count} demand vectors); use distinct-demand mode")]
    TooManyDemands { count: u128 },

    #[error("could not parse rational from {0:?}")]
    ParseRational(String),

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
