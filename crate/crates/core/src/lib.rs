//! Exact and numerical comparison of the multivariate hypergeometric,
//! multinomial and multivariate normal experiments.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: validated experiment parameters, support enumeration and
//!   truncation sets.
//! - [`pmf`]: log-space probability mass functions, moments and samplers.
//! - [`expansion`]: the log-ratio of the hypergeometric and multinomial
//!   PMFs together with its first- and second-order local expansions.
//! - [`distances`]: total variation and Hellinger distances between the
//!   discrete laws, their jittered versions and the matching Gaussian.
//! - [`kernels`]: the jitter/round Markov kernels, deficiency upper bounds
//!   and the square-root variance-stabilising map.
//! - [`cli`]: the `lecam` command-line front end.
//!
//! Everything probabilistic is carried in natural-log space, and every
//! reduction runs in a fixed order with compensated summation so that
//! results do not depend on thread scheduling.

use thiserror::Error;

pub mod cli;
pub mod distances;
pub mod expansion;
pub mod fit;
pub mod gaussian;
pub mod kernels;
pub mod lattice;
pub mod pmf;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod special;
pub mod sum;

pub use distances::{TvMethod, TvResult};
pub use expansion::ExpansionResult;
pub use gaussian::GaussianLaw;
pub use kernels::DeficiencyReport;
pub use lattice::{ExperimentParams, LatticePoint, RatioClass};
pub use pmf::{DiscreteLaw, LogProb, MomentSummary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("population size N and sample size n must be positive (N = {population}, n = {sample})")]
    NonPositiveSize { population: u64, sample: u64 },

    #[error("sample size n = {sample} exceeds population size N = {population}")]
    SampleExceedsPopulation { population: u64, sample: u64 },

    #[error("expected {expected} category counts, got {got}")]
    CountLength { expected: usize, got: usize },

    #[error("category {index} has count N*p = {count}; every weight must be positive")]
    NonPositiveWeight { index: usize, count: i128 },

    #[error("category counts sum to {sum}, so the weights sum to {sum}/{population} instead of 1")]
    WeightSum { sum: u128, population: u64 },

    #[error("weight {num}/{den} times N = {population} is not an integer")]
    NonIntegerCount { num: u64, den: u64, population: u64 },

    #[error("point {point:?} is outside the support")]
    OutsideSupport { point: Vec<u64> },

    #[error("support has {size} points, above the cap of {cap}; use a Monte Carlo method instead")]
    SupportCap { size: u128, cap: u64 },

    #[error("regime violation: need n <= 3N/4, got n = {sample}, N = {population}")]
    Regime { population: u64, sample: u64 },

    #[error("point {point:?} is outside the truncation set for gamma = {gamma}")]
    OutsideTruncation { point: Vec<u64>, gamma: f64 },

    #[error("dimension d = {d} exceeds {max} for cube quadrature; use a Monte Carlo method instead")]
    DimensionTooLarge { d: usize, max: usize },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for errors raised by the enumeration or dimension caps, as
    /// opposed to invalid parameters.
    pub fn is_resource_cap(&self) -> bool {
        matches!(self, Error::SupportCap { .. } | Error::DimensionTooLarge { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
