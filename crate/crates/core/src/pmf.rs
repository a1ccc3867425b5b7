//! Hypergeometric and multinomial probability mass functions, their
//! moments, and sequential samplers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lattice::{enumerate_support, enumerate_simplex, ExperimentParams, LatticePoint};
use crate::sum::CompensatedSum;
use crate::Result;

pub use crate::special::{log_binomial, log_factorial};

/// A probability held as its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogProb(pub f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

/// Which discrete law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiscreteLaw {
    Hypergeometric,
    Multinomial,
}

impl DiscreteLaw {
    pub fn log_pmf(self, params: &ExperimentParams, k: &LatticePoint) -> LogProb {
        match self {
            DiscreteLaw::Hypergeometric => hypergeometric_log_pmf(params, k),
            DiscreteLaw::Multinomial => multinomial_log_pmf_params(params, k),
        }
    }

    /// Points carrying positive mass, in lexicographic order.
    pub fn support(self, params: &ExperimentParams) -> Result<Vec<LatticePoint>> {
        match self {
            DiscreteLaw::Hypergeometric => enumerate_support(params),
            DiscreteLaw::Multinomial => enumerate_simplex(params.dim(), params.sample()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, params: &ExperimentParams, rng: &mut R) -> LatticePoint {
        match self {
            DiscreteLaw::Hypergeometric => sample_hypergeometric(params, rng),
            DiscreteLaw::Multinomial => sample_multinomial(params.sample(), &params.probs(), rng),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DiscreteLaw::Hypergeometric => "hypergeometric",
            DiscreteLaw::Multinomial => "multinomial",
        }
    }
}

/// `ln P_{N,n,p}(k)`; `-inf` outside `K_d`.
pub fn hypergeometric_log_pmf(params: &ExperimentParams, k: &LatticePoint) -> LogProb {
    if !params.contains(k) {
        return LogProb::ZERO;
    }
    let mut acc = CompensatedSum::new();
    for (ki, &c) in k.all_counts().zip(params.counts()) {
        acc.add(log_binomial(c, ki as i64));
    }
    acc.add(-log_binomial(params.population(), params.sample() as i64));
    LogProb(acc.value())
}

/// `ln Q_{n,p}(k)` for weights `probs` over all `d + 1` categories.
pub fn multinomial_log_pmf(sample: u64, probs: &[f64], k: &LatticePoint) -> LogProb {
    if k.total() != sample || k.dim() + 1 != probs.len() {
        return LogProb::ZERO;
    }
    let mut acc = CompensatedSum::new();
    acc.add(log_factorial(sample));
    for (ki, &p) in k.all_counts().zip(probs) {
        if ki == 0 {
            continue;
        }
        if p <= 0.0 {
            return LogProb::ZERO;
        }
        acc.add(-log_factorial(ki));
        acc.add(ki as f64 * p.ln());
    }
    LogProb(acc.value())
}

/// `ln Q_{n,p}(k)` with weights taken from `params`.
pub fn multinomial_log_pmf_params(params: &ExperimentParams, k: &LatticePoint) -> LogProb {
    multinomial_log_pmf(params.sample(), &params.probs(), k)
}

/// Mean vector and covariance matrix over the first `d` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// `n (diag(p) - p p^T)` over the first `d` coordinates.
pub(crate) fn multinomial_covariance(sample: u64, probs: &[f64], d: usize) -> DMatrix<f64> {
    let n = sample as f64;
    DMatrix::from_fn(d, d, |i, j| {
        let diag = if i == j { probs[i] } else { 0.0 };
        n * (diag - probs[i] * probs[j])
    })
}

/// Mean `n p` and covariance `n (N - n)/(N - 1) (diag(p) - p p^T)`.
pub fn hypergeometric_moments(params: &ExperimentParams) -> MomentSummary {
    let d = params.dim();
    let probs = params.probs();
    let (big_n, n) = (params.population(), params.sample());
    let factor = if big_n <= 1 {
        0.0
    } else {
        (big_n - n) as f64 / (big_n - 1) as f64
    };
    MomentSummary {
        mean: DVector::from_fn(d, |i, _| n as f64 * probs[i]),
        covariance: multinomial_covariance(n, &probs, d) * factor,
    }
}

/// Mean `n p` and covariance `n (diag(p) - p p^T)`.
pub fn multinomial_moments(sample: u64, probs: &[f64]) -> MomentSummary {
    let d = probs.len() - 1;
    MomentSummary {
        mean: DVector::from_fn(d, |i, _| sample as f64 * probs[i]),
        covariance: multinomial_covariance(sample, probs, d),
    }
}

/// Mean and covariance by summing over the enumerated support.
pub fn enumerated_moments(params: &ExperimentParams, law: DiscreteLaw) -> Result<MomentSummary> {
    let d = params.dim();
    let support = law.support(params)?;
    let mut first = vec![CompensatedSum::new(); d];
    let mut second = vec![CompensatedSum::new(); d * d];
    let weights: Vec<f64> = support.iter().map(|k| law.log_pmf(params, k).prob()).collect();
    for (k, &w) in support.iter().zip(&weights) {
        for i in 0..d {
            first[i].add(w * k.coords()[i] as f64);
        }
    }
    let mean: Vec<f64> = first.iter().map(|s| s.value()).collect();
    for (k, &w) in support.iter().zip(&weights) {
        for i in 0..d {
            let di = k.coords()[i] as f64 - mean[i];
            for j in 0..d {
                let dj = k.coords()[j] as f64 - mean[j];
                second[i * d + j].add(w * di * dj);
            }
        }
    }
    Ok(MomentSummary {
        mean: DVector::from_vec(mean),
        covariance: DMatrix::from_fn(d, d, |i, j| second[i * d + j].value()),
    })
}

/// Inverse-CDF walk over `lo..=hi` with log-masses from `log_mass`.
fn inverse_cdf_walk<R: Rng + ?Sized>(
    lo: u64,
    hi: u64,
    log_mass: impl Fn(u64) -> f64,
    rng: &mut R,
) -> u64 {
    if lo == hi {
        return lo;
    }
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for x in lo..hi {
        cum += log_mass(x).exp();
        if u < cum {
            return x;
        }
    }
    hi
}

/// One draw from the univariate hypergeometric law: `draws` items without
/// replacement from `population`, of which `marked` are marked.
pub fn sample_univariate_hypergeometric<R: Rng + ?Sized>(
    population: u64,
    marked: u64,
    draws: u64,
    rng: &mut R,
) -> u64 {
    let lo = draws.saturating_sub(population - marked);
    let hi = draws.min(marked);
    let norm = log_binomial(population, draws as i64);
    inverse_cdf_walk(
        lo,
        hi,
        |x| {
            log_binomial(marked, x as i64) + log_binomial(population - marked, (draws - x) as i64)
                - norm
        },
        rng,
    )
}

/// One binomial draw by inverse-CDF walk.
pub fn sample_binomial<R: Rng + ?Sized>(trials: u64, prob: f64, rng: &mut R) -> u64 {
    if prob <= 0.0 {
        return 0;
    }
    if prob >= 1.0 {
        return trials;
    }
    let (lp, lq) = (prob.ln(), (-prob).ln_1p());
    let lf = log_factorial(trials);
    inverse_cdf_walk(
        0,
        trials,
        |x| lf - log_factorial(x) - log_factorial(trials - x) + x as f64 * lp + (trials - x) as f64 * lq,
        rng,
    )
}

/// A draw from `Hypergeometric(N, n, p)`: `k_1` from the univariate
/// hypergeometric with `N p_1` marked among `N`, then recursively on the
/// remaining population.
pub fn sample_hypergeometric<R: Rng + ?Sized>(params: &ExperimentParams, rng: &mut R) -> LatticePoint {
    let d = params.dim();
    let counts = params.counts();
    let mut population = params.population();
    let mut remaining = params.sample();
    let mut k = Vec::with_capacity(d);
    for &c in &counts[..d] {
        let x = sample_univariate_hypergeometric(population, c, remaining, rng);
        k.push(x);
        population -= c;
        remaining -= x;
    }
    LatticePoint::new(k, params.sample()).expect("sampled counts stay within n")
}

/// A draw from `Multinomial(n, p)` by sequential conditional binomials.
/// `probs` holds all `d + 1` weights.
pub fn sample_multinomial<R: Rng + ?Sized>(sample: u64, probs: &[f64], rng: &mut R) -> LatticePoint {
    let d = probs.len() - 1;
    let mut tail: Vec<f64> = vec![0.0; d + 2];
    for i in (0..=d).rev() {
        tail[i] = tail[i + 1] + probs[i];
    }
    let mut remaining = sample;
    let mut k = Vec::with_capacity(d);
    for i in 0..d {
        let x = if remaining == 0 {
            0
        } else {
            sample_binomial(remaining, probs[i] / tail[i], rng)
        };
        k.push(x);
        remaining -= x;
    }
    LatticePoint::new(k, sample).expect("sampled counts stay within n")
}

/// A precomputed PMF over an enumerated support, with an inverse-CDF
/// sampler by bisection.
#[derive(Debug, Clone)]
pub struct PmfTable {
    points: Vec<LatticePoint>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl PmfTable {
    pub fn new(params: &ExperimentParams, law: DiscreteLaw) -> Result<Self> {
        let points = law.support(params)?;
        let probs: Vec<f64> = points.iter().map(|k| law.log_pmf(params, k).prob()).collect();
        let mut acc = CompensatedSum::new();
        let cumulative = probs
            .iter()
            .map(|&p| {
                acc.add(p);
                acc.value()
            })
            .collect();
        Ok(Self {
            points,
            probs,
            cumulative,
        })
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of a draw.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u: f64 = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.points.len() - 1)
    }
}
