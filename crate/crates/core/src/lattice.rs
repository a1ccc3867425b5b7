//! Experiment parameters, lattice points and support enumeration.
//!
//! Category weights are stored as the integer counts `N * p_i`, so every
//! normalisation check is exact. Floating-point weights are derived on demand.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default cap on the number of enumerated lattice points.
pub const DEFAULT_SUPPORT_CAP: u64 = 10_000_000;

/// Environment variable that overrides [`DEFAULT_SUPPORT_CAP`].
pub const SUPPORT_CAP_ENV: &str = "LECAM_SUPPORT_CAP";

/// Enumeration cap in effect, honouring `LECAM_SUPPORT_CAP`.
pub fn support_cap() -> u64 {
    std::env::var(SUPPORT_CAP_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SUPPORT_CAP)
}

/// One hypergeometric / multinomial / normal experiment triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExperimentParams {
    population: u64,
    sample: u64,
    /// `N * p_i` for all `d + 1` categories.
    counts: Vec<u64>,
}

impl ExperimentParams {
    /// Builds parameters from all `d + 1` category counts `N * p_i`.
    pub fn new(population: u64, sample: u64, counts: Vec<u64>) -> Result<Self> {
        if population == 0 || sample == 0 {
            return Err(Error::NonPositiveSize { population, sample });
        }
        if sample > population {
            return Err(Error::SampleExceedsPopulation { population, sample });
        }
        if counts.len() < 2 {
            return Err(Error::CountLength {
                expected: 2,
                got: counts.len(),
            });
        }
        if let Some(index) = counts.iter().position(|&c| c == 0) {
            return Err(Error::NonPositiveWeight { index, count: 0 });
        }
        let sum: u128 = counts.iter().map(|&c| c as u128).sum();
        if sum != population as u128 {
            return Err(Error::WeightSum { sum, population });
        }
        Ok(Self {
            population,
            sample,
            counts,
        })
    }

    /// Builds parameters from the first `d` counts; the last count is
    /// `N - sum`.
    pub fn from_leading_counts(population: u64, sample: u64, leading: &[u64]) -> Result<Self> {
        let sum: u128 = leading.iter().map(|&c| c as u128).sum();
        let last = population as i128 - sum as i128;
        if last <= 0 {
            return Err(Error::NonPositiveWeight {
                index: leading.len(),
                count: last,
            });
        }
        let mut counts = leading.to_vec();
        counts.push(last as u64);
        Self::new(population, sample, counts)
    }

    /// Builds parameters from exact rational weights `num / den` for all
    /// `d + 1` categories. Every `N * num / den` must be an integer.
    pub fn from_rationals(population: u64, sample: u64, weights: &[(u64, u64)]) -> Result<Self> {
        let mut counts = Vec::with_capacity(weights.len());
        for &(num, den) in weights {
            if den == 0 {
                return Err(Error::InvalidArgument("zero denominator".into()));
            }
            let scaled = population as u128 * num as u128;
            if !scaled.is_multiple_of(den as u128) {
                return Err(Error::NonIntegerCount {
                    num,
                    den,
                    population,
                });
            }
            counts.push((scaled / den as u128) as u64);
        }
        Self::new(population, sample, counts)
    }

    /// Same weights, different population and sample sizes. The new
    /// population must be a multiple of `sum(weights)`.
    pub fn rescaled(weights: &[u64], population: u64, sample: u64) -> Result<Self> {
        let total: u64 = weights.iter().sum();
        if total == 0 || !population.is_multiple_of(total) {
            return Err(Error::InvalidArgument(format!(
                "population {population} is not a multiple of the weight total {total}"
            )));
        }
        let factor = population / total;
        Self::new(population, sample, weights.iter().map(|w| w * factor).collect())
    }

    /// Population size `N`.
    pub fn population(&self) -> u64 {
        self.population
    }

    /// Sample size `n`.
    pub fn sample(&self) -> u64 {
        self.sample
    }

    /// Number of free coordinates `d` (categories minus one).
    pub fn dim(&self) -> usize {
        self.counts.len() - 1
    }

    /// Category counts `N * p_i` for all `d + 1` categories.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.population as f64
    }

    /// All `d + 1` weights as floats.
    pub fn probs(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|i| self.prob(i)).collect()
    }

    /// `max_i p_i / min_i p_i` over all `d + 1` weights.
    pub fn weight_ratio(&self) -> f64 {
        let max = *self.counts.iter().max().unwrap();
        let min = *self.counts.iter().min().unwrap();
        max as f64 / min as f64
    }

    /// `n <= 3N/4`, the regime of the total-variation and deficiency bounds.
    pub fn in_bound_regime(&self) -> bool {
        4 * self.sample as u128 <= 3 * self.population as u128
    }

    pub(crate) fn check_bound_regime(&self) -> Result<()> {
        if self.in_bound_regime() {
            Ok(())
        } else {
            Err(Error::Regime {
                population: self.population,
                sample: self.sample,
            })
        }
    }

    /// True iff `k` lies in the hypergeometric support `K_d`.
    pub fn contains(&self, k: &LatticePoint) -> bool {
        k.total() == self.sample
            && k.dim() == self.dim()
            && k.all_counts().zip(&self.counts).all(|(ki, &c)| ki <= c)
    }

    /// Builds a point of `K_d` from its first `d` coordinates.
    pub fn point(&self, k: &[u64]) -> Result<LatticePoint> {
        let point = LatticePoint::new(k.to_vec(), self.sample)?;
        if point.dim() != self.dim() || !self.contains(&point) {
            return Err(Error::OutsideSupport {
                point: k.to_vec(),
            });
        }
        Ok(point)
    }
}

/// A count vector `k` with the implicit last coordinate `n - |k|_1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    k: Vec<u64>,
    last: u64,
}

impl LatticePoint {
    /// Point with `d` leading counts in the simplex `{k : |k|_1 <= total}`.
    pub fn new(k: Vec<u64>, total: u64) -> Result<Self> {
        let sum: u128 = k.iter().map(|&v| v as u128).sum();
        if sum > total as u128 {
            return Err(Error::OutsideSupport { point: k });
        }
        let last = total - sum as u64;
        Ok(Self { k, last })
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    /// The `d` free coordinates.
    pub fn coords(&self) -> &[u64] {
        &self.k
    }

    /// The derived coordinate `k_{d+1} = n - |k|_1`.
    pub fn last(&self) -> u64 {
        self.last
    }

    /// `|k|_1 + k_{d+1}`.
    pub fn total(&self) -> u64 {
        self.k.iter().sum::<u64>() + self.last
    }

    /// All `d + 1` counts, the derived one last.
    pub fn all_counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.k.iter().copied().chain(std::iter::once(self.last))
    }

    /// The `i`-th of the `d + 1` counts.
    pub fn count(&self, i: usize) -> u64 {
        if i < self.k.len() {
            self.k[i]
        } else {
            self.last
        }
    }

    /// Coordinates as floats, e.g. a cube center.
    pub fn as_f64(&self) -> Vec<f64> {
        self.k.iter().map(|&v| v as f64).collect()
    }
}

/// The class `Theta_R` of weight vectors with `max p / min p <= R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioClass {
    bound: f64,
}

impl RatioClass {
    pub fn new(bound: f64) -> Result<Self> {
        if !(bound >= 1.0) || !bound.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ratio bound must be a finite number >= 1, got {bound}"
            )));
        }
        Ok(Self { bound })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn contains(&self, params: &ExperimentParams) -> bool {
        let max = *params.counts().iter().max().unwrap() as f64;
        let min = *params.counts().iter().min().unwrap() as f64;
        max <= self.bound * min
    }
}

/// Validates raw inputs: `d` leading counts or all `d + 1` counts `N * p_i`.
pub fn validate_params(population: u64, sample: u64, d: usize, counts: &[u64]) -> Result<ExperimentParams> {
    if counts.len() == d + 1 {
        ExperimentParams::new(population, sample, counts.to_vec())
    } else if counts.len() == d {
        ExperimentParams::from_leading_counts(population, sample, counts)
    } else {
        Err(Error::CountLength {
            expected: d + 1,
            got: counts.len(),
        })
    }
}

/// Number of points in `{k in N_0^{d+1} : |k|_1 = n, k_i <= bounds_i}`.
fn bounded_composition_count(sample: u64, bounds: &[u64]) -> u128 {
    let n = sample as usize;
    let mut ways = vec![0u128; n + 1];
    ways[0] = 1;
    for &b in bounds {
        let b = b.min(sample) as usize;
        let mut prefix = vec![0u128; n + 2];
        for s in 0..=n {
            prefix[s + 1] = prefix[s] + ways[s];
        }
        for s in 0..=n {
            let lo = s.saturating_sub(b);
            ways[s] = prefix[s + 1] - prefix[lo];
        }
    }
    ways[n]
}

/// `|K_d|` without enumerating it.
pub fn support_size(params: &ExperimentParams) -> u128 {
    bounded_composition_count(params.sample, &params.counts)
}

/// Number of lattice points in the simplex `{k in N_0^d : |k|_1 <= n}`.
pub fn simplex_size(d: usize, sample: u64) -> u128 {
    // C(n + d, d)
    let mut acc: u128 = 1;
    for j in 1..=d as u128 {
        acc = acc * (sample as u128 + j) / j;
    }
    acc
}

fn check_cap(size: u128, cap: u64) -> Result<()> {
    if size > cap as u128 {
        Err(Error::SupportCap { size, cap })
    } else {
        Ok(())
    }
}

/// Visits every point of `{k : |k|_1 = n, k_i <= bounds_i}` (given by its
/// first `d` coordinates) in lexicographic order.
fn visit_bounded(sample: u64, bounds: &[u64], mut visit: impl FnMut(&[u64], u64)) {
    let d = bounds.len() - 1;
    // suffix[i] = sum of bounds[i..], capacity of categories i..=d
    let mut suffix = vec![0u128; d + 2];
    for i in (0..=d).rev() {
        suffix[i] = suffix[i + 1] + bounds[i] as u128;
    }
    if suffix[0] < sample as u128 {
        return;
    }
    let mut k = vec![0u64; d];
    fn rec(
        i: usize,
        remaining: u64,
        k: &mut Vec<u64>,
        bounds: &[u64],
        suffix: &[u128],
        visit: &mut dyn FnMut(&[u64], u64),
    ) {
        let d = k.len();
        if i == d {
            visit(k, remaining);
            return;
        }
        let after = suffix[i + 1];
        let lo = (remaining as u128).saturating_sub(after) as u64;
        let hi = bounds[i].min(remaining);
        for v in lo..=hi {
            k[i] = v;
            rec(i + 1, remaining - v, k, bounds, suffix, visit);
        }
    }
    rec(0, sample, &mut k, bounds, &suffix, &mut visit);
}

/// Every `k in K_d` exactly once, lexicographically increasing in
/// `(k_1, ..., k_d)`. Fails if `|K_d|` exceeds [`support_cap`].
pub fn enumerate_support(params: &ExperimentParams) -> Result<Vec<LatticePoint>> {
    enumerate_support_with_cap(params, support_cap())
}

pub fn enumerate_support_with_cap(params: &ExperimentParams, cap: u64) -> Result<Vec<LatticePoint>> {
    let size = support_size(params);
    check_cap(size, cap)?;
    let mut out = Vec::with_capacity(size as usize);
    visit_bounded(params.sample, &params.counts, |k, last| {
        out.push(LatticePoint {
            k: k.to_vec(),
            last,
        })
    });
    Ok(out)
}

/// Every `k in N_0^d` with `|k|_1 <= n` (the multinomial support), in
/// lexicographic order.
pub fn enumerate_simplex(d: usize, sample: u64) -> Result<Vec<LatticePoint>> {
    let size = simplex_size(d, sample);
    check_cap(size, support_cap())?;
    let bounds = vec![sample; d + 1];
    let mut out = Vec::with_capacity(size as usize);
    visit_bounded(sample, &bounds, |k, last| {
        out.push(LatticePoint {
            k: k.to_vec(),
            last,
        })
    });
    Ok(out)
}

/// Membership in the truncation set: `max_i k_i / p_i <= gamma * N` over
/// all `d + 1` coordinates.
pub fn in_truncated_set(params: &ExperimentParams, k: &LatticePoint, gamma: f64) -> bool {
    // k_i / p_i <= gamma N  <=>  k_i <= gamma N p_i
    k.all_counts()
        .zip(params.counts())
        .all(|(ki, &c)| ki as f64 <= gamma * c as f64)
}
