//! Total-variation and Hellinger distances between the hypergeometric and
//! multinomial laws, their jittered versions, and the matched Gaussian.
//!
//! A jittered law has density `pmf(k)` on the unit cube `k + (-1/2, 1/2)^d`.
//! Its distance to a Gaussian `phi` is
//!
//! ```text
//! TV = 1/2 [ sum_k int_cube(k) |pmf(k) - phi(x)| dx  +  (1 - sum_k int_cube(k) phi(x) dx) ]
//! ```
//!
//! where the second term is the Gaussian mass outside the support cubes.
//! Cube integrals are iterated: the innermost axis is split exactly where
//! the Gaussian crosses the constant `pmf(k)` (the crossing points of a
//! Gaussian line profile are explicit), and each smooth piece is integrated
//! by Gauss-Legendre. The outer axes use tensor Gauss-Legendre, and outer
//! boxes where the crossing pattern changes are bisected recursively.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gaussian::{GaussianLaw, LineProfile};
use crate::kernels::apply_jitter;
use crate::lattice::{ExperimentParams, LatticePoint};
use crate::pmf::{DiscreteLaw, PmfTable};
use crate::quadrature::GaussLegendre;
use crate::rng::{chunks, stream_rng, StreamRng};
use crate::special::{log_binomial, log_factorial};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

pub const DEFAULT_QUAD_ORDER: usize = 8;

/// Largest dimension served by cube quadrature.
pub const MAX_QUAD_DIM: usize = 3;

/// Bisection depth limit for outer boxes straddling a crossing.
pub const MAX_BISECTION_DEPTH: u32 = 6;

/// Smallest Monte Carlo sample count accepted.
pub const MIN_MC_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TvMethodTag {
    ExactDiscrete,
    CubeQuadrature,
    MonteCarlo,
}

impl TvMethodTag {
    pub fn as_str(self) -> &'static str {
        match self {
            TvMethodTag::ExactDiscrete => "exact-discrete",
            TvMethodTag::CubeQuadrature => "cube-quadrature",
            TvMethodTag::MonteCarlo => "monte-carlo",
        }
    }
}

/// A total-variation value with its method and error estimate. For
/// Monte Carlo the error is one standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvResult {
    pub value: f64,
    pub method: TvMethodTag,
    pub error_estimate: f64,
}

/// How to compute a jittered-versus-Gaussian distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TvMethod {
    Quadrature { order: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for TvMethod {
    fn default() -> Self {
        TvMethod::Quadrature {
            order: DEFAULT_QUAD_ORDER,
        }
    }
}

/// Floating-point error budget for a sum of `terms` probabilities, each
/// obtained as `exp` of a sum of log-factorials no larger than `ln N!`.
fn roundoff_bound(params: &ExperimentParams, terms: usize) -> f64 {
    let log_scale = 1.0 + log_factorial(params.population().max(params.sample()));
    4.0 * f64::EPSILON * (terms as f64 + 2.0 * log_scale)
}

/// `1/2 sum_k |P_a(k) - P_b(k)|` over the simplex lattice, which contains
/// both supports.
pub fn tv_discrete(params: &ExperimentParams, a: DiscreteLaw, b: DiscreteLaw) -> Result<TvResult> {
    let points = DiscreteLaw::Multinomial.support(params)?;
    let acc: CompensatedSum = points
        .iter()
        .map(|k| (a.log_pmf(params, k).prob() - b.log_pmf(params, k).prob()).abs())
        .collect();
    Ok(TvResult {
        value: (0.5 * acc.value()).clamp(0.0, 1.0),
        method: TvMethodTag::ExactDiscrete,
        error_estimate: roundoff_bound(params, points.len()),
    })
}

/// Density of the jittered law at `x`: `pmf(round(x))`.
pub fn jittered_density(params: &ExperimentParams, law: DiscreteLaw, x: &[f64]) -> f64 {
    let rounded = crate::kernels::apply_round(x);
    if rounded.iter().any(|&v| v < 0) {
        return 0.0;
    }
    let k: Vec<u64> = rounded.iter().map(|&v| v as u64).collect();
    match LatticePoint::new(k, params.sample()) {
        Ok(pt) => law.log_pmf(params, &pt).prob(),
        Err(_) => 0.0,
    }
}

/// `(int |c - phi|, int phi)` over one cube.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CubeIntegral {
    pub abs_diff: f64,
    pub gauss_mass: f64,
}

struct CubeIntegrator<'a> {
    law: &'a GaussianLaw,
    rule: GaussLegendre,
    max_depth: u32,
}

impl CubeIntegrator<'_> {
    /// Exact split of the innermost interval `[lo, hi]` at the crossings
    /// with `level`, then Gauss-Legendre on each piece.
    fn inner(&self, profile: &LineProfile, level: f64, lo: f64, hi: f64) -> CubeIntegral {
        let crossing = if level > 0.0 { profile.crossings(level.ln()) } else { None };
        let cuts = match crossing {
            Some((a, b)) => [lo, a.clamp(lo, hi), b.clamp(lo, hi), hi],
            None => [lo, hi, hi, hi],
        };
        let mut out = CubeIntegral::default();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let mass = self.rule.integrate(a, b, |t| profile.log_density(t).exp());
            out.abs_diff += (level * (b - a) - mass).abs();
            out.gauss_mass += mass;
        }
        out
    }

    /// Crossing pattern along the innermost axis at one outer point.
    fn signature(&self, outer: &[f64], level: f64, lo: f64, hi: f64) -> u8 {
        if level <= 0.0 {
            return 0;
        }
        match self.law.line_profile(outer).crossings(level.ln()) {
            None => 0,
            Some((a, b)) => 1 + u8::from(a > lo && a < hi) * 2 + u8::from(b > lo && b < hi) * 4,
        }
    }

    fn cube(&self, center: &[f64], level: f64) -> CubeIntegral {
        let d = center.len();
        let (lo, hi) = (center[d - 1] - 0.5, center[d - 1] + 0.5);
        if d == 1 {
            return self.inner(&self.law.line_profile(&[]), level, lo, hi);
        }
        let box_lo: Vec<f64> = center[..d - 1].iter().map(|c| c - 0.5).collect();
        let box_hi: Vec<f64> = center[..d - 1].iter().map(|c| c + 0.5).collect();
        self.outer_box(&box_lo, &box_hi, level, lo, hi, 0)
    }

    fn outer_points(&self, box_lo: &[f64], box_hi: &[f64]) -> Vec<(Vec<f64>, f64)> {
        // tensor product of mapped rules over the outer box
        let axes: Vec<Vec<(f64, f64)>> = box_lo
            .iter()
            .zip(box_hi)
            .map(|(&a, &b)| self.rule.mapped(a, b).collect())
            .collect();
        let mut pts = vec![(Vec::new(), 1.0)];
        for axis in &axes {
            let mut next = Vec::with_capacity(pts.len() * axis.len());
            for (x, w) in &pts {
                for &(xi, wi) in axis {
                    let mut x2 = x.clone();
                    x2.push(xi);
                    next.push((x2, w * wi));
                }
            }
            pts = next;
        }
        pts
    }

    fn outer_box(&self, box_lo: &[f64], box_hi: &[f64], level: f64, lo: f64, hi: f64, depth: u32) -> CubeIntegral {
        let pts = self.outer_points(box_lo, box_hi);
        if depth < self.max_depth {
            let m = box_lo.len();
            let mut sigs = pts.iter().map(|(x, _)| self.signature(x, level, lo, hi)).collect::<Vec<_>>();
            for corner in 0..(1usize << m) {
                let x: Vec<f64> = (0..m)
                    .map(|j| if corner >> j & 1 == 1 { box_hi[j] } else { box_lo[j] })
                    .collect();
                sigs.push(self.signature(&x, level, lo, hi));
            }
            if sigs.iter().any(|&s| s != sigs[0]) {
                let mut total = CubeIntegral::default();
                for child in 0..(1usize << m) {
                    let mut clo = box_lo.to_vec();
                    let mut chi = box_hi.to_vec();
                    for j in 0..m {
                        let mid = 0.5 * (box_lo[j] + box_hi[j]);
                        if child >> j & 1 == 1 {
                            clo[j] = mid;
                        } else {
                            chi[j] = mid;
                        }
                    }
                    let part = self.outer_box(&clo, &chi, level, lo, hi, depth + 1);
                    total.abs_diff += part.abs_diff;
                    total.gauss_mass += part.gauss_mass;
                }
                return total;
            }
        }
        let mut out = CubeIntegral::default();
        for (x, w) in &pts {
            let part = self.inner(&self.law.line_profile(x), level, lo, hi);
            out.abs_diff += w * part.abs_diff;
            out.gauss_mass += w * part.gauss_mass;
        }
        out
    }
}

/// Per-cube integrals against a Gaussian for every support point of a
/// discrete law.
#[derive(Debug, Clone)]
pub struct CubeTable {
    pub points: Vec<LatticePoint>,
    pub pmf: Vec<f64>,
    pub cubes: Vec<CubeIntegral>,
}

impl CubeTable {
    pub fn new(params: &ExperimentParams, law: DiscreteLaw, gaussian: &GaussianLaw, order: usize) -> Result<Self> {
        Self::with_depth(params, law, gaussian, order, MAX_BISECTION_DEPTH)
    }

    pub fn with_depth(
        params: &ExperimentParams,
        law: DiscreteLaw,
        gaussian: &GaussianLaw,
        order: usize,
        max_depth: u32,
    ) -> Result<Self> {
        check_quadrature(params, order)?;
        if gaussian.dim() != params.dim() {
            return Err(Error::InvalidArgument("Gaussian dimension does not match d".into()));
        }
        let table = PmfTable::new(params, law)?;
        let integrator = CubeIntegrator {
            law: gaussian,
            rule: GaussLegendre::new(order)?,
            max_depth,
        };
        let cubes = table
            .points()
            .par_iter()
            .zip(table.probs().par_iter())
            .map(|(k, &c)| integrator.cube(&k.as_f64(), c))
            .collect();
        Ok(Self {
            points: table.points().to_vec(),
            pmf: table.probs().to_vec(),
            cubes,
        })
    }

    pub fn gauss_mass(&self) -> f64 {
        crate::sum::sum(self.cubes.iter().map(|c| c.gauss_mass))
    }

    /// TV between the jittered law and the Gaussian.
    pub fn tv_jittered(&self) -> f64 {
        let inside = crate::sum::sum(self.cubes.iter().map(|c| c.abs_diff));
        let outside = (1.0 - self.gauss_mass()).max(0.0);
        (0.5 * (inside + outside)).clamp(0.0, 1.0)
    }

    /// TV between the discrete law and the rounded Gaussian, whose mass at
    /// `k` is the Gaussian measure of the cube around `k`.
    pub fn tv_rounded(&self) -> f64 {
        let inside = crate::sum::sum(self.pmf.iter().zip(&self.cubes).map(|(p, c)| (p - c.gauss_mass).abs()));
        let outside = (1.0 - self.gauss_mass()).max(0.0);
        (0.5 * (inside + outside)).clamp(0.0, 1.0)
    }
}

fn check_quadrature(params: &ExperimentParams, order: usize) -> Result<()> {
    if order < 2 {
        return Err(Error::InvalidArgument(format!("quadrature order must be >= 2, got {order}")));
    }
    if params.dim() > MAX_QUAD_DIM {
        return Err(Error::DimensionTooLarge {
            d: params.dim(),
            max: MAX_QUAD_DIM,
        });
    }
    Ok(())
}

/// Order of the companion rule used for the quadrature error estimate.
fn companion_order(order: usize) -> usize {
    order + order.div_ceil(2)
}

/// Cube-quadrature TV between the jittered discrete law and `gaussian`.
///
/// The error estimate is twice the change against a rule with 1.5x the
/// nodes, plus a roundoff allowance.
pub fn tv_jittered_vs_gaussian(
    params: &ExperimentParams,
    law: DiscreteLaw,
    gaussian: &GaussianLaw,
    quad_order: usize,
) -> Result<TvResult> {
    let table = CubeTable::new(params, law, gaussian, quad_order)?;
    let value = table.tv_jittered();
    let reference = CubeTable::new(params, law, gaussian, companion_order(quad_order))?.tv_jittered();
    Ok(TvResult {
        value,
        method: TvMethodTag::CubeQuadrature,
        error_estimate: 2.0 * (value - reference).abs() + roundoff_bound(params, table.points.len()),
    })
}

/// Cube-quadrature TV between two jittered discrete laws. Both densities
/// are constant on each cube, so this reproduces [`tv_discrete`].
pub fn tv_jittered_pair(params: &ExperimentParams, a: DiscreteLaw, b: DiscreteLaw, quad_order: usize) -> Result<TvResult> {
    check_quadrature(params, quad_order)?;
    let rule = GaussLegendre::new(quad_order)?;
    let points = DiscreteLaw::Multinomial.support(params)?;
    let d = params.dim();
    let cube_integral = |k: &LatticePoint| -> f64 {
        let center = k.as_f64();
        let mut acc = 0.0;
        let mut idx = vec![0usize; d];
        let q = rule.order();
        loop {
            let mut w = 1.0;
            let x: Vec<f64> = (0..d)
                .map(|j| {
                    w *= 0.5 * rule.weights()[idx[j]];
                    center[j] + 0.5 * rule.nodes()[idx[j]]
                })
                .collect();
            acc += w * (jittered_density(params, a, &x) - jittered_density(params, b, &x)).abs();
            let mut j = 0;
            while j < d {
                idx[j] += 1;
                if idx[j] < q {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == d {
                break;
            }
        }
        acc
    };
    let parts: Vec<f64> = points.par_iter().map(cube_integral).collect();
    Ok(TvResult {
        value: (0.5 * crate::sum::sum(parts)).clamp(0.0, 1.0),
        method: TvMethodTag::CubeQuadrature,
        error_estimate: roundoff_bound(params, points.len() * rule.order().pow(d as u32)),
    })
}

/// Mean and standard error of `draw` over `samples` draws, split into
/// fixed chunks with one random stream each.
pub(crate) fn mc_mean<F>(samples: usize, seed: u64, draw: F) -> (f64, f64)
where
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    let parts: Vec<(CompensatedSum, CompensatedSum)> = chunks(samples)
        .into_par_iter()
        .map(|(stream, len)| {
            let mut rng = stream_rng(seed, stream);
            let mut s1 = CompensatedSum::new();
            let mut s2 = CompensatedSum::new();
            for _ in 0..len {
                let v = draw(&mut rng);
                s1.add(v);
                s2.add(v * v);
            }
            (s1, s2)
        })
        .collect();
    let mut s1 = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    for (a, b) in &parts {
        s1.merge(a);
        s2.merge(b);
    }
    let m = samples as f64;
    let mean = s1.value() / m;
    let var = ((s2.value() / m - mean * mean) * m / (m - 1.0)).max(0.0);
    (mean, (var / m).sqrt())
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    Ok(())
}

/// Monte Carlo estimate of the jittered-versus-Gaussian TV as
/// `E_{X ~ jittered}[(1 - phi(X) / p(X))^+]`.
pub fn tv_monte_carlo(
    params: &ExperimentParams,
    law: DiscreteLaw,
    gaussian: &GaussianLaw,
    samples: usize,
    seed: u64,
) -> Result<TvResult> {
    check_samples(samples)?;
    let table = PmfTable::new(params, law)?;
    let log_probs: Vec<f64> = table.probs().iter().map(|p| p.ln()).collect();
    let (mean, se) = mc_mean(samples, seed, |rng| {
        let idx = table.sample_index(rng);
        let x = apply_jitter(&table.points()[idx], rng);
        (1.0 - (gaussian.log_density(&x) - log_probs[idx]).exp()).max(0.0)
    });
    Ok(TvResult {
        value: mean,
        method: TvMethodTag::MonteCarlo,
        error_estimate: se,
    })
}

/// Monte Carlo TV between two jittered discrete laws.
pub fn tv_monte_carlo_discrete(
    params: &ExperimentParams,
    a: DiscreteLaw,
    b: DiscreteLaw,
    samples: usize,
    seed: u64,
) -> Result<TvResult> {
    check_samples(samples)?;
    let table = PmfTable::new(params, a)?;
    let (mean, se) = mc_mean(samples, seed, |rng| {
        let idx = table.sample_index(rng);
        let k = &table.points()[idx];
        let ratio = (b.log_pmf(params, k).ln() - a.log_pmf(params, k).ln()).exp();
        (1.0 - ratio).max(0.0)
    });
    Ok(TvResult {
        value: mean,
        method: TvMethodTag::MonteCarlo,
        error_estimate: se,
    })
}

/// Monte Carlo TV between two Gaussians with the analytic density ratio,
/// `E_{X ~ a}[(1 - phi_b(X) / phi_a(X))^+]`.
pub fn tv_gaussian_pair_mc(a: &GaussianLaw, b: &GaussianLaw, samples: usize, seed: u64) -> Result<TvResult> {
    check_samples(samples)?;
    if a.dim() != b.dim() {
        return Err(Error::InvalidArgument("Gaussian dimensions differ".into()));
    }
    let (mean, se) = mc_mean(samples, seed, |rng| {
        let x = a.sample(rng);
        (1.0 - (b.log_density(&x) - a.log_density(&x)).exp()).max(0.0)
    });
    Ok(TvResult {
        value: mean,
        method: TvMethodTag::MonteCarlo,
        error_estimate: se,
    })
}

/// Squared Hellinger distance between the hypergeometric and multinomial
/// laws, with the total-variation bound derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HellingerResult {
    /// `1 - sum_k sqrt(P(k) Q(k))`.
    pub h2: f64,
    /// `sqrt(2 * 2 H^2)`, a conservative upper bound on the TV.
    pub tv_bound: f64,
}

pub fn hellinger_discrete(params: &ExperimentParams) -> Result<HellingerResult> {
    let points = DiscreteLaw::Hypergeometric.support(params)?;
    let affinity: CompensatedSum = points
        .iter()
        .map(|k| {
            let lp = DiscreteLaw::Hypergeometric.log_pmf(params, k).ln();
            let lq = DiscreteLaw::Multinomial.log_pmf(params, k).ln();
            (0.5 * (lp + lq)).exp()
        })
        .collect();
    let h2 = (1.0 - affinity.value()).clamp(0.0, 1.0);
    Ok(HellingerResult {
        h2,
        tv_bound: (2.0 * (2.0 * h2)).sqrt(),
    })
}

/// The explicit ingredients of the jittered-hypergeometric TV bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParts {
    /// Sum of the large-deviation tail terms.
    pub tail_sum: f64,
    /// Per-category tail terms
    /// `(1/nu)^{n nu p} ((1 - p)/(1 - nu p))^{n (1 - nu p)}`.
    pub tail_terms: Vec<f64>,
    pub n2_over_n_pop: f64,
    /// `d / sqrt(n) * sqrt(max p / min p)`.
    pub gaussian_term_scale: f64,
    /// `nu_i = ceil(1/p_i - 1)`.
    pub nu: Vec<u64>,
}

/// `ceil(1/p - 1)` for `p = count / N`, computed in integers.
pub fn tail_nu(params: &ExperimentParams, i: usize) -> u64 {
    let c = params.counts()[i];
    (params.population() - c).div_ceil(c)
}

/// The `i`-th tail term, evaluated in log space.
pub fn tail_term(params: &ExperimentParams, i: usize) -> f64 {
    let big_n = params.population();
    let c = params.counts()[i];
    let nu = tail_nu(params, i);
    let n = params.sample() as f64;
    let nu_p = (nu * c) as f64 / big_n as f64;
    let one_minus_nu_p = (big_n - nu * c) as f64 / big_n as f64;
    let one_minus_p = (big_n - c) as f64 / big_n as f64;
    (-n * nu_p * (nu as f64).ln() + n * one_minus_nu_p * (one_minus_p / one_minus_nu_p).ln()).exp()
}

pub fn bound_parts(params: &ExperimentParams) -> Result<BoundParts> {
    params.check_bound_regime()?;
    let m = params.counts().len();
    let tail_terms: Vec<f64> = (0..m).map(|i| tail_term(params, i)).collect();
    let n = params.sample() as f64;
    Ok(BoundParts {
        tail_sum: crate::sum::sum(tail_terms.iter().copied()),
        tail_terms,
        n2_over_n_pop: n * n / params.population() as f64,
        gaussian_term_scale: params.dim() as f64 / n.sqrt() * params.weight_ratio().sqrt(),
        nu: (0..m).map(|i| tail_nu(params, i)).collect(),
    })
}

/// Exact tail probability of one coordinate against its tail term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    /// `P(K_i > nu_i n p_i)` under the hypergeometric law.
    pub empirical: f64,
    pub bound: f64,
    pub nu: u64,
    /// `nu_i n p_i`.
    pub threshold: f64,
}

/// Compares `P(K_i > nu_i n p_i)`, summed exactly over the univariate
/// hypergeometric marginal of `K_i`, with the `i`-th tail term. `i`
/// indexes all `d + 1` categories from zero.
pub fn tail_probability_check(params: &ExperimentParams, i: usize) -> Result<TailCheck> {
    let m = params.counts().len();
    if i >= m {
        return Err(Error::InvalidArgument(format!("coordinate {i} out of range 0..{m}")));
    }
    let big_n = params.population();
    let c = params.counts()[i];
    let n = params.sample();
    let nu = tail_nu(params, i);
    let norm = log_binomial(big_n, n as i64);
    let lo = n.saturating_sub(big_n - c);
    let hi = n.min(c);
    // x > nu n c / N  <=>  x N > nu n c
    let tail: CompensatedSum = (lo..=hi)
        .filter(|&x| x as u128 * big_n as u128 > nu as u128 * n as u128 * c as u128)
        .map(|x| (log_binomial(c, x as i64) + log_binomial(big_n - c, (n - x) as i64) - norm).exp())
        .collect();
    Ok(TailCheck {
        empirical: tail.value(),
        bound: tail_term(params, i),
        nu,
        threshold: nu as f64 * n as f64 * c as f64 / big_n as f64,
    })
}
