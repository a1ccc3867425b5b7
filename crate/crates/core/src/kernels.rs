//! Markov kernels between the discrete and Gaussian experiments, and the
//! deficiency upper bounds they certify.
//!
//! - jitter: `k -> k + U`, `U ~ Uniform(-1/2, 1/2)^d`, maps the discrete
//!   experiment into `R^d`;
//! - round: componentwise nearest integer, the left inverse of jitter;
//! - sqrt: `z -> sqrt(max(z, 0))`, the variance-stabilising map from
//!   `Normal(n p, n diag p)` towards `Normal(sqrt(n p), I/4)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distances::{
    mc_mean, tv_discrete, tv_gaussian_pair_mc, tv_jittered_vs_gaussian, tv_monte_carlo, CubeTable, TvMethod,
    TvResult, DEFAULT_QUAD_ORDER, MIN_MC_SAMPLES,
};
use crate::gaussian::{build_gaussian, independent_gaussian, std_normal_cdf, vst_target, GaussianLaw};
use crate::lattice::{ExperimentParams, LatticePoint};
use crate::pmf::DiscreteLaw;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelTag {
    Jitter,
    Round,
    SqrtVst,
}

const JITTER_BITS: i32 = 32;

/// `k + u` with `u` uniform on `(-1/2, 1/2)^d`.
///
/// Offsets are odd multiples of `2^-33`, so `k + u` is exact for counts
/// below `2^20` and never lands on a half-integer; rounding recovers `k`.
pub fn apply_jitter<R: Rng + ?Sized>(k: &LatticePoint, rng: &mut R) -> Vec<f64> {
    let scale = (2.0f64).powi(-JITTER_BITS);
    k.coords()
        .iter()
        .map(|&ki| {
            let m = rng.random::<u32>() as f64;
            ki as f64 + ((m + 0.5) * scale - 0.5)
        })
        .collect()
}

/// Componentwise nearest integer, halves rounded away from zero. The
/// result may fall outside the support.
pub fn apply_round(z: &[f64]) -> Vec<i64> {
    z.iter().map(|v| v.round() as i64).collect()
}

/// Componentwise `sqrt(max(z, 0))`.
pub fn sqrt_vst_pushforward(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0).sqrt()).collect()
}

/// Upper bounds on both one-sided deficiencies between the hypergeometric
/// and Gaussian experiments at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficiencyReport {
    /// TV between the jittered hypergeometric and the Gaussian.
    pub delta_p_to_q: TvResult,
    /// Bound through round-after-jitter; equal to `delta_p_to_q` by data
    /// processing.
    pub delta_q_to_p: TvResult,
    pub le_cam_upper: f64,
    /// `d / sqrt(n) * sqrt(max p / min p)`.
    pub budget: f64,
    /// Exact TV between the hypergeometric and multinomial laws, which
    /// equals the TV between their jittered versions.
    pub jitter_gap: TvResult,
    /// TV between the jittered multinomial and the Gaussian.
    pub multinomial_gap: TvResult,
}

impl DeficiencyReport {
    /// `le_cam_upper * sqrt(n) / d`, an empirical stand-in for the
    /// unspecified constant.
    pub fn constant_proxy(&self, params: &ExperimentParams) -> f64 {
        self.le_cam_upper * (params.sample() as f64).sqrt() / params.dim() as f64
    }
}

fn jittered_tv(params: &ExperimentParams, law: DiscreteLaw, gaussian: &GaussianLaw, method: TvMethod) -> Result<TvResult> {
    match method {
        TvMethod::Quadrature { order } => tv_jittered_vs_gaussian(params, law, gaussian, order),
        TvMethod::MonteCarlo { samples, seed } => tv_monte_carlo(params, law, gaussian, samples, seed),
    }
}

/// Deficiency bounds realised by the jitter kernel (hypergeometric to
/// Gaussian) and the round kernel (Gaussian to hypergeometric). Requires
/// `n <= 3N/4`.
pub fn deficiency_upper_bounds(params: &ExperimentParams, method: TvMethod) -> Result<DeficiencyReport> {
    params.check_bound_regime()?;
    let gaussian = build_gaussian(params)?;
    let forward = jittered_tv(params, DiscreteLaw::Hypergeometric, &gaussian, method)?;
    let multinomial_gap = jittered_tv(params, DiscreteLaw::Multinomial, &gaussian, method)?;
    let jitter_gap = tv_discrete(params, DiscreteLaw::Hypergeometric, DiscreteLaw::Multinomial)?;
    let backward = forward;
    Ok(DeficiencyReport {
        delta_p_to_q: forward,
        delta_q_to_p: backward,
        le_cam_upper: forward.value.max(backward.value).clamp(0.0, 1.0),
        budget: params.dim() as f64 / (params.sample() as f64).sqrt() * params.weight_ratio().sqrt(),
        jitter_gap,
        multinomial_gap,
    })
}

/// Both sides of the data-processing step behind the round kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpiCheck {
    /// TV between the jittered hypergeometric and the Gaussian.
    pub tv_before: f64,
    /// TV between the hypergeometric and the rounded Gaussian.
    pub tv_after: f64,
    /// Combined quadrature error of both values.
    pub error: f64,
}

impl DpiCheck {
    pub fn slack(&self) -> f64 {
        self.tv_before - self.tv_after
    }
}

pub fn data_processing_check(params: &ExperimentParams, quad_order: usize) -> Result<DpiCheck> {
    let gaussian = build_gaussian(params)?;
    let table = CubeTable::new(params, DiscreteLaw::Hypergeometric, &gaussian, quad_order)?;
    let fine = CubeTable::new(params, DiscreteLaw::Hypergeometric, &gaussian, 2 * quad_order)?;
    let (before, after) = (table.tv_jittered(), table.tv_rounded());
    let error = (before - fine.tv_jittered()).abs() + (after - fine.tv_rounded()).abs() + 1e-14;
    Ok(DpiCheck {
        tv_before: before,
        tv_after: after,
        error,
    })
}

/// `data_processing_check` at the default order.
pub fn data_processing_check_default(params: &ExperimentParams) -> Result<DpiCheck> {
    data_processing_check(params, DEFAULT_QUAD_ORDER)
}

/// Monte Carlo TV between the correlated Gaussian `Normal(n p, n Sigma_p)`
/// and the independent one `Normal(n p, n diag p)`.
pub fn tv_correlated_vs_independent(params: &ExperimentParams, samples: usize, seed: u64) -> Result<TvResult> {
    tv_gaussian_pair_mc(&build_gaussian(params)?, &independent_gaussian(params)?, samples, seed)
}

/// Log-density of the pushforward of `Normal(mu, diag(var))` under the
/// componentwise square root, at a point with all coordinates positive:
/// `sum_i ln(2 y_i) + ln phi_i(y_i^2)`.
fn sqrt_pushforward_log_density(source: &GaussianLaw, y: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, &yi)| {
            let var = source.covariance()[(i, i)];
            let u = yi * yi - source.mean()[i];
            (2.0 * yi).ln() - 0.5 * (std::f64::consts::TAU * var).ln() - 0.5 * u * u / var
        })
        .sum()
}

/// Monte Carlo TV between the square-root pushforward of the independent
/// Gaussian and `Normal(sqrt(n p), I/4)`. Clamped draws carry no target
/// density and contribute 1.
pub fn tv_vst_mc(params: &ExperimentParams, samples: usize, seed: u64) -> Result<TvResult> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    let source = independent_gaussian(params)?;
    let target = vst_target(params)?;
    let (mean, se) = mc_mean(samples, seed, |rng| {
        let z = source.sample(rng);
        if z.iter().any(|&v| v <= 0.0) {
            return 1.0;
        }
        let y = sqrt_vst_pushforward(&z);
        (1.0 - (target.log_density(&y) - sqrt_pushforward_log_density(&source, &y)).exp()).max(0.0)
    });
    Ok(TvResult {
        value: mean,
        method: crate::distances::TvMethodTag::MonteCarlo,
        error_estimate: se,
    })
}

/// Probability that coordinate `i` of `law` is negative, i.e. that the
/// square-root map clamps it.
pub fn clamp_probability(law: &GaussianLaw, i: usize) -> f64 {
    std_normal_cdf(-law.mean()[i] / law.marginal_sd(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn params(n_pop: u64, n: u64, counts: &[u64]) -> ExperimentParams {
        ExperimentParams::new(n_pop, n, counts.to_vec()).unwrap()
    }

    #[test]
    fn jitter_stays_in_cube_and_rounds_back() {
        let mut rng = stream_rng(3, 0);
        let k = LatticePoint::new(vec![0, 7, 1_000_000 - 1], 2_000_000).unwrap();
        for _ in 0..10_000 {
            let x = apply_jitter(&k, &mut rng);
            for (xi, &ki) in x.iter().zip(k.coords()) {
                assert!(*xi > ki as f64 - 0.5 && *xi < ki as f64 + 0.5);
            }
            let back = apply_round(&x);
            assert!(back.iter().zip(k.coords()).all(|(&b, &ki)| b == ki as i64));
        }
    }

    #[test]
    fn round_examples() {
        assert_eq!(apply_round(&[2.4, -0.3]), vec![2, 0]);
        assert_eq!(apply_round(&[3.0, -2.0, 0.0]), vec![3, -2, 0]);
        assert_eq!(apply_round(&[2.5, -2.5]), vec![3, -3]);
    }

    #[test]
    fn sqrt_map_examples() {
        assert_eq!(sqrt_vst_pushforward(&[16.0, -3.0]), vec![4.0, 0.0]);
        let p = params(32, 16, &[16, 16]);
        let q_bar = independent_gaussian(&p).unwrap();
        let y = sqrt_vst_pushforward(&[q_bar.mean()[0]]);
        assert!((y[0] - 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn clamp_probabilities() {
        let p = params(32, 16, &[16, 16]);
        let q = build_gaussian(&p).unwrap();
        let q_bar = independent_gaussian(&p).unwrap();
        // Normal(8, 4): P(Z < 0) = Phi(-4)
        assert!(clamp_probability(&q, 0) < 1e-4);
        assert!((clamp_probability(&q, 0) - std_normal_cdf(-4.0)).abs() < 1e-18);
        // Normal(8, 8): P(Z < 0) = Phi(-sqrt 8)
        let want = std_normal_cdf(-(8f64.sqrt()));
        assert!((clamp_probability(&q_bar, 0) / want - 1.0).abs() < 1e-13);
    }

    #[test]
    fn deficiency_report_fields() {
        let p = params(64, 4, &[32, 32]);
        let r = deficiency_upper_bounds(&p, TvMethod::default()).unwrap();
        assert_eq!(r.le_cam_upper, r.delta_p_to_q.value.max(r.delta_q_to_p.value));
        assert!((0.0..=1.0).contains(&r.le_cam_upper));
        assert!((r.budget - 0.5).abs() < 1e-15);
        assert!(matches!(
            deficiency_upper_bounds(&params(8, 7, &[4, 4]), TvMethod::default()),
            Err(Error::Regime { .. })
        ));
    }

    #[test]
    fn dpi_small_instance() {
        let c = data_processing_check_default(&params(40, 6, &[20, 20])).unwrap();
        assert!(c.slack() >= -c.error);
        assert!(c.tv_after <= c.tv_before + c.error);
    }
}
