//! Multivariate normal laws evaluated through a cached Cholesky factor.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::lattice::ExperimentParams;
use crate::pmf::multinomial_covariance;
use crate::{Error, Result};

/// `Normal_d(mean, covariance)`.
#[derive(Debug, Clone)]
pub struct GaussianLaw {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    cholesky_factor: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

/// Restriction of a log-density to a line along the last axis:
/// `ln phi(t) = peak_log - precision (t - center)^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineProfile {
    pub center: f64,
    pub peak_log: f64,
    pub precision: f64,
}

impl LineProfile {
    pub fn log_density(&self, t: f64) -> f64 {
        let u = t - self.center;
        self.peak_log - 0.5 * self.precision * u * u
    }

    /// Points where the profile equals `level` (`ln` of a density value),
    /// in increasing order. Empty when the peak is at or below the level.
    pub fn crossings(&self, log_level: f64) -> Option<(f64, f64)> {
        let gap = self.peak_log - log_level;
        if gap <= 0.0 || !gap.is_finite() {
            return None;
        }
        let half_width = (2.0 * gap / self.precision).sqrt();
        Some((self.center - half_width, self.center + half_width))
    }
}

impl GaussianLaw {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::InvalidArgument("mean and covariance shapes disagree".into()));
        }
        let chol = covariance.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let cholesky_factor = chol.l();
        let precision = chol.inverse();
        let log_det: f64 = 2.0 * cholesky_factor.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self {
            mean,
            covariance,
            cholesky_factor,
            precision,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Lower-triangular `L` with `L L^T = covariance`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.cholesky_factor
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        // forward substitution L y = x - mean
        let mut y = vec![0.0; d];
        let mut quad = 0.0;
        for i in 0..d {
            let mut acc = x[i] - self.mean[i];
            for j in 0..i {
                acc -= self.cholesky_factor[(i, j)] * y[j];
            }
            y[i] = acc / self.cholesky_factor[(i, i)];
            quad += y[i] * y[i];
        }
        self.log_norm - 0.5 * quad
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// Profile of the log-density along the last axis with the first
    /// `d - 1` coordinates fixed to `outer`.
    pub fn line_profile(&self, outer: &[f64]) -> LineProfile {
        let d = self.dim();
        let last = d - 1;
        let lam = &self.precision;
        let y: Vec<f64> = outer.iter().zip(self.mean.iter()).map(|(x, m)| x - m).collect();
        let mut b = 0.0;
        let mut outer_quad = 0.0;
        for i in 0..last {
            b += lam[(last, i)] * y[i];
            for j in 0..last {
                outer_quad += y[i] * lam[(i, j)] * y[j];
            }
        }
        let prec = lam[(last, last)];
        LineProfile {
            center: self.mean[last] - b / prec,
            peak_log: self.log_norm - 0.5 * (outer_quad - b * b / prec),
            precision: prec,
        }
    }

    /// Standard deviation of coordinate `i`.
    pub fn marginal_sd(&self, i: usize) -> f64 {
        self.covariance[(i, i)].sqrt()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| self.mean[i] + (0..=i).map(|j| self.cholesky_factor[(i, j)] * z[j]).sum::<f64>())
            .collect()
    }
}

/// `Normal_d(n p, n (diag(p) - p p^T))`, the Gaussian matched to the
/// multinomial.
pub fn build_gaussian(params: &ExperimentParams) -> Result<GaussianLaw> {
    let d = params.dim();
    let probs = params.probs();
    let n = params.sample() as f64;
    GaussianLaw::new(
        DVector::from_fn(d, |i, _| n * probs[i]),
        multinomial_covariance(params.sample(), &probs, d),
    )
}

/// `Normal_d(n p, n diag(p))`, independent coordinates.
pub fn independent_gaussian(params: &ExperimentParams) -> Result<GaussianLaw> {
    let d = params.dim();
    let probs = params.probs();
    let n = params.sample() as f64;
    GaussianLaw::new(
        DVector::from_fn(d, |i, _| n * probs[i]),
        DMatrix::from_fn(d, d, |i, j| if i == j { n * probs[i] } else { 0.0 }),
    )
}

/// `Normal_d(sqrt(n p), I / 4)`, the target of the square-root map.
pub fn vst_target(params: &ExperimentParams) -> Result<GaussianLaw> {
    let d = params.dim();
    let probs = params.probs();
    let n = params.sample() as f64;
    GaussianLaw::new(
        DVector::from_fn(d, |i, _| (n * probs[i]).sqrt()),
        DMatrix::from_diagonal_element(d, d, 0.25),
    )
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn params(n_pop: u64, n: u64, counts: &[u64]) -> ExperimentParams {
        ExperimentParams::new(n_pop, n, counts.to_vec()).unwrap()
    }

    #[test]
    fn matched_gaussian_moments() {
        let g = build_gaussian(&params(8, 4, &[4, 4])).unwrap();
        assert!((g.mean()[0] - 2.0).abs() < 1e-15);
        assert!((g.covariance()[(0, 0)] - 1.0).abs() < 1e-15);
        let peak = g.density(&[2.0]);
        assert!((peak - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);

        let g = build_gaussian(&params(9, 9, &[3, 3, 3])).unwrap();
        let want = [[2.0, -1.0], [-1.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.covariance()[(i, j)] - want[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn density_matches_explicit_two_by_two_inverse() {
        let g = build_gaussian(&params(9, 9, &[3, 3, 3])).unwrap();
        let x = [3.0, 3.0];
        // inverse of [[2,-1],[-1,2]] is [[2,1],[1,2]]/3, determinant 3
        let y = [x[0] - 3.0, x[1] - 3.0];
        let quad = (2.0 * y[0] * y[0] + 2.0 * y[0] * y[1] + 2.0 * y[1] * y[1]) / 3.0;
        let want = -std::f64::consts::TAU.ln() - 0.5 * 3f64.ln() - 0.5 * quad;
        assert!((g.log_density(&x) - want).abs() < 1e-12);
        let x = [4.5, 1.0];
        let y = [x[0] - 3.0, x[1] - 3.0];
        let quad = (2.0 * y[0] * y[0] + 2.0 * y[0] * y[1] + 2.0 * y[1] * y[1]) / 3.0;
        let want = -std::f64::consts::TAU.ln() - 0.5 * 3f64.ln() - 0.5 * quad;
        assert!((g.log_density(&x) - want).abs() < 1e-12);
    }

    #[test]
    fn exchangeable_weights_give_symmetric_density() {
        let g = build_gaussian(&params(12, 6, &[4, 4, 4])).unwrap();
        assert!((g.log_density(&[1.3, 2.9]) - g.log_density(&[2.9, 1.3])).abs() < 1e-13);
    }

    #[test]
    fn line_profile_agrees_with_density() {
        let g = build_gaussian(&params(20, 10, &[4, 6, 5, 5])).unwrap();
        let outer = [1.7, 3.2];
        let prof = g.line_profile(&outer);
        for t in [-1.0, 0.3, 2.5, 4.0] {
            let direct = g.log_density(&[outer[0], outer[1], t]);
            assert!((prof.log_density(t) - direct).abs() < 1e-12);
        }
        let level = prof.peak_log - 1.0;
        let (a, b) = prof.crossings(level).unwrap();
        assert!((prof.log_density(a) - level).abs() < 1e-12);
        assert!((prof.log_density(b) - level).abs() < 1e-12);
        assert!(prof.crossings(prof.peak_log + 0.1).is_none());
    }

    #[test]
    fn sample_moments() {
        let g = build_gaussian(&params(9, 9, &[3, 3, 3])).unwrap();
        let mut rng = stream_rng(5, 0);
        let m = 200_000;
        let mut s = [0.0; 2];
        let mut c01 = 0.0;
        for _ in 0..m {
            let x = g.sample(&mut rng);
            s[0] += x[0];
            s[1] += x[1];
            c01 += (x[0] - 3.0) * (x[1] - 3.0);
        }
        assert!((s[0] / m as f64 - 3.0).abs() < 0.02);
        assert!((c01 / m as f64 + 1.0).abs() < 0.03);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((std_normal_cdf(-4.0) - 3.167124183311992e-5).abs() < 1e-18);
    }
}
