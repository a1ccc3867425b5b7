//! The log-ratio `ln(P_{N,n,p}(k) / Q_{n,p}(k))` of the hypergeometric and
//! multinomial PMFs, and its local expansions in powers of `1/N`:
//!
//! ```text
//! order 1:  (1/N)   [ (n^2/2 - n/2)         - sum_i (k_i^2/2 - k_i/2) / p_i ]
//! order 2:  order 1
//!         + (1/N^2) [ (n^3/6 - n^2/4 + n/12) - sum_i (k_i^3/6 - k_i^2/4 + k_i/12) / p_i^2 ]
//! ```
//!
//! with `i` running over all `d + 1` categories. On the truncation set
//! `max_i k_i / p_i <= gamma N`, `n <= gamma N` with `gamma < 1`, the
//! first-order residual decays like `N^-2` and the second-order one like
//! `N^-3` for fixed `n` and `k`.

use serde::{Deserialize, Serialize};

use crate::fit::{fit_log_log, FitOutcome};
use crate::lattice::{in_truncated_set, ExperimentParams, LatticePoint};
use crate::report::ScanRecord;
use crate::special::log_factorial;
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Default truncation parameter for scans, matching the `n <= 3N/4`
/// regime of the distance bounds.
pub const DEFAULT_GAMMA: f64 = 0.75;

/// Residuals at or below this magnitude count as zero when fitting.
pub const ZERO_RESIDUAL: f64 = 1e-13;

/// The exact log-ratio at one point together with both expansions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionResult {
    pub exact: f64,
    pub order1: f64,
    pub order2: f64,
    pub residual1: f64,
    pub residual2: f64,
}

/// `ln P(k) - ln Q(k)`, assembled term by term as
/// `sum ln (N p_i)! - sum ln (N p_i - k_i)! + ln (N - n)! - ln N! - sum k_i ln p_i`,
/// where the `k_i!` and `n!` factors of both PMFs have cancelled.
pub fn log_ratio_exact(params: &ExperimentParams, k: &LatticePoint) -> Result<f64> {
    if !params.contains(k) {
        return Err(Error::OutsideSupport {
            point: k.coords().to_vec(),
        });
    }
    let (big_n, n) = (params.population(), params.sample());
    let mut acc = CompensatedSum::new();
    for (ki, &c) in k.all_counts().zip(params.counts()) {
        acc.add(log_factorial(c));
        acc.add(-log_factorial(c - ki));
        if ki > 0 {
            acc.add(-(ki as f64) * (c as f64 / big_n as f64).ln());
        }
    }
    acc.add(log_factorial(big_n - n));
    acc.add(-log_factorial(big_n));
    Ok(acc.value())
}

/// `(1/N) [ (n^2/2 - n/2) - sum_i (1/p_i)(k_i^2/2 - k_i/2) ]`.
pub fn expansion_order1(params: &ExperimentParams, k: &LatticePoint) -> f64 {
    let big_n = params.population() as f64;
    let n = params.sample() as f64;
    let mut bracket = CompensatedSum::new();
    // x^2/2 - x/2 = x(x - 1)/2, exact for integer x
    let quadratic = |x: f64| x * (x - 1.0) / 2.0;
    bracket.add(quadratic(n));
    for (ki, &c) in k.all_counts().zip(params.counts()) {
        let inv_p = big_n / c as f64;
        bracket.add(-inv_p * quadratic(ki as f64));
    }
    bracket.value() / big_n
}

/// The `N^-2` correction added by the second-order expansion:
/// `(1/N^2) [ (n^3/6 - n^2/4 + n/12) - sum_i (1/p_i^2)(k_i^3/6 - k_i^2/4 + k_i/12) ]`.
pub fn second_order_term(params: &ExperimentParams, k: &LatticePoint) -> f64 {
    let big_n = params.population() as f64;
    let n = params.sample() as f64;
    // x^3/6 - x^2/4 + x/12 = x(x - 1)(2x - 1)/12
    let cubic = |x: f64| x * (x - 1.0) * (2.0 * x - 1.0) / 12.0;
    let mut bracket = CompensatedSum::new();
    bracket.add(cubic(n));
    for (ki, &c) in k.all_counts().zip(params.counts()) {
        let inv_p = big_n / c as f64;
        bracket.add(-inv_p * inv_p * cubic(ki as f64));
    }
    bracket.value() / (big_n * big_n)
}

/// First-order expansion plus [`second_order_term`].
pub fn expansion_order2(params: &ExperimentParams, k: &LatticePoint) -> f64 {
    expansion_order1(params, k) + second_order_term(params, k)
}

pub fn expand(params: &ExperimentParams, k: &LatticePoint) -> Result<ExpansionResult> {
    let exact = log_ratio_exact(params, k)?;
    let order1 = expansion_order1(params, k);
    let order2 = order1 + second_order_term(params, k);
    Ok(ExpansionResult {
        exact,
        order1,
        order2,
        residual1: exact - order1,
        residual2: exact - order2,
    })
}

/// Which expansion a residual scan measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpansionOrder {
    First,
    Second,
}

impl ExpansionOrder {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            _ => Err(Error::InvalidArgument(format!("expansion order must be 1 or 2, got {order}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Self::First => 1,
            Self::Second => 2,
        }
    }
}

/// Records of a residual scan and the log-log slope fit of
/// `|residual|` against `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualScan {
    pub records: Vec<ScanRecord>,
    pub fit: FitOutcome,
}

/// Measures `|exact - expansion|` along a family of parameters with
/// growing `N`. `k_rule` picks the lattice point for each member.
///
/// `gamma` must lie in `(0, 1)`; every `(params, k)` must satisfy
/// `n <= gamma N` and `max_i k_i / p_i <= gamma N`.
pub fn residual_scan<F>(
    family: &[ExperimentParams],
    k_rule: F,
    order: ExpansionOrder,
    gamma: f64,
) -> Result<ResidualScan>
where
    F: Fn(&ExperimentParams) -> Result<LatticePoint>,
{
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty parameter family".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let mut records = Vec::with_capacity(family.len());
    let mut xs = Vec::with_capacity(family.len());
    let mut ys = Vec::with_capacity(family.len());
    for params in family {
        let k = k_rule(params)?;
        if !params.contains(&k) {
            return Err(Error::OutsideSupport {
                point: k.coords().to_vec(),
            });
        }
        if params.sample() as f64 > gamma * params.population() as f64 || !in_truncated_set(params, &k, gamma) {
            return Err(Error::OutsideTruncation {
                point: k.coords().to_vec(),
                gamma,
            });
        }
        let e = expand(params, &k)?;
        let residual = match order {
            ExpansionOrder::First => e.residual1,
            ExpansionOrder::Second => e.residual2,
        };
        xs.push(params.population() as f64);
        ys.push(residual);
        records.push(ScanRecord::new(
            params,
            format!("residual{}", order.as_int()),
            residual.abs(),
            0.0,
            "exact",
        ));
    }
    let fit = fit_log_log(&xs, &ys, ZERO_RESIDUAL)?;
    Ok(ResidualScan { records, fit })
}
