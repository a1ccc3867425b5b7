//! Log-factorials and log-binomial coefficients.

use std::sync::OnceLock;

use crate::sum::CompensatedSum;

/// Largest argument served from the exact cumulative table.
pub const TABLE_MAX: u64 = 1024;

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut out = Vec::with_capacity(TABLE_MAX as usize + 1);
        let mut acc = CompensatedSum::new();
        out.push(0.0);
        for m in 1..=TABLE_MAX {
            acc.add((m as f64).ln());
            out.push(acc.value());
        }
        out
    })
}

/// Stirling series for `ln m!` with corrections through `m^-7`.
pub fn log_factorial_stirling(m: u64) -> f64 {
    let x = m as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/(12m) - 1/(360m^3) + 1/(1260m^5) - 1/(1680m^7)
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * x.ln() - x + series
}

/// `ln(m!)`: exact cumulative table up to [`TABLE_MAX`], Stirling series
/// above.
pub fn log_factorial(m: u64) -> f64 {
    if m <= TABLE_MAX {
        table()[m as usize]
    } else {
        log_factorial_stirling(m)
    }
}

/// `ln C(a, b)`, `-inf` when `b < 0` or `b > a`.
pub fn log_binomial(a: u64, b: i64) -> f64 {
    if b < 0 || b as u64 > a {
        return f64::NEG_INFINITY;
    }
    let b = b as u64;
    if b == 0 || b == a {
        return 0.0;
    }
    log_factorial(a) - log_factorial(b) - log_factorial(a - b)
}
