//! Error-rate estimates.

use serde::{Deserialize, Serialize};

const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% confidence for `errors` out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = errors as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (center - half).clamp(0.0, phat) };
    let hi = if errors >= trials { 1.0 } else { (center + half).clamp(phat, 1.0) };
    (lo, hi)
}

/// Empirical error probability with its Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRate {
    pub trials: u64,
    pub errors: u64,
    pub pe: f64,
    pub pe_lo: f64,
    pub pe_hi: f64,
}

impl ErrorRate {
    pub fn new(errors: u64, trials: u64) -> Self {
        let (pe_lo, pe_hi) = wilson_interval(errors, trials);
        let pe = if trials == 0 { 0.0 } else { errors as f64 / trials as f64 };
        Self { trials, errors, pe, pe_lo, pe_hi }
    }
}
