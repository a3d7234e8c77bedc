//! Standard normal helpers.

use libm::erfc;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `1 - cdf(x)`, accurate in the upper tail.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Log density of `N(mean, variance)` at `x`.
pub fn log_density(x: f64, mean: f64, variance: f64) -> f64 {
    let r = x - mean;
    -LN_SQRT_2PI - 0.5 * variance.ln() - 0.5 * r * r / variance
}
