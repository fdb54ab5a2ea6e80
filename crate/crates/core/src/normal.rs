//! Standard normal CDF and the Kolmogorov-Smirnov distance of a sample.

use alloc::vec::Vec;

use crate::fmath;

/// Standard normal CDF via the complementary error function,
/// `Phi(x) = erfc(-x / sqrt(2)) / 2`. Absolute error is well below 1e-10;
/// the symmetry and monotonicity tests gate the accuracy.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * fmath::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Sup distance between the empirical CDF of `sample` and the standard
/// normal CDF, evaluated at the jump points from both sides.
pub fn ks_distance_to_std_normal(sample: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = sample.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut sup = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let phi = std_normal_cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        sup = sup.max(fmath::abs(lo - phi)).max(fmath::abs(hi - phi));
    }
    sup
}
