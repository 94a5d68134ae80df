//! Standard normal helpers.

use libm::erfc;
use std::f64::consts::FRAC_1_SQRT_2;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

#[inline]
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// `f(z) = phi(z) + z Phi(z)`, i.e. `E[max(Z + z, 0)]`.
///
/// Below `z = -6` the two terms nearly cancel; there the asymptotic expansion
/// `phi(z) (1/z^2 - 3/z^4 + 15/z^6 - ...)` is summed until its terms stop shrinking.
pub fn expected_positive_part(z: f64) -> f64 {
    if z >= -6.0 {
        return pdf(z) + z * cdf(z);
    }
    let inv_z2 = 1.0 / (z * z);
    let mut term = inv_z2;
    let mut sum = 0.0;
    for k in 1..40 {
        sum += term;
        let next = -term * (2 * k + 1) as f64 * inv_z2;
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
            break;
        }
        term = next;
    }
    pdf(z) * sum
}
