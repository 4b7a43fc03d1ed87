//! Standard normal distribution functions accurate in the far tails.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{PI, SQRT_2};

/// ½·ln(2π)
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF Φ(z).
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Upper tail 1 − Φ(z), computed without cancellation.
pub fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// ln Φ(z), finite for every finite z.
pub fn norm_log_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 0.0;
    }
    if z == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if z > -30.0 {
        let p = norm_cdf(z);
        if z > 0.0 {
            // Φ is close to one; go through the upper tail.
            (-norm_sf(z)).ln_1p()
        } else {
            p.ln()
        }
    } else {
        // Asymptotic series for the Mills ratio:
        // Φ(z) = φ(z)/|z| · (1 − 1/z² + 3/z⁴ − 15/z⁶ + 105/z⁸ …)
        let z2 = z * z;
        let inv = 1.0 / z2;
        let series = 1.0 - inv * (1.0 - 3.0 * inv * (1.0 - 5.0 * inv * (1.0 - 7.0 * inv)));
        -0.5 * z2 - (-z).ln() - LN_SQRT_2PI + series.ln()
    }
}

/// ln(1 − Φ(z)).
pub fn norm_log_sf(z: f64) -> f64 {
    norm_log_cdf(-z)
}

/// Inverse of Φ. `p` must lie in [0, 1].
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p <= 0.5 {
        -SQRT_2 * erfc_inv(2.0 * p)
    } else {
        SQRT_2 * erfc_inv(2.0 * (1.0 - p))
    }
}

/// ln(e^a − e^b) for a ≥ b.
pub fn log_diff_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + (-(b - a).exp()).ln_1p()
}

/// ln(e^a + e^b).
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// ln P(a ≤ Z ≤ b) for standard normal Z.
pub fn norm_log_interval(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    if a > 0.0 {
        // both in the upper half: use survival functions
        log_diff_exp(norm_log_sf(a), norm_log_sf(b))
    } else {
        log_diff_exp(norm_log_cdf(b), norm_log_cdf(a))
    }
}
