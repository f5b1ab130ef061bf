//! Standard normal density and distribution helpers.
//!
//! Upper-tail probabilities go through `erfc` directly so that interval
//! masses far out in either tail keep their relative precision.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// 1 / sqrt(2 pi)
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// ln sqrt(2 pi)
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

#[inline]
pub fn ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Phi(z).
#[inline]
pub fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// 1 - Phi(z), accurate for large positive z.
#[inline]
pub fn sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Phi(b) - Phi(a) for a <= b, choosing the tail that avoids cancellation.
///
/// A tail term is dropped when it is below 1e-18 of the result, which
/// leaves the double-precision value unchanged.
#[inline]
pub fn interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let p = if a > 0.0 {
        if (b - a) * (a + b) > 90.0 {
            sf(a)
        } else {
            sf(a) - sf(b)
        }
    } else if b < 0.0 {
        if (b - a) * (-a - b) > 90.0 {
            cdf(b)
        } else {
            cdf(b) - cdf(a)
        }
    } else {
        let lower = if a < -9.0 { 0.0 } else { cdf(a) };
        let upper = if b > 9.0 { 0.0 } else { sf(b) };
        1.0 - lower - upper
    };
    p.max(0.0)
}

/// P(X <= x) for X ~ N(mean, sd^2); `sd == 0` is a point mass at `mean`.
#[inline]
pub fn cdf_at(x: f64, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        cdf((x - mean) / sd)
    } else if x >= mean {
        1.0
    } else {
        0.0
    }
}

/// P(X > x) for X ~ N(mean, sd^2); `sd == 0` is a point mass at `mean`.
#[inline]
pub fn sf_at(x: f64, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        sf((x - mean) / sd)
    } else if mean > x {
        1.0
    } else {
        0.0
    }
}

/// P(lo < X <= hi) for X ~ N(mean, sd^2). Either bound may be infinite.
#[inline]
pub fn mass_between(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    if sd > 0.0 {
        interval((lo - mean) / sd, (hi - mean) / sd)
    } else if lo < mean && mean <= hi {
        1.0
    } else {
        0.0
    }
}

/// Density of N(mean, sd^2) at x.
#[inline]
pub fn pdf_at(x: f64, mean: f64, sd: f64) -> f64 {
    pdf((x - mean) / sd) / sd
}

/// Log density of N(mean, variance) at x.
#[inline]
pub fn ln_pdf_var(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * variance).ln() - 0.5 * d * d / variance
}
