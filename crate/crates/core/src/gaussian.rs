//! Normal distribution primitives: density, CDF, survival function, a
//! bisection-based inverse CDF, and truncated-Gaussian interval moments.

use libm::erfc;

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Half-width, in standard deviations, of the initial bisection bracket.
pub const PPF_BRACKET_SIGMAS: f64 = 12.0;
const MAX_BISECTION_STEPS: usize = 256;

/// Standard normal density.
#[inline]
pub fn std_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF, accurate in the lower tail.
#[inline]
pub fn std_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal survival function `1 - cdf`, accurate in the upper tail.
#[inline]
pub fn std_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")))
    }
}

pub fn gaussian_pdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(std_pdf((x - mu) / sigma) / sigma)
}

pub fn gaussian_cdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(std_cdf((x - mu) / sigma))
}

/// Finds `x` in `[lo, hi]` with `f(x) = target` for non-decreasing `f`,
/// bisecting until the bracket cannot be split further.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == target {
            return mid;
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Both ends bracket the root to within one ulp; pick the closer one.
    if (f(hi) - target).abs() < (target - f(lo)).abs() {
        hi
    } else {
        lo
    }
}

/// Inverse CDF by bracketed bisection on [`gaussian_cdf`].
///
/// The bracket starts at `mu ± 12 sigma` and widens if `p` lies further out,
/// so the result is consistent with the forward CDF to rounding.
pub fn gaussian_ppf(p: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    let (mut lo, mut hi) = (-PPF_BRACKET_SIGMAS, PPF_BRACKET_SIGMAS);
    while std_cdf(lo) > p {
        lo *= 2.0;
    }
    while std_cdf(hi) < p && hi < 64.0 {
        hi *= 2.0;
    }
    let z = if p > 0.5 {
        // Upper half: invert the survival function to keep tail precision.
        let q = 1.0 - p;
        bisect(|z| -std_sf(z), -q, lo, hi)
    } else {
        bisect(std_cdf, p, lo, hi)
    };
    Ok(mu + sigma * z)
}

/// Probability mass of the standard normal on `[a, b]`, computed on whichever
/// tail keeps the subtraction well conditioned.
pub fn std_interval_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        std_sf(a) - std_sf(b)
    } else if b <= 0.0 {
        std_cdf(b) - std_cdf(a)
    } else {
        1.0 - std_cdf(a) - std_sf(b)
    }
}

/// Conditional mean of `N(mu, sigma²)` restricted to `[lo, hi]`, or `None`
/// when the interval mass underflows.
pub fn truncated_mean(mu: f64, sigma: f64, lo: f64, hi: f64) -> Option<f64> {
    let (a, b) = ((lo - mu) / sigma, (hi - mu) / sigma);
    let mass = std_interval_mass(a, b);
    if !(mass > 0.0) {
        return None;
    }
    let m = mu + sigma * (std_pdf(a) - std_pdf(b)) / mass;
    m.is_finite().then_some(m)
}
