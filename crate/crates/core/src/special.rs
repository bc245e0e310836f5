//! Thin wrappers around special functions plus the Kolmogorov limit law.

use crate::error::{Error, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::PI;

pub use statrs::function::beta::beta_reg;
pub use statrs::function::gamma::{gamma, ln_gamma};

const SERIES_CAP: usize = 10_000;

/// Sum of a positive series `1 + Σ_{r≥1} t_r` given the ratio `t_{r}/t_{r−1}`,
/// returned without the leading `1` so callers can use `ln_1p`.
fn positive_series_tail<R: Fn(usize) -> f64>(ratio: R, what: &str) -> Result<f64> {
    let mut term = 1.0;
    let mut tail = 0.0;
    for r in 1..=SERIES_CAP {
        term *= ratio(r);
        tail += term;
        if term <= 1e-17 * (1.0 + tail) {
            return Ok(tail);
        }
        if !tail.is_finite() {
            break;
        }
    }
    Err(Error::numerical(what, term))
}

/// `Γ(p+1)(x/2)^{−p} I_p(x) − 1`, the tail of the normalized Bessel series.
pub fn bessel_i_scaled_tail(p: f64, x: f64) -> Result<f64> {
    let q = x * x / 4.0;
    positive_series_tail(|r| q / (r as f64 * (p + r as f64)), "Bessel series")
}

/// Modified Bessel function of the first kind `I_p(x)` for `p ≥ 0`, `x ≥ 0`,
/// summed from its power series.
pub fn bessel_i(p: f64, x: f64) -> Result<f64> {
    if p < 0.0 || x < 0.0 {
        return Err(Error::Domain(format!("bessel_i needs p, x ≥ 0 (got p={p}, x={x})")));
    }
    if x == 0.0 {
        return Ok(if p == 0.0 { 1.0 } else { 0.0 });
    }
    let tail = bessel_i_scaled_tail(p, x)?;
    Ok((p * (x / 2.0).ln() - ln_gamma(p + 1.0) + tail.ln_1p()).exp())
}

/// `M(a, b, x) − 1` for Kummer's confluent hypergeometric function, `x ≥ 0`.
pub fn kummer_m_tail(a: f64, b: f64, x: f64) -> Result<f64> {
    if x < 0.0 || a <= 0.0 || b <= 0.0 {
        return Err(Error::Domain(format!(
            "kummer_m needs a, b > 0 and x ≥ 0 (got a={a}, b={b}, x={x})"
        )));
    }
    positive_series_tail(
        |r| (a + r as f64 - 1.0) / (b + r as f64 - 1.0) * x / r as f64,
        "Kummer series",
    )
}

/// Kummer's function `M(a, b, x)` for `a, b > 0`, `x ≥ 0`.
pub fn kummer_m(a: f64, b: f64, x: f64) -> Result<f64> {
    Ok(1.0 + kummer_m_tail(a, b, x)?)
}

/// Upper tail `P(K > x)` of the Kolmogorov distribution `K = sup |B(t)|`.
///
/// Uses the alternating series for `x ≥ 1` and the Jacobi-transformed series
/// for small `x`; both are summed until the terms drop below `1e-16`, well
/// past the `1e-10` accuracy needed for p-values.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // CDF = √(2π)/x Σ_{k≥1} exp(−(2k−1)²π²/(8x²))
        let c = PI * PI / (8.0 * x * x);
        let mut sum = 0.0;
        for k in 1..200 {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * c).exp();
            sum += term;
            if term < 1e-17 {
                break;
            }
        }
        (1.0 - (2.0 * PI).sqrt() / x * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sum += sign * term;
            sign = -sign;
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// CDF of the χ² distribution with `dof` degrees of freedom.
pub fn chi2_cdf(dof: f64, x: f64) -> f64 {
    ChiSquared::new(dof).map(|c| c.cdf(x)).unwrap_or(f64::NAN)
}

/// Quantile of the χ² distribution.
pub fn chi2_quantile(dof: f64, p: f64) -> f64 {
    ChiSquared::new(dof).map(|c| c.inverse_cdf(p)).unwrap_or(f64::NAN)
}

/// Empirical `p`-quantile (type 7, linear interpolation) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sort a vector of finite floats ascending.
pub fn sort_floats(v: &mut [f64]) {
    v.sort_by(|a, b| a.total_cmp(b));
}
