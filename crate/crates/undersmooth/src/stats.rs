//! Distribution helpers shared across modules.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Standard normal quantile, polished with two Newton steps so downstream
/// penalty levels and interval endpoints are stable to ~1e-14.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::invalid("quantile", format!("p = {p} outside (0,1)")));
    }
    let dist = Normal::standard();
    let mut z = dist.inverse_cdf(p);
    for _ in 0..2 {
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf <= f64::MIN_POSITIVE {
            break;
        }
        z -= (dist.cdf(z) - p) / pdf;
    }
    Ok(z)
}

/// Two-sided critical value z such that P(|Z| <= z) = 1 - alpha.
pub fn z_critical(alpha: f64) -> Result<f64> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("{alpha} outside (0,1)")));
    }
    normal_quantile(1.0 - alpha / 2.0)
}

/// Upper tail P(chi²_df > w).
pub fn chi2_sf(w: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::invalid("chi2_sf", "zero degrees of freedom"));
    }
    if w < 0.0 {
        return Ok(1.0);
    }
    let dist = ChiSquared::new(df as f64)
        .map_err(|e| Error::invalid("chi2_sf", e.to_string()))?;
    Ok(dist.sf(w))
}
