//! Bijections from bounded and positive ranges onto the real line, so such
//! features can join the Gaussian block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma_pq, gamma_quantile, normal_cdf, normal_quantile};

/// Probabilities are clamped to `[CLAMP, 1 − CLAMP]` before `Φ⁻¹`.
pub const CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "kebab-case")]
pub enum DomainMap {
    /// `Φ⁻¹(x)` for `x ∈ [0, 1]`.
    UnitInterval,
    /// `Φ⁻¹(F_Γ(x))` for `x ≥ 0` with a fitted Gamma(shape, scale).
    Positive { shape: f64, scale: f64 },
}

impl DomainMap {
    /// Method-of-moments Gamma fit to positive values. Degenerate samples
    /// (no spread or a zero mean) fall back to an exponential with the
    /// sample mean, or unit scale.
    pub fn fit_positive(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        if mean > 0.0 && var > 0.0 {
            DomainMap::Positive {
                shape: mean * mean / var,
                scale: var / mean,
            }
        } else {
            log::warn!("positive column has no spread; mapping with an exponential");
            DomainMap::Positive {
                shape: 1.0,
                scale: if mean > 0.0 { mean } else { 1.0 },
            }
        }
    }
}

fn clamp(u: f64) -> f64 {
    u.clamp(CLAMP, 1.0 - CLAMP)
}

/// Maps a value from its natural range onto ℝ.
pub fn map_domain(x: f64, map: &DomainMap) -> Result<f64> {
    match *map {
        DomainMap::UnitInterval => {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::ParameterDomain(format!("{x} is outside [0, 1]")));
            }
            if x <= 0.5 {
                Ok(normal_quantile(clamp(x)))
            } else {
                // 1 − x is exact for x ∈ [0.5, 1].
                Ok(-normal_quantile(clamp(1.0 - x)))
            }
        }
        DomainMap::Positive { shape, scale } => {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::ParameterDomain(format!("{x} is not a nonnegative real")));
            }
            if !(shape > 0.0 && scale > 0.0) {
                return Err(Error::ParameterDomain(format!("gamma({shape}, {scale})")));
            }
            // Use whichever tail keeps relative precision.
            let (p, q) = gamma_pq(shape, x / scale);
            if p <= 0.5 {
                Ok(normal_quantile(clamp(p)))
            } else {
                Ok(-normal_quantile(clamp(q)))
            }
        }
    }
}

/// Inverse of [`map_domain`] on the unclamped range.
pub fn unmap_domain(y: f64, map: &DomainMap) -> f64 {
    let (tail, upper) = if y <= 0.0 {
        (normal_cdf(y), false)
    } else {
        (normal_cdf(-y), true)
    };
    match *map {
        DomainMap::UnitInterval => {
            if upper {
                1.0 - tail
            } else {
                tail
            }
        }
        DomainMap::Positive { shape, scale } => gamma_quantile(tail, shape, scale, upper),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoints_map_to_zero() {
        assert!(map_domain(0.5, &DomainMap::UnitInterval).unwrap().abs() < 1e-15);
        let exp = DomainMap::Positive { shape: 1.0, scale: 2.0 };
        assert!(map_domain(2.0 * std::f64::consts::LN_2, &exp).unwrap().abs() < 1e-12);
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(map_domain(1.5, &DomainMap::UnitInterval).is_err());
        assert!(map_domain(-1.0, &DomainMap::Positive { shape: 1.0, scale: 1.0 }).is_err());
    }

    #[test]
    fn endpoints_are_clamped() {
        let lo = map_domain(0.0, &DomainMap::UnitInterval).unwrap();
        let hi = map_domain(1.0, &DomainMap::UnitInterval).unwrap();
        assert!(lo.is_finite() && hi.is_finite());
        assert!((lo + hi).abs() < 1e-12);
    }

    #[test]
    fn moment_fit() {
        match DomainMap::fit_positive(&[1.0, 3.0]) {
            // mean 2, variance 1
            DomainMap::Positive { shape, scale } => {
                assert!((shape - 4.0).abs() < 1e-12);
                assert!((scale - 0.5).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
    }
}
