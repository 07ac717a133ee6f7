//! Special functions used by the conjugate updates, the lower bound and the
//! domain mappings.
//!
//! The unchecked functions return `NaN` outside their domain so they can sit
//! in hot loops; the `*_checked` variants turn that into an [`Error`].

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
pub const LN_PI: f64 = 1.144_729_885_849_400_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;

// Lanczos approximation, g = 607/128, 15 terms.
const LANCZOS_G: f64 = 4.742_187_5;
const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    0.465_236_289_270_485_8e-4,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_5e-3,
    -0.210_264_441_724_104_9e-3,
    0.217_439_618_115_212_6e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_2e-5,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if !(x > 0.0) || x.is_infinite() {
        return if x == f64::INFINITY { f64::INFINITY } else { f64::NAN };
    }
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the series argument in its accurate range.
        return ln_gamma(x + 1.0) - x.ln();
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Digamma ψ(x) = d/dx ln Γ(x) for `x > 0`.
pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0) || x.is_infinite() {
        return if x == f64::INFINITY { f64::INFINITY } else { f64::NAN };
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Asymptotic series with Bernoulli coefficients B_2k / 2k.
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    shift + x.ln() - 0.5 * inv - series
}

/// Log of the multivariate gamma function Γ_d(x), defined for `x > (d - 1) / 2`.
pub fn ln_mv_gamma(d: usize, x: f64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    if !(x > (d as f64 - 1.0) / 2.0) {
        return f64::NAN;
    }
    let mut acc = (d * (d - 1)) as f64 / 4.0 * LN_PI;
    for i in 1..=d {
        acc += ln_gamma(x + (1.0 - i as f64) / 2.0);
    }
    acc
}

/// Overflow-safe `ln Σ exp(v_i)`. Returns `-∞` for an empty slice or when
/// every entry is `-∞`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub fn ln_factorial(n: f64) -> f64 {
    ln_gamma(n + 1.0)
}

fn domain(name: &str, x: f64) -> Error {
    Error::ParameterDomain(format!("{name} undefined at {x}"))
}

pub fn ln_gamma_checked(x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(ln_gamma(x))
    } else {
        Err(domain("ln_gamma", x))
    }
}

pub fn digamma_checked(x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(digamma(x))
    } else {
        Err(domain("digamma", x))
    }
}

pub fn ln_mv_gamma_checked(d: usize, x: f64) -> Result<f64> {
    let v = ln_mv_gamma(d, x);
    if v.is_nan() {
        Err(domain("ln_mv_gamma", x))
    } else {
        Ok(v)
    }
}

pub fn log_sum_exp_checked(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Input("log_sum_exp of an empty vector".into()));
    }
    Ok(log_sum_exp(values))
}

/// Regularized incomplete gamma functions `(P(a, x), Q(a, x))`.
pub fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    if !(a > 0.0) || x.is_nan() {
        return (f64::NAN, f64::NAN);
    }
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x == f64::INFINITY {
        return (1.0, 0.0);
    }
    let log_prefix = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = sum * log_prefix.exp();
        (p, 1.0 - p)
    } else {
        // Modified Lentz evaluation of the continued fraction for Q.
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        let q = h * log_prefix.exp();
        (1.0 - q, q)
    }
}

/// Standard-normal CDF Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let (p, q) = gamma_pq(0.5, 0.5 * x * x);
    if x < 0.0 {
        0.5 * q
    } else {
        0.5 + 0.5 * p
    }
}

/// Standard-normal survival function 1 − Φ(x), accurate in the upper tail.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard-normal quantile Φ⁻¹(u) for `u ∈ (0, 1)`; `NaN` otherwise.
///
/// Acklam's rational approximation followed by one Halley step against
/// [`normal_cdf`].
pub fn normal_quantile(u: f64) -> f64 {
    if !(u > 0.0 && u < 1.0) {
        return f64::NAN;
    }
    if u > 0.5 {
        return -normal_quantile(1.0 - u);
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let mut x = if u < 0.02425 {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..2 {
        let e = normal_cdf(x) - u;
        let step = e / normal_pdf(x);
        x -= step / (1.0 + 0.5 * x * step);
    }
    x
}

pub fn normal_quantile_checked(u: f64) -> Result<f64> {
    if u > 0.0 && u < 1.0 {
        Ok(normal_quantile(u))
    } else {
        Err(domain("normal_quantile", u))
    }
}

/// CDF of a Gamma distribution with the given shape and scale.
pub fn gamma_cdf(x: f64, shape: f64, scale: f64) -> f64 {
    if !(shape > 0.0 && scale > 0.0) {
        return f64::NAN;
    }
    gamma_pq(shape, x / scale).0
}

/// Survival function of a Gamma distribution.
pub fn gamma_sf(x: f64, shape: f64, scale: f64) -> f64 {
    if !(shape > 0.0 && scale > 0.0) {
        return f64::NAN;
    }
    gamma_pq(shape, x / scale).1
}

fn gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
}

/// Inverts the Gamma CDF. `prob` is a lower-tail probability when `upper` is
/// false and an upper-tail probability otherwise, so both tails keep full
/// relative precision.
pub fn gamma_quantile(prob: f64, shape: f64, scale: f64, upper: bool) -> f64 {
    if !(prob > 0.0 && prob < 1.0) || !(shape > 0.0 && scale > 0.0) {
        return f64::NAN;
    }
    // Wilson–Hilferty starting point.
    let z = if upper {
        -normal_quantile(prob)
    } else {
        normal_quantile(prob)
    };
    let c = 1.0 / (9.0 * shape);
    let wh = shape * (1.0 - c + z * c.sqrt()).powi(3);
    let mut x = if wh > 0.0 { wh } else { (prob * shape * ln_gamma(shape).exp()).powf(1.0 / shape).max(1e-300) };
    // Work in standardized units then rescale.
    let target = |t: f64| -> f64 {
        let (p, q) = gamma_pq(shape, t);
        if upper {
            prob - q
        } else {
            p - prob
        }
    };
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    for _ in 0..200 {
        let f = target(x);
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let dens = gamma_ln_pdf(x, shape, 1.0).exp();
        let mut next = x - f / dens;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(lo) + 1.0 };
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() {
            x = next;
            break;
        }
        x = next;
    }
    x * scale
}
