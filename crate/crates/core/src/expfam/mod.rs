//! Exponential-family likelihoods and their conjugate posteriors.
//!
//! Every likelihood is written as
//!
//! ```text
//! p(x | η) = h(x) · exp(ηᵀ T(x) − a(η))
//! ```
//!
//! with the natural parameters `η`, sufficient statistics `T(x)` and
//! log-partition `a(η)` of the corresponding [`Family`]. Matrix-valued blocks
//! (the Gaussian second-order statistic and its natural parameter) are stored
//! flattened in row-major order.

mod posterior;

pub use posterior::{ConjugatePosterior, NormalWishart, PosteriorExpectations};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::special::{ln_factorial, LN_2PI};

/// Likelihood families with closed-form conjugate posteriors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Binomial with a fixed number of trials; posterior is a Beta.
    Binomial { trials: u32 },
    /// Multinomial over `categories` outcomes; posterior is a Dirichlet.
    Multinomial { trials: u32, categories: usize },
    /// Poisson counts; posterior is a Gamma.
    Poisson,
    /// Multivariate normal of dimension `dim`; posterior is a Normal-Wishart.
    Gaussian { dim: usize },
}

impl Family {
    /// Length of the flattened natural-parameter vector. Equal to the length
    /// of the sufficient-statistic vector.
    pub fn natural_dim(&self) -> usize {
        match *self {
            Family::Binomial { .. } | Family::Poisson => 1,
            Family::Multinomial { categories, .. } => categories,
            Family::Gaussian { dim } => dim + dim * dim,
        }
    }

    pub fn stat_dim(&self) -> usize {
        self.natural_dim()
    }

    /// Number of raw input values one observation occupies.
    pub fn input_dim(&self) -> usize {
        match *self {
            Family::Binomial { .. } | Family::Poisson => 1,
            Family::Multinomial { categories, .. } => categories,
            Family::Gaussian { dim } => dim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Binomial { .. } => "binomial",
            Family::Multinomial { .. } => "multinomial",
            Family::Poisson => "poisson",
            Family::Gaussian { .. } => "gaussian",
        }
    }
}

/// Likelihood parameters in their usual parameterization.
///
/// The Gaussian is parameterized by its precision matrix `Λ = Σ⁻¹`, which is
/// what posterior draws produce; see [`ClassicalParams::gaussian_with_covariance`].
#[derive(Debug, Clone, PartialEq)]
pub enum ClassicalParams {
    Binomial { p: f64 },
    Multinomial { probs: Vec<f64> },
    Poisson { rate: f64 },
    Gaussian { mean: DVector<f64>, precision: DMatrix<f64> },
}

impl ClassicalParams {
    pub fn gaussian_with_covariance(mean: DVector<f64>, covariance: &DMatrix<f64>) -> Result<Self> {
        let precision = linalg::spd_inverse(covariance)
            .map_err(|_| Error::ParameterDomain("covariance is not positive definite".into()))?;
        Ok(ClassicalParams::Gaussian { mean, precision })
    }

    /// Covariance of a Gaussian parameter set.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        match self {
            ClassicalParams::Gaussian { precision, .. } => linalg::spd_inverse(precision).ok(),
            _ => None,
        }
    }
}

/// Flat natural-parameter vector `η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalParams(pub Vec<f64>);

impl NaturalParams {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Maps classical parameters to natural parameters.
pub fn to_natural(family: Family, params: &ClassicalParams) -> Result<NaturalParams> {
    match (family, params) {
        (Family::Binomial { .. }, ClassicalParams::Binomial { p }) => {
            if !(*p > 0.0 && *p < 1.0) {
                return Err(Error::ParameterDomain(format!("binomial p = {p} not in (0, 1)")));
            }
            Ok(NaturalParams(vec![(p / (1.0 - p)).ln()]))
        }
        (Family::Multinomial { categories, .. }, ClassicalParams::Multinomial { probs }) => {
            check_len(categories, probs.len())?;
            if probs.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
                return Err(Error::ParameterDomain("multinomial probabilities must lie in (0, 1]".into()));
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::ParameterDomain(format!("multinomial probabilities sum to {total}")));
            }
            Ok(NaturalParams(probs.iter().map(|p| p.ln()).collect()))
        }
        (Family::Poisson, ClassicalParams::Poisson { rate }) => {
            if !(*rate > 0.0 && rate.is_finite()) {
                return Err(Error::ParameterDomain(format!("poisson rate = {rate} must be positive")));
            }
            Ok(NaturalParams(vec![rate.ln()]))
        }
        (Family::Gaussian { dim }, ClassicalParams::Gaussian { mean, precision }) => {
            check_len(dim, mean.len())?;
            check_len(dim, precision.nrows())?;
            if !linalg::is_spd(precision) {
                return Err(Error::ParameterDomain("precision matrix is not symmetric positive definite".into()));
            }
            let eta1 = precision * mean;
            let mut out: Vec<f64> = eta1.iter().copied().collect();
            out.extend(linalg::flatten(&(precision * -0.5)));
            Ok(NaturalParams(out))
        }
        _ => Err(Error::ParameterDomain(format!(
            "parameters do not belong to the {} family",
            family.name()
        ))),
    }
}

/// Inverse parameter mapping.
pub fn from_natural(family: Family, eta: &NaturalParams) -> Result<ClassicalParams> {
    let eta = eta.as_slice();
    check_len(family.natural_dim(), eta.len())?;
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(Error::ParameterDomain("natural parameters must be finite".into()));
    }
    match family {
        Family::Binomial { .. } => Ok(ClassicalParams::Binomial {
            p: 1.0 / (1.0 + (-eta[0]).exp()),
        }),
        Family::Multinomial { .. } => {
            let probs: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::ParameterDomain(format!(
                    "multinomial natural parameters violate Σ exp(η) = 1 (sum {total})"
                )));
            }
            Ok(ClassicalParams::Multinomial { probs })
        }
        Family::Poisson => Ok(ClassicalParams::Poisson { rate: eta[0].exp() }),
        Family::Gaussian { dim } => {
            let eta1 = DVector::from_column_slice(&eta[..dim]);
            let mut precision = linalg::unflatten(&eta[dim..], dim) * -2.0;
            linalg::symmetrize(&mut precision);
            let chol = nalgebra::Cholesky::new(precision.clone())
                .ok_or_else(|| Error::Conditioning("−2η₂ is not positive definite".into()))?;
            let mean = chol.solve(&eta1);
            Ok(ClassicalParams::Gaussian { mean, precision })
        }
    }
}

fn is_count(v: f64) -> bool {
    v >= 0.0 && v.fract() == 0.0 && v.is_finite()
}

/// Validates that `x` lies in the support of `family`.
pub fn check_support(family: Family, x: &[f64]) -> Result<()> {
    check_len(family.input_dim(), x.len())?;
    match family {
        Family::Binomial { trials } => {
            if !is_count(x[0]) || x[0] > trials as f64 {
                return Err(Error::Support(format!("binomial({trials}) observation {}", x[0])));
            }
        }
        Family::Multinomial { trials, .. } => {
            if x.iter().any(|v| !is_count(*v)) || x.iter().sum::<f64>() != trials as f64 {
                return Err(Error::Support(format!(
                    "multinomial observation must be nonnegative counts summing to {trials}"
                )));
            }
        }
        Family::Poisson => {
            if !is_count(x[0]) {
                return Err(Error::Support(format!("poisson observation {}", x[0])));
            }
        }
        Family::Gaussian { .. } => {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Support("gaussian observation must be finite".into()));
            }
        }
    }
    Ok(())
}

/// Sufficient statistics `T(x)`.
pub fn sufficient_stats(family: Family, x: &[f64]) -> Result<Vec<f64>> {
    check_support(family, x)?;
    Ok(match family {
        Family::Gaussian { dim } => {
            let mut out = Vec::with_capacity(dim + dim * dim);
            out.extend_from_slice(x);
            for i in 0..dim {
                for j in 0..dim {
                    out.push(x[i] * x[j]);
                }
            }
            out
        }
        _ => x.to_vec(),
    })
}

/// ln h(x). Assumes `x` is in the support.
pub fn ln_base_measure(family: Family, x: &[f64]) -> f64 {
    match family {
        Family::Binomial { trials } => {
            let n = trials as f64;
            ln_factorial(n) - ln_factorial(x[0]) - ln_factorial(n - x[0])
        }
        Family::Multinomial { trials, .. } => {
            ln_factorial(trials as f64) - x.iter().map(|v| ln_factorial(*v)).sum::<f64>()
        }
        Family::Poisson => -ln_factorial(x[0]),
        Family::Gaussian { dim } => -0.5 * dim as f64 * LN_2PI,
    }
}

/// Likelihood log-partition a(η).
pub fn log_partition(family: Family, eta: &NaturalParams) -> Result<f64> {
    let e = eta.as_slice();
    check_len(family.natural_dim(), e.len())?;
    match family {
        Family::Binomial { trials } => Ok(trials as f64 * softplus(e[0])),
        Family::Multinomial { .. } => {
            // Σ exp(η) = 1 is enforced instead of carrying a free normalizer.
            from_natural(family, eta)?;
            Ok(0.0)
        }
        Family::Poisson => Ok(e[0].exp()),
        Family::Gaussian { dim } => {
            let eta1 = DVector::from_column_slice(&e[..dim]);
            let mut precision = linalg::unflatten(&e[dim..], dim) * -2.0;
            linalg::symmetrize(&mut precision);
            let chol = nalgebra::Cholesky::new(precision)
                .ok_or_else(|| Error::Conditioning("−2η₂ is not positive definite".into()))?;
            let mean = chol.solve(&eta1);
            Ok(0.5 * eta1.dot(&mean) - 0.5 * linalg::ln_det(&chol))
        }
    }
}

/// ln p(x | η) = ln h(x) + ηᵀT(x) − a(η).
pub fn log_density(family: Family, eta: &NaturalParams, x: &[f64]) -> Result<f64> {
    let stats = sufficient_stats(family, x)?;
    let a = log_partition(family, eta)?;
    let dot: f64 = eta.as_slice().iter().zip(&stats).map(|(e, t)| e * t).sum();
    Ok(ln_base_measure(family, x) + dot - a)
}

/// Precomputed form of a parameter draw for repeated density evaluation.
#[derive(Debug, Clone)]
pub(crate) enum PreparedDensity {
    Binomial { trials: f64, ln_p: f64, ln_q: f64 },
    Multinomial { ln_probs: Vec<f64> },
    Poisson { rate: f64, ln_rate: f64 },
    Gaussian { mean: DVector<f64>, chol_l: DMatrix<f64>, half_ln_det: f64 },
}

impl PreparedDensity {
    pub(crate) fn new(family: Family, params: &ClassicalParams) -> Result<Self> {
        Ok(match (family, params) {
            (Family::Binomial { trials }, ClassicalParams::Binomial { p }) => PreparedDensity::Binomial {
                trials: trials as f64,
                ln_p: p.ln(),
                ln_q: (-p).ln_1p(),
            },
            (Family::Multinomial { .. }, ClassicalParams::Multinomial { probs }) => PreparedDensity::Multinomial {
                ln_probs: probs.iter().map(|p| p.ln()).collect(),
            },
            (Family::Poisson, ClassicalParams::Poisson { rate }) => PreparedDensity::Poisson {
                rate: *rate,
                ln_rate: rate.ln(),
            },
            (Family::Gaussian { .. }, ClassicalParams::Gaussian { mean, precision }) => {
                let chol = linalg::cholesky(precision)?;
                let half_ln_det = 0.5 * linalg::ln_det(&chol);
                PreparedDensity::Gaussian {
                    mean: mean.clone(),
                    chol_l: chol.unpack(),
                    half_ln_det,
                }
            }
            _ => {
                return Err(Error::ParameterDomain(format!(
                    "parameters do not belong to the {} family",
                    family.name()
                )))
            }
        })
    }

    /// ln p(x | θ) without ln h(x); callers add the base measure once.
    pub(crate) fn ln_density_without_base(&self, x: &[f64]) -> f64 {
        match self {
            PreparedDensity::Binomial { trials, ln_p, ln_q } => x[0] * ln_p + (trials - x[0]) * ln_q,
            PreparedDensity::Multinomial { ln_probs, .. } => ln_probs
                .iter()
                .zip(x)
                .map(|(lp, c)| if *c == 0.0 { 0.0 } else { c * lp })
                .sum(),
            PreparedDensity::Poisson { rate, ln_rate } => x[0] * ln_rate - rate,
            PreparedDensity::Gaussian { mean, chol_l, half_ln_det } => {
                // Λ = L Lᵀ, so (x − μ)ᵀΛ(x − μ) = ‖Lᵀ(x − μ)‖².
                let d = mean.len();
                let mut q = 0.0;
                for j in 0..d {
                    let mut s = 0.0;
                    for i in j..d {
                        s += chol_l[(i, j)] * (x[i] - mean[i]);
                    }
                    q += s * s;
                }
                half_ln_det - 0.5 * q
            }
        }
    }
}
