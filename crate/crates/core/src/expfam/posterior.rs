use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_len, ClassicalParams, Family};
use crate::error::{Error, Result};
use crate::linalg;
use crate::special::{digamma, ln_beta, ln_gamma, ln_mv_gamma};

/// Conjugate prior or posterior over a likelihood's natural parameters,
/// stored in its own natural parameterization `(τ₁, τ₂)`:
///
/// ```text
/// p(η | τ) = h(η) · exp(τ₁ᵀη + τ₂·(−a(η)) − a_p(τ))
/// ```
///
/// `τ₁` has the shape of the likelihood's sufficient statistics and `τ₂` is
/// the scalar pseudo-count paired with `−a(η)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugatePosterior {
    pub family: Family,
    pub tau1: Vec<f64>,
    pub tau2: f64,
}

/// `E_q[η]` and `E_q[−a(η)]` under a posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorExpectations {
    pub eta: Vec<f64>,
    pub neg_log_partition: f64,
}

/// Normal-Wishart parameters `(μ₀, κ, V, ν)` recovered from `(τ₁, τ₂)`.
/// Here `Λ ~ W(V, ν)` and `μ | Λ ~ N(μ₀, (κΛ)⁻¹)`, with `κ = ν − d`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalWishart {
    pub mean: DVector<f64>,
    pub kappa: f64,
    pub scale: DMatrix<f64>,
    pub dof: f64,
}

impl ConjugatePosterior {
    /// Beta(α, β) prior for a Binomial(n) likelihood.
    pub fn beta(alpha: f64, beta: f64, trials: u32) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || trials == 0 {
            return Err(Error::ParameterDomain(format!(
                "beta({alpha}, {beta}) with {trials} trials"
            )));
        }
        Ok(Self {
            family: Family::Binomial { trials },
            tau1: vec![alpha - 1.0],
            tau2: (alpha + beta - 2.0) / trials as f64,
        })
    }

    /// Dirichlet(α) prior for a Multinomial likelihood with `trials` trials.
    pub fn dirichlet(alphas: &[f64], trials: u32) -> Result<Self> {
        if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::ParameterDomain("dirichlet concentrations must be positive".into()));
        }
        Ok(Self {
            family: Family::Multinomial {
                trials,
                categories: alphas.len(),
            },
            tau1: alphas.iter().map(|a| a - 1.0).collect(),
            tau2: 0.0,
        })
    }

    /// Gamma(shape, rate) prior for a Poisson likelihood.
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) {
            return Err(Error::ParameterDomain(format!("gamma({shape}, {rate})")));
        }
        Ok(Self {
            family: Family::Poisson,
            tau1: vec![shape - 1.0],
            tau2: rate,
        })
    }

    /// Normal-Wishart prior with mean `μ₀`, Wishart scale `V` and `ν`
    /// degrees of freedom. The mean precision factor is tied to `κ = ν − d`,
    /// so `ν` must exceed `d`.
    pub fn normal_wishart(mean: &DVector<f64>, scale: &DMatrix<f64>, dof: f64) -> Result<Self> {
        let d = mean.len();
        check_len(d, scale.nrows())?;
        if !(dof > d as f64) {
            return Err(Error::ParameterDomain(format!(
                "normal-wishart needs ν > d, got ν = {dof}, d = {d}"
            )));
        }
        if !linalg::is_spd(scale) {
            return Err(Error::ParameterDomain("wishart scale is not positive definite".into()));
        }
        let kappa = dof - d as f64;
        let scale_inv = linalg::spd_inverse(scale)?;
        let mut t12 = mean * mean.transpose() * kappa + scale_inv;
        linalg::symmetrize(&mut t12);
        let mut tau1: Vec<f64> = (mean * kappa).iter().copied().collect();
        tau1.extend(linalg::flatten(&t12));
        Ok(Self {
            family: Family::Gaussian { dim: d },
            tau1,
            tau2: kappa,
        })
    }

    /// Beta parameters `(α, β) = (τ₁ + 1, nτ₂ − τ₁ + 1)`.
    pub fn beta_params(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::Binomial { trials } => Some((
                self.tau1[0] + 1.0,
                trials as f64 * self.tau2 - self.tau1[0] + 1.0,
            )),
            _ => None,
        }
    }

    /// Dirichlet concentrations `τ₁ + 1`.
    pub fn dirichlet_params(&self) -> Option<Vec<f64>> {
        match self.family {
            Family::Multinomial { .. } => Some(self.tau1.iter().map(|t| t + 1.0).collect()),
            _ => None,
        }
    }

    /// Gamma `(shape, rate) = (τ₁ + 1, τ₂)`.
    pub fn gamma_params(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::Poisson => Some((self.tau1[0] + 1.0, self.tau2)),
            _ => None,
        }
    }

    /// Normal-Wishart inverse mapping. Requires `τ₂ > 0` and a positive
    /// definite `τ₁₂ − τ₁₁τ₁₁ᵀ/τ₂`.
    pub fn normal_wishart_params(&self) -> Result<NormalWishart> {
        let d = match self.family {
            Family::Gaussian { dim } => dim,
            _ => return Err(Error::ParameterDomain("not a normal-wishart posterior".into())),
        };
        if !(self.tau2 > 0.0) {
            return Err(Error::ParameterDomain(format!("normal-wishart τ₂ = {}", self.tau2)));
        }
        let t11 = DVector::from_column_slice(&self.tau1[..d]);
        let mut scale_inv = linalg::unflatten(&self.tau1[d..], d) - &t11 * t11.transpose() / self.tau2;
        linalg::symmetrize(&mut scale_inv);
        let scale = linalg::spd_inverse(&scale_inv)?;
        Ok(NormalWishart {
            mean: t11 / self.tau2,
            kappa: self.tau2,
            scale,
            dof: self.tau2 + d as f64,
        })
    }

    /// Checks that the posterior is a proper distribution.
    pub fn validate(&self) -> Result<()> {
        check_len(self.family.stat_dim(), self.tau1.len())?;
        let ok = match self.family {
            Family::Binomial { .. } => {
                let (a, b) = self.beta_params().unwrap();
                a > 0.0 && b > 0.0
            }
            Family::Multinomial { .. } => self.tau1.iter().all(|t| t + 1.0 > 0.0),
            Family::Poisson => self.tau1[0] + 1.0 > 0.0 && self.tau2 > 0.0,
            Family::Gaussian { dim } => {
                let nw = self.normal_wishart_params()?;
                nw.dof > dim as f64 - 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ParameterDomain(format!(
                "improper {} posterior",
                self.family.name()
            )))
        }
    }

    /// Conjugate update `τ₁ = λ₁ + Σ T(x)`, `τ₂ = λ₂ + weight`.
    ///
    /// `weight` may be fractional, which is how responsibilities enter the
    /// component updates.
    pub fn conjugate_update(&self, stat_sum: &[f64], weight: f64) -> Result<Self> {
        check_len(self.tau1.len(), stat_sum.len())?;
        if !(weight >= 0.0) {
            return Err(Error::ParameterDomain(format!("update weight {weight} is negative")));
        }
        let mut tau1: Vec<f64> = self.tau1.iter().zip(stat_sum).map(|(l, s)| l + s).collect();
        if let Family::Gaussian { dim } = self.family {
            let block = &mut tau1[dim..];
            for i in 0..dim {
                for j in (i + 1)..dim {
                    let v = 0.5 * (block[i * dim + j] + block[j * dim + i]);
                    block[i * dim + j] = v;
                    block[j * dim + i] = v;
                }
            }
        }
        Ok(Self {
            family: self.family,
            tau1,
            tau2: self.tau2 + weight,
        })
    }

    /// Log-partition `a_p(τ)` of the posterior.
    pub fn log_partition(&self) -> Result<f64> {
        match self.family {
            Family::Binomial { .. } => {
                let (a, b) = self.beta_params().unwrap();
                Ok(ln_beta(a, b))
            }
            Family::Multinomial { .. } => {
                let alphas = self.dirichlet_params().unwrap();
                let total: f64 = alphas.iter().sum();
                Ok(alphas.iter().map(|a| ln_gamma(*a)).sum::<f64>() - ln_gamma(total))
            }
            Family::Poisson => {
                let (shape, rate) = self.gamma_params().unwrap();
                Ok(ln_gamma(shape) - shape * rate.ln())
            }
            Family::Gaussian { dim } => {
                let nw = self.normal_wishart_params()?;
                let d = dim as f64;
                let ln_det_v = linalg::ln_det(&linalg::cholesky(&nw.scale)?);
                Ok(-0.5 * d * nw.kappa.ln()
                    + 0.5 * nw.dof * d * std::f64::consts::LN_2
                    + 0.5 * nw.dof * ln_det_v
                    + ln_mv_gamma(dim, 0.5 * nw.dof))
            }
        }
    }

    /// Closed-form `E[η]` and `E[−a(η)]`, the gradient of [`Self::log_partition`]
    /// with respect to `τ₁` and `τ₂`.
    pub fn expectations(&self) -> Result<PosteriorExpectations> {
        match self.family {
            Family::Binomial { trials } => {
                let (a, b) = self.beta_params().unwrap();
                // η = ln p − ln(1 − p); β depends on τ₁ too, hence ψ(α) − ψ(β).
                let n = trials as f64;
                Ok(PosteriorExpectations {
                    eta: vec![digamma(a) - digamma(b)],
                    neg_log_partition: n * (digamma(b) - digamma(a + b)),
                })
            }
            Family::Multinomial { .. } => {
                let alphas = self.dirichlet_params().unwrap();
                let psi_total = digamma(alphas.iter().sum());
                Ok(PosteriorExpectations {
                    eta: alphas.iter().map(|a| digamma(*a) - psi_total).collect(),
                    neg_log_partition: 0.0,
                })
            }
            Family::Poisson => {
                let (shape, rate) = self.gamma_params().unwrap();
                Ok(PosteriorExpectations {
                    eta: vec![digamma(shape) - rate.ln()],
                    neg_log_partition: -shape / rate,
                })
            }
            Family::Gaussian { dim } => {
                let nw = self.normal_wishart_params()?;
                let d = dim as f64;
                let chol = linalg::cholesky(&nw.scale)?;
                let ln_det_v = linalg::ln_det(&chol);
                let v_mean = &nw.scale * &nw.mean;
                let e_lambda_mu = &v_mean * nw.dof;
                let mut eta: Vec<f64> = e_lambda_mu.iter().copied().collect();
                eta.extend(linalg::flatten(&nw.scale).iter().map(|v| -0.5 * nw.dof * v));
                let e_ln_det: f64 = (1..=dim)
                    .map(|i| digamma(0.5 * (nw.dof + 1.0 - i as f64)))
                    .sum::<f64>()
                    + d * std::f64::consts::LN_2
                    + ln_det_v;
                // E[μᵀΛμ] = ν μ₀ᵀVμ₀ + d/κ
                let e_quad = nw.dof * nw.mean.dot(&v_mean) + d / nw.kappa;
                Ok(PosteriorExpectations {
                    eta,
                    neg_log_partition: 0.5 * e_ln_det - 0.5 * e_quad,
                })
            }
        }
    }

    /// Draws one set of likelihood parameters from the posterior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ClassicalParams> {
        let bad = |what: String| Error::Sampling(what);
        self.validate().map_err(|e| bad(e.to_string()))?;
        match self.family {
            Family::Binomial { .. } => {
                let (a, b) = self.beta_params().unwrap();
                let dist = Beta::new(a, b).map_err(|e| bad(format!("beta({a}, {b}): {e}")))?;
                let p: f64 = dist.sample(rng);
                Ok(ClassicalParams::Binomial {
                    p: p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0),
                })
            }
            Family::Multinomial { .. } => {
                let alphas = self.dirichlet_params().unwrap();
                let mut draws = Vec::with_capacity(alphas.len());
                for a in &alphas {
                    let g = Gamma::new(*a, 1.0).map_err(|e| bad(format!("dirichlet α = {a}: {e}")))?;
                    draws.push(g.sample(rng).max(f64::MIN_POSITIVE));
                }
                let total: f64 = draws.iter().sum();
                Ok(ClassicalParams::Multinomial {
                    probs: draws.into_iter().map(|g| g / total).collect(),
                })
            }
            Family::Poisson => {
                let (shape, rate) = self.gamma_params().unwrap();
                let g = Gamma::new(shape, 1.0 / rate)
                    .map_err(|e| bad(format!("gamma({shape}, {rate}): {e}")))?;
                Ok(ClassicalParams::Poisson {
                    rate: g.sample(rng).max(f64::MIN_POSITIVE),
                })
            }
            Family::Gaussian { dim } => {
                let nw = self.normal_wishart_params().map_err(|e| bad(e.to_string()))?;
                if !(nw.dof > dim as f64 - 1.0) {
                    return Err(bad(format!("wishart ν = {} with d = {dim}", nw.dof)));
                }
                let precision = sample_wishart(&nw.scale, nw.dof, rng)?;
                // μ = μ₀ + (√κ Lᵀ)⁻¹ z with Λ = L Lᵀ.
                let chol = linalg::cholesky(&precision)?;
                let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let offset = chol
                    .l()
                    .transpose()
                    .solve_upper_triangular(&z)
                    .ok_or_else(|| bad("singular precision draw".into()))?;
                let mean = &nw.mean + offset / nw.kappa.sqrt();
                Ok(ClassicalParams::Gaussian { mean, precision })
            }
        }
    }
}

/// Bartlett-decomposition Wishart draw `L A Aᵀ Lᵀ` with `V = L Lᵀ`.
fn sample_wishart<R: Rng + ?Sized>(scale: &DMatrix<f64>, dof: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let d = scale.nrows();
    let l = linalg::cholesky(scale)?.unpack();
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(dof - i as f64)
            .map_err(|e| Error::Sampling(format!("chi-squared({}): {e}", dof - i as f64)))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    let mut out = &la * la.transpose();
    linalg::symmetrize(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::digamma;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_update_keeps_prior() {
        let prior = ConjugatePosterior::beta(1.0, 1.0, 1).unwrap();
        assert_eq!(prior.tau1, vec![0.0]);
        assert_eq!(prior.tau2, 0.0);
        let post = prior.conjugate_update(&[0.0], 0.0).unwrap();
        assert_eq!(post, prior);
    }

    #[test]
    fn poisson_gamma_update() {
        let prior = ConjugatePosterior::gamma(1.0, 1.0).unwrap();
        assert_eq!((prior.tau1[0], prior.tau2), (0.0, 1.0));
        let post = prior.conjugate_update(&[5.0], 2.0).unwrap();
        assert_eq!(post.gamma_params(), Some((6.0, 3.0)));
    }

    #[test]
    fn beta_bernoulli_update() {
        let prior = ConjugatePosterior::beta(1.0, 1.0, 1).unwrap();
        let post = prior.conjugate_update(&[2.0], 3.0).unwrap();
        assert_eq!(post.beta_params(), Some((3.0, 2.0)));
    }

    #[test]
    fn update_shape_and_weight_errors() {
        let prior = ConjugatePosterior::gamma(1.0, 1.0).unwrap();
        assert!(matches!(prior.conjugate_update(&[1.0, 2.0], 1.0), Err(Error::Shape { .. })));
        assert!(prior.conjugate_update(&[1.0], -1.0).is_err());
    }

    #[test]
    fn closed_form_expectations() {
        let dir = ConjugatePosterior::dirichlet(&[1.0, 1.0], 1).unwrap();
        let e = dir.expectations().unwrap();
        assert_relative_eq!(e.eta[0], -1.0, max_relative = 1e-14);
        assert_relative_eq!(e.eta[1], -1.0, max_relative = 1e-14);
        assert_eq!(e.neg_log_partition, 0.0);

        let gam = ConjugatePosterior::gamma(2.0, 1.0).unwrap();
        let e = gam.expectations().unwrap();
        assert_relative_eq!(e.eta[0], 1.0 - 0.577_215_664_901_532_9, max_relative = 1e-14);
        assert_relative_eq!(e.neg_log_partition, -2.0);

        let beta = ConjugatePosterior::beta(1.0, 1.0, 1).unwrap();
        let e = beta.expectations().unwrap();
        assert!(e.eta[0].abs() < 1e-15);
        assert_relative_eq!(e.neg_log_partition, digamma(1.0) - digamma(2.0), max_relative = 1e-14);
    }

    #[test]
    fn normal_wishart_tie_between_kappa_and_dof() {
        let mean = DVector::from_vec(vec![0.3, -1.0]);
        let scale = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let prior = ConjugatePosterior::normal_wishart(&mean, &scale, 5.0).unwrap();
        let nw = prior.normal_wishart_params().unwrap();
        assert_relative_eq!(nw.kappa, nw.dof - 2.0);
        assert_relative_eq!(nw.mean, mean, max_relative = 1e-12);
        assert_relative_eq!(nw.scale, scale, max_relative = 1e-12);
        let post = prior.conjugate_update(&[1.0, 2.0, 1.0, 2.0, 2.0, 4.0], 1.0).unwrap();
        let nw = post.normal_wishart_params().unwrap();
        assert_relative_eq!(nw.kappa, nw.dof - 2.0);
        assert!(ConjugatePosterior::normal_wishart(&mean, &scale, 2.0).is_err());
    }

    #[test]
    fn degenerate_posterior_cannot_be_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bad = ConjugatePosterior {
            family: Family::Poisson,
            tau1: vec![0.0],
            tau2: 0.0,
        };
        assert!(matches!(bad.sample(&mut rng), Err(Error::Sampling(_))));
    }
}
