//! Truncated stick-breaking Dirichlet process mixture fitted by coordinate
//! ascent variational inference.
//!
//! The variational family is
//!
//! ```text
//! q = Π_n q(z_n | r_n) · Π_{k<K} Beta(v_k | α_k, β_k) · Π_k q(η_k | τ_k) · Gamma(w | g₁, g₂)
//! ```
//!
//! with `v_K = 1`, so mixing weights beyond the truncation level are zero.

mod io;
mod predict;
mod stats;
mod updates;

pub use io::{load_model, save_model, ModelDocument, MODEL_VERSION};
pub use predict::{score_exact_gaussian, score_exact_gaussian_batch, score_mc, score_mc_batch, score_mc_with_error, McScore};
pub use stats::SuffStats;
pub use updates::{
    compute_elbo, init_state, stick_expectations, update_components, update_concentration,
    update_responsibilities, update_sticks, ElboTerms,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{DatasetView, Layout};
use crate::error::{Error, Result};
use crate::expfam::{ConjugatePosterior, Family};
use crate::rng::{stream_rng, Stream};

/// Scalar settings of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Truncation level K.
    pub truncation: usize,
    /// Shape of the Gamma prior on the concentration.
    pub s0: f64,
    /// Rate of the Gamma prior on the concentration.
    pub r0: f64,
    /// Relative ELBO improvement below which the fit stops.
    pub elbo_tol: f64,
    pub max_iters: usize,
    /// Posterior draws per component for Monte-Carlo scoring.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            truncation: 10,
            s0: 1.0,
            r0: 1e-3,
            elbo_tol: 1e-6,
            max_iters: 500,
            mc_samples: 100,
            seed: 0,
        }
    }
}

/// Hyperparameters: the settings plus one conjugate prior per feature block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    #[serde(flatten)]
    pub settings: FitSettings,
    pub priors: Vec<ConjugatePosterior>,
}

impl PriorConfig {
    /// Data-driven default priors for each block of `view`:
    ///
    /// - Gaussian: Normal-Wishart with `μ₀` the column means, `ν = d + 2`
    ///   and `V = diag(1/var)/ν`, so `E[Λ]` is the inverse column variance.
    /// - Multinomial: Dirichlet(1, …, 1).
    /// - Binomial: Beta(1, 1).
    /// - Poisson: Gamma with shape 1 and mean equal to the column mean.
    pub fn for_data(view: &DatasetView, settings: FitSettings) -> Result<Self> {
        if view.is_empty() {
            return Err(Error::Input("cannot derive priors from an empty dataset".into()));
        }
        let n = view.len() as f64;
        let mut priors = Vec::new();
        for b in &view.layout().blocks {
            let prior = match b.family {
                Family::Gaussian { dim } => {
                    let mut mean = DVector::zeros(dim);
                    for row in view.rows() {
                        for j in 0..dim {
                            mean[j] += row[b.start + j];
                        }
                    }
                    mean /= n;
                    let mut var = DVector::zeros(dim);
                    for row in view.rows() {
                        for j in 0..dim {
                            var[j] += (row[b.start + j] - mean[j]).powi(2);
                        }
                    }
                    var /= n;
                    let dof = dim as f64 + 2.0;
                    let scale = DMatrix::from_diagonal(&var.map(|v| {
                        let v = if v > 0.0 { v } else { 1.0 };
                        1.0 / (v * dof)
                    }));
                    ConjugatePosterior::normal_wishart(&mean, &scale, dof)?
                }
                Family::Multinomial { trials, categories } => {
                    ConjugatePosterior::dirichlet(&vec![1.0; categories], trials)?
                }
                Family::Binomial { trials } => ConjugatePosterior::beta(1.0, 1.0, trials)?,
                Family::Poisson => {
                    let mean = view.rows().map(|r| r[b.start]).sum::<f64>() / n;
                    ConjugatePosterior::gamma(1.0, if mean > 0.0 { 1.0 / mean } else { 1.0 })?
                }
            };
            priors.push(prior);
        }
        Ok(Self { settings, priors })
    }

    pub fn truncation(&self) -> usize {
        self.settings.truncation
    }

    /// Checks the settings and that the priors match `layout` block by block.
    pub fn validate(&self, layout: &Layout) -> Result<()> {
        let s = &self.settings;
        if s.truncation < 1 {
            return Err(Error::Config("truncation level K must be at least 1".into()));
        }
        if !(s.s0 > 0.0) || !(s.r0 > 0.0) {
            return Err(Error::Config(format!(
                "concentration prior needs s0 > 0 and r0 > 0, got s0 = {}, r0 = {}",
                s.s0, s.r0
            )));
        }
        if s.mc_samples < 1 {
            return Err(Error::Config("mc_samples must be at least 1".into()));
        }
        if !(s.elbo_tol >= 0.0) || s.max_iters < 1 {
            return Err(Error::Config("elbo_tol must be ≥ 0 and max_iters ≥ 1".into()));
        }
        if self.priors.len() != layout.blocks.len() {
            return Err(Error::Config(format!(
                "{} priors for {} feature blocks",
                self.priors.len(),
                layout.blocks.len()
            )));
        }
        for (p, b) in self.priors.iter().zip(&layout.blocks) {
            if p.family != b.family {
                return Err(Error::Config(format!(
                    "prior family {:?} does not match block family {:?}",
                    p.family, b.family
                )));
            }
            p.validate().map_err(|e| Error::Config(format!("invalid prior: {e}")))?;
        }
        Ok(())
    }
}

/// All variational quantities of a fit in progress.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    pub n: usize,
    pub k: usize,
    /// N × K responsibilities, row-major.
    pub r: Vec<f64>,
    /// Stick posteriors Beta(α_k, β_k), k < K.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// `tau[k][b]`: posterior of block `b` in component `k`.
    pub tau: Vec<Vec<ConjugatePosterior>>,
    pub g1: f64,
    pub g2: f64,
    pub elbo_trace: Vec<f64>,
}

impl MixtureState {
    pub fn responsibilities(&self, n: usize) -> &[f64] {
        &self.r[n * self.k..(n + 1) * self.k]
    }

    /// Soft counts N_k = Σ_n r_nk.
    pub fn counts(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.k];
        for row in self.r.chunks(self.k) {
            for (c, v) in counts.iter_mut().zip(row) {
                *c += v;
            }
        }
        counts
    }

    /// E[w] = g₁ / g₂.
    pub fn expected_concentration(&self) -> f64 {
        self.g1 / self.g2
    }
}

/// Immutable result of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub config: PriorConfig,
    pub layout: Layout,
    pub tau: Vec<Vec<ConjugatePosterior>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub g1: f64,
    pub g2: f64,
    /// E[π_k], summing to one.
    pub mixing: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl FittedModel {
    fn from_state(state: &MixtureState, config: &PriorConfig, layout: &Layout, converged: bool) -> Self {
        Self {
            config: config.clone(),
            layout: layout.clone(),
            tau: state.tau.clone(),
            alpha: state.alpha.clone(),
            beta: state.beta.clone(),
            g1: state.g1,
            g2: state.g2,
            mixing: stick_means_to_proportions(&state.alpha, &state.beta),
            iterations: state.elbo_trace.len(),
            converged,
        }
    }

    pub fn truncation(&self) -> usize {
        self.tau.len()
    }

    /// Components whose expected weight exceeds `threshold`.
    pub fn active_components(&self, threshold: f64) -> Vec<usize> {
        (0..self.mixing.len()).filter(|&k| self.mixing[k] > threshold).collect()
    }
}

/// `E[π_k]` from the stick means, with the residual stick on component K.
pub fn expected_mixing_proportions(model: &FittedModel) -> Vec<f64> {
    stick_means_to_proportions(&model.alpha, &model.beta)
}

/// Stick-breaking arithmetic on stick means `E[v_k] = α_k / (α_k + β_k)`.
pub fn stick_means_to_proportions(alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = alpha.iter().zip(beta).map(|(a, b)| a / (a + b)).collect();
    stick_breaking(&v)
}

/// π_k = v_k Π_{i<k}(1 − v_i) for k < K and the remainder for k = K.
pub fn stick_breaking(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() + 1);
    let mut rest = 1.0;
    for vk in v {
        out.push(vk * rest);
        rest *= 1.0 - vk;
    }
    // The remainder is taken so the vector sums to one up to rounding of
    // the additions.
    let used: f64 = out.iter().sum();
    out.push((1.0 - used).max(0.0));
    out
}

/// Slack below which an ELBO decrease is attributed to rounding.
pub const ELBO_SLACK: f64 = 1e-8;

/// Runs coordinate ascent to convergence and returns the final state along
/// with whether the tolerance was met within `max_iters`.
pub fn fit_state(view: &DatasetView, config: &PriorConfig) -> Result<(MixtureState, bool)> {
    config.validate(view.layout())?;
    let stats = SuffStats::new(view)?;
    let mut rng = stream_rng(config.settings.seed, Stream::Init);
    let mut state = init_state(view, config, &mut rng)?;

    // Bring the global factors in line with the random responsibilities
    // before the first E-step.
    update_components(&mut state, &stats, config)?;
    update_concentration(&mut state, config)?;
    update_sticks(&mut state)?;

    let mut converged = false;
    for iteration in 1..=config.settings.max_iters {
        update_responsibilities(&mut state, &stats)?;
        update_sticks(&mut state)?;
        update_components(&mut state, &stats, config)?;
        update_concentration(&mut state, config)?;
        let elbo = compute_elbo(&state, &stats, config)?.total();
        if let Some(&previous) = state.elbo_trace.last() {
            if elbo < previous - ELBO_SLACK * previous.abs() {
                return Err(Error::ElboDecrease {
                    iteration,
                    previous,
                    current: elbo,
                });
            }
            state.elbo_trace.push(elbo);
            if elbo - previous < config.settings.elbo_tol * elbo.abs() {
                converged = true;
                break;
            }
        } else {
            state.elbo_trace.push(elbo);
        }
        log::debug!("iteration {iteration}: elbo {elbo}");
    }
    if !converged {
        log::warn!(
            "stopped after {} iterations without meeting the ELBO tolerance",
            config.settings.max_iters
        );
    }
    Ok((state, converged))
}

/// Fits the mixture and returns the model and its per-iteration ELBO.
pub fn fit(view: &DatasetView, config: &PriorConfig) -> Result<(FittedModel, Vec<f64>)> {
    let (state, converged) = fit_state(view, config)?;
    let model = FittedModel::from_state(&state, config, view.layout(), converged);
    Ok((model, state.elbo_trace))
}
