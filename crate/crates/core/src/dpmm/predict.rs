use rand::Rng;
use rayon::prelude::*;

use super::FittedModel;
use crate::data::DatasetView;
use crate::error::{Error, Result};
use crate::expfam::{check_support, ln_base_measure, PreparedDensity};
use crate::linalg;
use crate::special::{ln_gamma, log_sum_exp, LN_PI};

/// Monte-Carlo log predictive density with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McScore {
    pub log_density: f64,
    /// Delta-method standard error of `log_density`, estimated from the
    /// spread of the per-draw mixture densities. NaN for a single draw.
    pub std_error: f64,
}

/// `m` posterior draws per component, each a product over blocks.
struct Draws {
    /// `[k][r][b]`
    densities: Vec<Vec<Vec<PreparedDensity>>>,
    ln_weights: Vec<f64>,
    m: usize,
}

impl Draws {
    fn sample<R: Rng + ?Sized>(model: &FittedModel, m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("at least one posterior draw is needed".into()));
        }
        let mut densities = Vec::with_capacity(model.tau.len());
        for blocks in &model.tau {
            let mut per_k = Vec::with_capacity(m);
            for _ in 0..m {
                let mut draw = Vec::with_capacity(blocks.len());
                for post in blocks {
                    let params = post.sample(rng)?;
                    draw.push(PreparedDensity::new(post.family, &params)?);
                }
                per_k.push(draw);
            }
            densities.push(per_k);
        }
        Ok(Self {
            densities,
            ln_weights: model.mixing.iter().map(|p| p.ln()).collect(),
            m,
        })
    }

    fn score(&self, model: &FittedModel, x: &[f64]) -> Result<McScore> {
        let ln_h = base_measure(model, x)?;
        // ln of the mixture density under draw r, for each r.
        let mut per_draw = Vec::with_capacity(self.m);
        let mut terms = vec![0.0; self.densities.len()];
        for r in 0..self.m {
            for (k, t) in terms.iter_mut().enumerate() {
                let mut ll = ln_h;
                for (b, d) in model.layout.blocks.iter().zip(&self.densities[k][r]) {
                    ll += d.ln_density_without_base(&x[b.range()]);
                }
                *t = self.ln_weights[k] + ll;
            }
            per_draw.push(log_sum_exp(&terms));
        }
        let log_density = log_sum_exp(&per_draw) - (self.m as f64).ln();
        if !log_density.is_finite() {
            return Err(Error::Numerical(format!("predictive density is {log_density}")));
        }
        let std_error = if self.m < 2 {
            f64::NAN
        } else {
            let c = per_draw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = per_draw.iter().map(|v| (v - c).exp()).collect();
            let mean = w.iter().sum::<f64>() / self.m as f64;
            let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (self.m - 1) as f64;
            (var / self.m as f64).sqrt() / mean
        };
        Ok(McScore {
            log_density,
            std_error,
        })
    }
}

fn base_measure(model: &FittedModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.layout.width() {
        return Err(Error::Shape {
            expected: model.layout.width(),
            got: x.len(),
        });
    }
    let mut ln_h = 0.0;
    for b in &model.layout.blocks {
        let xb = &x[b.range()];
        check_support(b.family, xb)?;
        ln_h += ln_base_measure(b.family, xb);
    }
    Ok(ln_h)
}

/// Monte-Carlo estimate of `ln p(x* | X)` with `mc_samples` draws per
/// component.
pub fn score_mc<R: Rng + ?Sized>(model: &FittedModel, x: &[f64], rng: &mut R) -> Result<f64> {
    Ok(score_mc_with_error(model, x, model.config.settings.mc_samples, rng)?.log_density)
}

/// Like [`score_mc`] with an explicit draw count and the standard error.
pub fn score_mc_with_error<R: Rng + ?Sized>(model: &FittedModel, x: &[f64], m: usize, rng: &mut R) -> Result<McScore> {
    Draws::sample(model, m, rng)?.score(model, x)
}

/// Scores every row of `view` against one shared set of `m` draws per
/// component. Row order is preserved.
pub fn score_mc_batch<R: Rng + ?Sized>(model: &FittedModel, view: &DatasetView, m: usize, rng: &mut R) -> Result<Vec<McScore>> {
    check_layout(model, view)?;
    let draws = Draws::sample(model, m, rng)?;
    (0..view.len())
        .into_par_iter()
        .map(|i| draws.score(model, view.row(i)))
        .collect()
}

fn check_layout(model: &FittedModel, view: &DatasetView) -> Result<()> {
    if view.layout() != &model.layout {
        return Err(Error::UnsupportedSchema(
            "data layout does not match the model's feature blocks".into(),
        ));
    }
    Ok(())
}

/// Student-t component of the exact Gaussian predictive.
struct StudentT {
    mean: nalgebra::DVector<f64>,
    precision: nalgebra::DMatrix<f64>,
    dof: f64,
    log_norm: f64,
}

impl StudentT {
    fn ln_pdf(&self, x: &[f64]) -> f64 {
        let d = self.mean.len() as f64;
        let diff = nalgebra::DVector::from_fn(self.mean.len(), |i, _| x[i] - self.mean[i]);
        let q = linalg::quad_form(&self.precision, &diff);
        self.log_norm - 0.5 * (self.dof + d) * (q / self.dof).ln_1p()
    }
}

fn student_components(model: &FittedModel) -> Result<Vec<StudentT>> {
    let dim = match model.layout.blocks.as_slice() {
        [b] => match b.family {
            crate::expfam::Family::Gaussian { dim } => dim,
            _ => 0,
        },
        _ => 0,
    };
    if dim == 0 {
        return Err(Error::UnsupportedSchema(
            "exact scoring needs a model whose only block is Gaussian".into(),
        ));
    }
    let d = dim as f64;
    model
        .tau
        .iter()
        .map(|blocks| {
            let nw = blocks[0].normal_wishart_params()?;
            let dof = nw.dof + 1.0 - d;
            let precision = &nw.scale * (dof * nw.kappa / (1.0 + nw.kappa));
            let ln_det = linalg::ln_det(&linalg::cholesky(&precision)?);
            let log_norm = ln_gamma(0.5 * (dof + d)) - ln_gamma(0.5 * dof) - 0.5 * d * (dof.ln() + LN_PI) + 0.5 * ln_det;
            Ok(StudentT {
                mean: nw.mean,
                precision,
                dof,
                log_norm,
            })
        })
        .collect()
}

fn mixture_ln_pdf(model: &FittedModel, comps: &[StudentT], x: &[f64]) -> Result<f64> {
    if x.len() != model.layout.width() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("point does not match the model's Gaussian block".into()));
    }
    let terms: Vec<f64> = comps
        .iter()
        .zip(&model.mixing)
        .map(|(c, p)| p.ln() + c.ln_pdf(x))
        .collect();
    Ok(log_sum_exp(&terms))
}

/// Exact `ln p(x* | X)` as a mixture of multivariate Student-t densities.
/// Only defined when the model is a single Gaussian block.
pub fn score_exact_gaussian(model: &FittedModel, x: &[f64]) -> Result<f64> {
    let comps = student_components(model)?;
    mixture_ln_pdf(model, &comps, x)
}

pub fn score_exact_gaussian_batch(model: &FittedModel, view: &DatasetView) -> Result<Vec<f64>> {
    check_layout(model, view)?;
    let comps = student_components(model)?;
    (0..view.len())
        .into_par_iter()
        .map(|i| mixture_ln_pdf(model, &comps, view.row(i)))
        .collect()
}
