//! Synthetic benchmark data: two multivariate Student-t clusters centred at
//! the all-zeros and all-fives vectors, plus uniform outliers in a box around
//! the nominal data.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::DatasetView;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Total rows, outliers included.
    pub n_samples: usize,
    pub n_features: usize,
    /// Share of rows that are outliers, in [0, 1).
    pub outlier_fraction: f64,
    /// Outlier box half-width per axis, in nominal standard deviations.
    pub outlier_half_width: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            n_features: 2,
            outlier_fraction: 0.05,
            outlier_half_width: 7.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_features < 1 {
            return Err(Error::Config("n_features must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::Config(format!(
                "outlier_fraction {} is outside [0, 1)",
                self.outlier_fraction
            )));
        }
        if !(self.outlier_half_width > 0.0) {
            return Err(Error::Config("outlier_half_width must be positive".into()));
        }
        if self.n_samples < 1 || self.n_samples - self.outlier_count() < 1 {
            return Err(Error::Config("need at least one nominal row".into()));
        }
        Ok(())
    }

    /// ⌈outlier_fraction · n⌉
    pub fn outlier_count(&self) -> usize {
        (self.outlier_fraction * self.n_samples as f64).ceil() as usize
    }
}

/// Kac–Murdock–Szegő matrix `c_ij = ρ^|i−j|`.
pub fn gen_covariance(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// Parameters drawn for one nominal cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams {
    pub center: f64,
    pub rho: f64,
    pub dof: f64,
}

/// Generated rows with labels (1 = outlier) and the box the outliers were
/// drawn from.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub view: DatasetView,
    pub labels: Vec<u8>,
    pub clusters: Vec<ClusterParams>,
    pub outlier_low: Vec<f64>,
    pub outlier_high: Vec<f64>,
}

fn student_t_rows<R: Rng + ?Sized>(n: usize, params: &ClusterParams, d: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let cov = gen_covariance(d, params.rho);
    let l = linalg::cholesky(&cov)?.unpack();
    let chi = ChiSquared::new(params.dof).map_err(|e| Error::Sampling(format!("chi-squared({}): {e}", params.dof)))?;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        // Guard the scale against a chi-squared draw that underflows to zero.
        let u = chi.sample(rng).max(f64::MIN_POSITIVE);
        let scale = (params.dof / u).sqrt();
        let x = &l * z * scale;
        rows.push(x.iter().map(|v| v + params.center).collect());
    }
    Ok(rows)
}

/// Draws a labelled dataset. Rows are shuffled; the first cluster receives
/// the extra row when the nominal count is odd.
pub fn gen_dataset<R: Rng + ?Sized>(config: &SynthConfig, rng: &mut R) -> Result<SynthData> {
    config.validate()?;
    let d = config.n_features;
    let n_out = config.outlier_count();
    let n_nom = config.n_samples - n_out;
    let sizes = [n_nom - n_nom / 2, n_nom / 2];
    let rho_dist = Uniform::new(0.0, 1.0).expect("valid range");
    let dof_dist = Gamma::new(1.0, 5.0).expect("valid gamma");

    let mut rows = Vec::with_capacity(config.n_samples);
    let mut labels = Vec::with_capacity(config.n_samples);
    let mut clusters = Vec::new();
    for (center, size) in [0.0, 5.0].into_iter().zip(sizes) {
        let params = ClusterParams {
            center,
            rho: rho_dist.sample(rng),
            dof: dof_dist.sample(rng),
        };
        rows.extend(student_t_rows(size, &params, d, rng)?);
        labels.extend(std::iter::repeat_n(0u8, size));
        clusters.push(params);
    }

    let mut low = vec![0.0; d];
    let mut high = vec![0.0; d];
    for j in 0..d {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n_nom as f64;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n_nom as f64;
        let half = config.outlier_half_width * var.sqrt();
        low[j] = mean - half;
        high[j] = mean + half;
    }
    for _ in 0..n_out {
        let row: Vec<f64> = (0..d)
            .map(|j| if high[j] > low[j] { rng.random_range(low[j]..high[j]) } else { low[j] })
            .collect();
        rows.push(row);
        labels.push(1);
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(rng);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let labels: Vec<u8> = order.iter().map(|&i| labels[i]).collect();
    let view = DatasetView::from_real_rows(&rows, Some(labels.clone()))?;
    Ok(SynthData {
        view,
        labels,
        clusters,
        outlier_low: low,
        outlier_high: high,
    })
}
