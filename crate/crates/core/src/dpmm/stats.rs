use crate::data::DatasetView;
use crate::error::Result;
use crate::expfam::{ln_base_measure, sufficient_stats, Family};

/// Sufficient statistics and base measures of a dataset, computed once per
/// fit.
#[derive(Debug, Clone)]
pub struct SuffStats {
    n: usize,
    /// Σ over blocks of ln h(x_n), per row.
    pub(crate) ln_h: Vec<f64>,
    pub(crate) blocks: Vec<BlockStats>,
}

#[derive(Debug, Clone)]
pub(crate) struct BlockStats {
    pub(crate) family: Family,
    pub(crate) dim: usize,
    /// n × dim row-major `T(x_n)`.
    pub(crate) t: Vec<f64>,
}

impl BlockStats {
    pub(crate) fn row(&self, n: usize) -> &[f64] {
        &self.t[n * self.dim..(n + 1) * self.dim]
    }
}

impl SuffStats {
    pub fn new(view: &DatasetView) -> Result<Self> {
        let n = view.len();
        let mut ln_h = vec![0.0; n];
        let mut blocks = Vec::with_capacity(view.layout().blocks.len());
        for b in &view.layout().blocks {
            let dim = b.family.stat_dim();
            let mut t = Vec::with_capacity(n * dim);
            for (i, row) in view.rows().enumerate() {
                let x = &row[b.range()];
                t.extend(sufficient_stats(b.family, x)?);
                ln_h[i] += ln_base_measure(b.family, x);
            }
            blocks.push(BlockStats {
                family: b.family,
                dim,
                t,
            });
        }
        Ok(Self { n, ln_h, blocks })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn families(&self) -> Vec<Family> {
        self.blocks.iter().map(|b| b.family).collect()
    }
}
