//! Schema-typed ingestion and the encoding that turns raw columns into
//! likelihood blocks.

mod encode;
mod mapping;
mod schema;
mod table;

pub use encode::{encode, ColumnTransform, Preprocessing, OTHER_LEVEL};
pub use mapping::{map_domain, unmap_domain, DomainMap, CLAMP};
pub use schema::{Column, ColumnKind, FeatureSchema};
pub use table::{load_csv, read_csv, Cell, RawTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::{check_support, Family};

/// A contiguous run of encoded columns handled by one likelihood.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    #[serde(flatten)]
    pub family: Family,
    pub start: usize,
    /// Names of the encoded columns, for reporting.
    pub columns: Vec<String>,
}

impl Block {
    pub fn width(&self) -> usize {
        self.family.input_dim()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.width()
    }
}

/// Ordered likelihood blocks covering every encoded column exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub blocks: Vec<Block>,
}

impl Layout {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        let mut next = 0;
        for b in &blocks {
            if b.start != next || b.width() == 0 {
                return Err(Error::Input("blocks must tile the encoded columns in order".into()));
            }
            next += b.width();
        }
        if blocks.is_empty() {
            return Err(Error::Input("layout has no blocks".into()));
        }
        Ok(Self { blocks })
    }

    /// A single joint Gaussian block of dimension `dim`.
    pub fn gaussian(dim: usize) -> Self {
        Self {
            blocks: vec![Block {
                family: Family::Gaussian { dim },
                start: 0,
                columns: (0..dim).map(|i| format!("x{i}")).collect(),
            }],
        }
    }

    /// Number of encoded columns.
    pub fn width(&self) -> usize {
        self.blocks.iter().map(Block::width).sum()
    }

    pub fn families(&self) -> Vec<Family> {
        self.blocks.iter().map(|b| b.family).collect()
    }

    pub fn is_all_gaussian(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| matches!(b.family, Family::Gaussian { .. }))
    }
}

/// Encoded samples: an N × D row-major matrix split into likelihood blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetView {
    layout: Layout,
    values: Vec<f64>,
    n: usize,
    pub labels: Option<Vec<u8>>,
}

impl DatasetView {
    /// Checks that every row lies in the support of each block's family.
    pub fn new(layout: Layout, values: Vec<f64>, labels: Option<Vec<u8>>) -> Result<Self> {
        let width = layout.width();
        if values.len() % width != 0 {
            return Err(Error::Shape {
                expected: width,
                got: values.len() % width,
            });
        }
        let n = values.len() / width;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Shape { expected: n, got: l.len() });
            }
        }
        for (i, row) in values.chunks(width).enumerate() {
            for b in &layout.blocks {
                check_support(b.family, &row[b.range()])
                    .map_err(|e| Error::Input(format!("row {}: {e}", i + 1)))?;
            }
        }
        Ok(Self {
            layout,
            values,
            n,
            labels,
        })
    }

    /// All-Gaussian view over plain real rows.
    pub fn from_real_rows(rows: &[Vec<f64>], labels: Option<Vec<u8>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::Input("no rows or zero-width rows".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::Shape { expected: dim, got: r.len() });
            }
            values.extend_from_slice(r);
        }
        Self::new(Layout::gaussian(dim), values, labels)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn width(&self) -> usize {
        self.layout.width()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.width())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.width());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            layout: self.layout.clone(),
            values,
            n: indices.len(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }
}
