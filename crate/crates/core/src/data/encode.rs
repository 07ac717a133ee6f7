use serde::{Deserialize, Serialize};

use super::mapping::{map_domain, unmap_domain, DomainMap};
use super::schema::{ColumnKind, FeatureSchema};
use super::table::{Cell, RawTable};
use super::{Block, DatasetView, Layout};
use crate::error::{Error, Result};
use crate::expfam::Family;

/// Name of the trailing one-hot bucket that receives levels unseen in training.
pub const OTHER_LEVEL: &str = "<other>";

/// How one raw column becomes encoded values, with its training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transform", rename_all = "kebab-case")]
pub enum ColumnTransform {
    Standardize { mean: f64, std: f64 },
    Mapped { map: DomainMap },
    Count,
    Binary,
    OneHot { levels: Vec<String> },
}

/// Encoding fitted on a training table: the schema with resolved levels, the
/// per-column transforms and the resulting block layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub schema: FeatureSchema,
    pub transforms: Vec<ColumnTransform>,
    pub layout: Layout,
    /// Encoded position of each schema column.
    offsets: Vec<usize>,
}

/// Encodes `raw`, fitting the preprocessing on it unless training statistics
/// are supplied.
pub fn encode(
    raw: &RawTable,
    schema: &FeatureSchema,
    train: Option<&Preprocessing>,
) -> Result<(DatasetView, Preprocessing)> {
    let prep = match train {
        Some(p) => p.clone(),
        None => Preprocessing::fit(raw, schema)?,
    };
    let view = prep.encode(raw)?;
    Ok((view, prep))
}

fn column_values(raw: &RawTable, j: usize) -> Vec<f64> {
    raw.rows
        .iter()
        .map(|r| r[j].as_number().expect("numeric column holds numbers"))
        .collect()
}

impl Preprocessing {
    pub fn fit(raw: &RawTable, schema: &FeatureSchema) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Input("training table is empty".into()));
        }
        let mut resolved = schema.clone();
        let mut transforms = Vec::with_capacity(schema.columns.len());
        for (j, col) in schema.columns.iter().enumerate() {
            let t = match &col.kind {
                ColumnKind::Real => {
                    let v = column_values(raw, j);
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                    let mut std = var.sqrt();
                    if !(std > 0.0) {
                        log::warn!("column '{}' has zero variance; leaving it unscaled", col.name);
                        std = 1.0;
                    }
                    ColumnTransform::Standardize { mean, std }
                }
                ColumnKind::PositiveReal => ColumnTransform::Mapped {
                    map: DomainMap::fit_positive(&column_values(raw, j)),
                },
                ColumnKind::UnitInterval => ColumnTransform::Mapped {
                    map: DomainMap::UnitInterval,
                },
                ColumnKind::Count => ColumnTransform::Count,
                ColumnKind::Binary => ColumnTransform::Binary,
                ColumnKind::Categorical { levels } => {
                    let levels = match levels {
                        Some(declared) => {
                            for (i, row) in raw.rows.iter().enumerate() {
                                if let Cell::Level(l) = &row[j] {
                                    if !declared.contains(l) {
                                        return Err(Error::Parse {
                                            row: i + 1,
                                            column: col.name.clone(),
                                            msg: format!("level '{l}' is not declared in the schema"),
                                        });
                                    }
                                }
                            }
                            declared.clone()
                        }
                        None => {
                            let mut seen: Vec<String> = Vec::new();
                            for row in &raw.rows {
                                if let Cell::Level(l) = &row[j] {
                                    if !seen.contains(l) {
                                        seen.push(l.clone());
                                    }
                                }
                            }
                            seen
                        }
                    };
                    resolved.columns[j].kind = ColumnKind::Categorical {
                        levels: Some(levels.clone()),
                    };
                    ColumnTransform::OneHot { levels }
                }
            };
            transforms.push(t);
        }

        // Continuous columns share one Gaussian block at the front; every
        // discrete column follows as its own block, in schema order.
        let mut blocks = Vec::new();
        let mut offsets = vec![0; schema.columns.len()];
        let continuous: Vec<usize> = (0..schema.columns.len())
            .filter(|&j| schema.columns[j].kind.is_continuous())
            .collect();
        let mut next = 0;
        if !continuous.is_empty() {
            for (pos, &j) in continuous.iter().enumerate() {
                offsets[j] = pos;
            }
            blocks.push(Block {
                family: Family::Gaussian { dim: continuous.len() },
                start: 0,
                columns: continuous.iter().map(|&j| schema.columns[j].name.clone()).collect(),
            });
            next = continuous.len();
        }
        for (j, t) in transforms.iter().enumerate() {
            let name = &schema.columns[j].name;
            let (family, columns) = match t {
                ColumnTransform::Count => (Family::Poisson, vec![name.clone()]),
                ColumnTransform::Binary => (Family::Binomial { trials: 1 }, vec![name.clone()]),
                ColumnTransform::OneHot { levels } => {
                    let mut cols: Vec<String> = levels.iter().map(|l| format!("{name}={l}")).collect();
                    cols.push(format!("{name}={OTHER_LEVEL}"));
                    (
                        Family::Multinomial {
                            trials: 1,
                            categories: levels.len() + 1,
                        },
                        cols,
                    )
                }
                _ => continue,
            };
            offsets[j] = next;
            blocks.push(Block {
                family,
                start: next,
                columns,
            });
            next += family.input_dim();
        }

        Ok(Self {
            schema: resolved,
            transforms,
            layout: Layout::new(blocks)?,
            offsets,
        })
    }

    /// Encodes a table with these (training) statistics. Unseen categorical
    /// levels go to the trailing bucket of their block.
    pub fn encode(&self, raw: &RawTable) -> Result<DatasetView> {
        let width = self.layout.width();
        let mut values = vec![0.0; raw.len() * width];
        for (i, row) in raw.rows.iter().enumerate() {
            if row.len() != self.transforms.len() {
                return Err(Error::Shape {
                    expected: self.transforms.len(),
                    got: row.len(),
                });
            }
            let out = &mut values[i * width..(i + 1) * width];
            for (j, (t, cell)) in self.transforms.iter().zip(row).enumerate() {
                let at = self.offsets[j];
                let column = || self.schema.columns[j].name.clone();
                match (t, cell) {
                    (ColumnTransform::Standardize { mean, std }, Cell::Number(x)) => {
                        out[at] = (x - mean) / std;
                    }
                    (ColumnTransform::Mapped { map }, Cell::Number(x)) => {
                        out[at] = map_domain(*x, map).map_err(|e| Error::Parse {
                            row: i + 1,
                            column: column(),
                            msg: e.to_string(),
                        })?;
                    }
                    (ColumnTransform::Count | ColumnTransform::Binary, Cell::Number(x)) => {
                        out[at] = *x;
                    }
                    (ColumnTransform::OneHot { levels }, Cell::Level(l)) => {
                        let k = levels.iter().position(|v| v == l).unwrap_or(levels.len());
                        out[at + k] = 1.0;
                    }
                    _ => {
                        return Err(Error::Parse {
                            row: i + 1,
                            column: column(),
                            msg: "cell type does not match the column kind".into(),
                        })
                    }
                }
            }
        }
        DatasetView::new(self.layout.clone(), values, raw.labels.clone())
    }

    /// Recovers the raw cells of one encoded row. The trailing bucket decodes
    /// to [`OTHER_LEVEL`].
    pub fn decode_row(&self, encoded: &[f64]) -> Result<Vec<Cell>> {
        if encoded.len() != self.layout.width() {
            return Err(Error::Shape {
                expected: self.layout.width(),
                got: encoded.len(),
            });
        }
        Ok(self
            .transforms
            .iter()
            .zip(&self.offsets)
            .map(|(t, &at)| match t {
                ColumnTransform::Standardize { mean, std } => Cell::Number(encoded[at] * std + mean),
                ColumnTransform::Mapped { map } => Cell::Number(unmap_domain(encoded[at], map)),
                ColumnTransform::Count | ColumnTransform::Binary => Cell::Number(encoded[at]),
                ColumnTransform::OneHot { levels } => {
                    let block = &encoded[at..at + levels.len() + 1];
                    let k = block.iter().position(|v| *v == 1.0).unwrap_or(levels.len());
                    Cell::Level(levels.get(k).cloned().unwrap_or_else(|| OTHER_LEVEL.to_string()))
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::read_csv;

    fn fixture() -> (FeatureSchema, RawTable) {
        let schema = FeatureSchema::parse("x:real\nu:unit-interval\nc:categorical:a|b|c\nn:count\nb:binary\n").unwrap();
        let csv = "x,u,c,n,b\n1,0.5,b,2,1\n3,0.2,a,0,0\n5,0.9,c,7,true\n";
        let raw = read_csv(csv.as_bytes(), &schema).unwrap();
        (schema, raw)
    }

    #[test]
    fn layout_and_one_hot() {
        let (schema, raw) = fixture();
        let (view, prep) = encode(&raw, &schema, None).unwrap();
        let fams = prep.layout.families();
        assert_eq!(
            fams,
            vec![
                Family::Gaussian { dim: 2 },
                Family::Multinomial { trials: 1, categories: 4 },
                Family::Poisson,
                Family::Binomial { trials: 1 },
            ]
        );
        assert_eq!(&view.row(0)[2..6], &[0.0, 1.0, 0.0, 0.0]);
        assert!(view.row(0)[1].abs() < 1e-15);
    }

    #[test]
    fn real_columns_are_standardized() {
        let (schema, raw) = fixture();
        let (view, _) = encode(&raw, &schema, None).unwrap();
        let xs: Vec<f64> = view.rows().map(|r| r[0]).collect();
        let mean = xs.iter().sum::<f64>() / 3.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-9);
        assert!((var.sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unseen_test_level_goes_to_other_bucket() {
        let (schema, raw) = fixture();
        let (_, prep) = encode(&raw, &schema, None).unwrap();
        let test = read_csv("x,u,c,n,b\n0,0.1,z,1,0\n".as_bytes(), &schema).unwrap();
        let view = prep.encode(&test).unwrap();
        assert_eq!(&view.row(0)[2..6], &[0.0, 0.0, 0.0, 1.0]);
        let decoded = prep.decode_row(view.row(0)).unwrap();
        assert_eq!(decoded[2], Cell::Level(OTHER_LEVEL.into()));
    }

    #[test]
    fn undeclared_training_level_is_rejected() {
        let (schema, _) = fixture();
        let raw = read_csv("x,u,c,n,b\n0,0.1,z,1,0\n".as_bytes(), &schema).unwrap();
        assert!(matches!(Preprocessing::fit(&raw, &schema), Err(Error::Parse { .. })));
    }

    #[test]
    fn zero_variance_column_keeps_unit_scale() {
        let schema = FeatureSchema::parse("x:real\n").unwrap();
        let raw = read_csv("x\n2\n2\n".as_bytes(), &schema).unwrap();
        let prep = Preprocessing::fit(&raw, &schema).unwrap();
        assert_eq!(prep.transforms[0], ColumnTransform::Standardize { mean: 2.0, std: 1.0 });
    }

    #[test]
    fn inferred_levels_follow_first_appearance() {
        let schema = FeatureSchema::parse("c:categorical\n").unwrap();
        let raw = read_csv("c\nq\np\nq\n".as_bytes(), &schema).unwrap();
        let prep = Preprocessing::fit(&raw, &schema).unwrap();
        assert_eq!(
            prep.transforms[0],
            ColumnTransform::OneHot {
                levels: vec!["q".into(), "p".into()]
            }
        );
        assert!(!prep.schema.has_unresolved_levels());
    }

    #[test]
    fn re_encoding_training_data_is_idempotent() {
        let (schema, raw) = fixture();
        let (first, prep) = encode(&raw, &schema, None).unwrap();
        let (second, _) = encode(&raw, &schema, Some(&prep)).unwrap();
        assert_eq!(first, second);
    }
}
