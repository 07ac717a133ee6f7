use std::io::Read;
use std::path::Path;

use super::schema::{ColumnKind, FeatureSchema};
use crate::error::{Error, Result};

/// One parsed cell. Numeric kinds hold their value; categoricals hold the
/// level text.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Level(String),
}

impl Cell {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            Cell::Level(_) => None,
        }
    }
}

/// Rows of typed cells in schema column order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub rows: Vec<Vec<Cell>>,
    /// Label column values (0 nominal, 1 anomaly) when the schema declares one
    /// and the file contains it.
    pub labels: Option<Vec<u8>>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<RawTable> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, schema)
}

/// Reads a headed CSV. Columns are matched by name; extra columns are
/// ignored. Row numbers in errors count data rows from 1.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h.trim() == name);

    let mut positions = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        positions.push(
            find(&col.name)
                .ok_or_else(|| Error::Input(format!("CSV header lacks column '{}'", col.name)))?,
        );
    }
    let label_pos = schema.label.as_deref().and_then(find);

    let mut rows = Vec::new();
    let mut labels = label_pos.map(|_| Vec::new());
    for (i, record) in rdr.records().enumerate() {
        let row_no = i + 1;
        let record = record?;
        let mut row = Vec::with_capacity(positions.len());
        for (col, &pos) in schema.columns.iter().zip(&positions) {
            let text = record.get(pos).unwrap_or("").trim();
            let fail = |msg: String| Error::Parse {
                row: row_no,
                column: col.name.clone(),
                msg,
            };
            row.push(parse_cell(text, &col.kind).map_err(fail)?);
        }
        if let (Some(pos), Some(labels)) = (label_pos, labels.as_mut()) {
            let text = record.get(pos).unwrap_or("").trim();
            let v = parse_binary(text).map_err(|msg| Error::Parse {
                row: row_no,
                column: schema.label.clone().unwrap_or_default(),
                msg,
            })?;
            labels.push(v as u8);
        }
        rows.push(row);
    }
    Ok(RawTable { rows, labels })
}

fn parse_binary(text: &str) -> std::result::Result<f64, String> {
    match text.to_ascii_lowercase().as_str() {
        "0" | "false" => Ok(0.0),
        "1" | "true" => Ok(1.0),
        _ => Err(format!("'{text}' is not binary (0/1/true/false)")),
    }
}

fn parse_cell(text: &str, kind: &ColumnKind) -> std::result::Result<Cell, String> {
    let number = || -> std::result::Result<f64, String> {
        let v: f64 = text.parse().map_err(|_| format!("'{text}' is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("'{text}' is not finite"))
        }
    };
    match kind {
        ColumnKind::Real => number().map(Cell::Number),
        ColumnKind::PositiveReal => {
            let v = number()?;
            if v < 0.0 {
                return Err(format!("{v} is negative"));
            }
            Ok(Cell::Number(v))
        }
        ColumnKind::UnitInterval => {
            let v = number()?;
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{v} is outside [0, 1]"));
            }
            Ok(Cell::Number(v))
        }
        ColumnKind::Count => {
            let v: u64 = text
                .parse()
                .map_err(|_| format!("'{text}' is not a nonnegative integer"))?;
            Ok(Cell::Number(v as f64))
        }
        ColumnKind::Binary => parse_binary(text).map(Cell::Number),
        ColumnKind::Categorical { .. } => {
            if text.is_empty() {
                Err("empty categorical value".into())
            } else {
                Ok(Cell::Level(text.to_string()))
            }
        }
    }
}
