use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declared type of a raw input column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ColumnKind {
    Real,
    PositiveReal,
    UnitInterval,
    Count,
    Binary,
    /// Levels in declared order. `None` means the levels are read from the
    /// training data, in order of first appearance.
    Categorical { levels: Option<Vec<String>> },
}

impl ColumnKind {
    fn keyword(word: &str) -> Option<ColumnKind> {
        Some(match word {
            "real" => ColumnKind::Real,
            "positive-real" => ColumnKind::PositiveReal,
            "unit-interval" => ColumnKind::UnitInterval,
            "count" => ColumnKind::Count,
            "binary" => ColumnKind::Binary,
            "categorical" => ColumnKind::Categorical { levels: None },
            _ => return None,
        })
    }

    /// Columns that end up in the joint Gaussian block.
    pub fn is_continuous(&self) -> bool {
        matches!(
            self,
            ColumnKind::Real | ColumnKind::PositiveReal | ColumnKind::UnitInterval
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            ColumnKind::Real => "real",
            ColumnKind::PositiveReal => "positive-real",
            ColumnKind::UnitInterval => "unit-interval",
            ColumnKind::Count => "count",
            ColumnKind::Binary => "binary",
            ColumnKind::Categorical { .. } => "categorical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

/// Ordered feature columns plus an optional label column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<Column>,
    pub label: Option<String>,
}

impl FeatureSchema {
    /// Parses the line-oriented schema format:
    ///
    /// ```text
    /// # comment
    /// amount:positive-real
    /// country:categorical:fr|de|us
    /// visits:count
    /// label:is_fraud
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns: Vec<Column> = Vec::new();
        let mut label: Option<(String, usize)> = None;
        let mut seen = HashSet::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Schema { line: line_no, msg };
            let mut parts = line.splitn(3, ':');
            let name = parts.next().unwrap_or("").trim();
            let kind_word = parts
                .next()
                .ok_or_else(|| err(format!("expected name:kind, got '{line}'")))?
                .trim();
            let extra = parts.next().map(str::trim);

            if name == "label" && ColumnKind::keyword(kind_word).is_none() {
                if extra.is_some() || kind_word.is_empty() {
                    return Err(err(format!("malformed label declaration '{line}'")));
                }
                if label.is_some() {
                    return Err(err("label declared twice".into()));
                }
                label = Some((kind_word.to_string(), line_no));
                continue;
            }

            if name.is_empty() {
                return Err(err("empty column name".into()));
            }
            let mut kind = ColumnKind::keyword(kind_word)
                .ok_or_else(|| err(format!("unknown column kind '{kind_word}'")))?;
            match (&mut kind, extra) {
                (ColumnKind::Categorical { levels }, Some(list)) => {
                    let mut declared: Vec<String> = Vec::new();
                    for level in list.split('|').map(str::trim) {
                        if level.is_empty() {
                            return Err(err(format!("empty level in '{list}'")));
                        }
                        if !declared.iter().any(|l| l == level) {
                            declared.push(level.to_string());
                        }
                    }
                    *levels = Some(declared);
                }
                (_, Some(_)) => {
                    return Err(err(format!("kind '{kind_word}' takes no arguments")));
                }
                (_, None) => {}
            }
            if !seen.insert(name.to_string()) {
                return Err(err(format!("duplicate column '{name}'")));
            }
            columns.push(Column {
                name: name.to_string(),
                kind,
            });
        }

        if columns.is_empty() {
            return Err(Error::Schema {
                line: text.lines().count().max(1),
                msg: "schema declares no feature columns".into(),
            });
        }
        if let Some((name, line)) = &label {
            if seen.contains(name) {
                return Err(Error::Schema {
                    line: *line,
                    msg: format!("label '{name}' is also declared as a feature"),
                });
            }
        }
        Ok(Self {
            columns,
            label: label.map(|(name, _)| name),
        })
    }

    /// Renders the schema back to its text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            out.push_str(&c.name);
            out.push(':');
            out.push_str(c.kind.name());
            if let ColumnKind::Categorical { levels: Some(levels) } = &c.kind {
                out.push(':');
                out.push_str(&levels.join("|"));
            }
            out.push('\n');
        }
        if let Some(label) = &self.label {
            out.push_str(&format!("label:{label}\n"));
        }
        out
    }

    pub fn has_unresolved_levels(&self) -> bool {
        self.columns
            .iter()
            .any(|c| matches!(c.kind, ColumnKind::Categorical { levels: None }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_schema() {
        let s = FeatureSchema::parse("# demo\nx:real\n\nc:categorical:a|b|a\nn:count\nlabel:y\n").unwrap();
        assert_eq!(s.columns.len(), 3);
        assert_eq!(
            s.columns[1].kind,
            ColumnKind::Categorical {
                levels: Some(vec!["a".into(), "b".into()])
            }
        );
        assert_eq!(s.label.as_deref(), Some("y"));
        assert_eq!(FeatureSchema::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match FeatureSchema::parse("a:real\nb:weird\n") {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match FeatureSchema::parse("a:real\n# c\na:count\n") {
            Err(Error::Schema { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
        assert!(FeatureSchema::parse("").is_err());
        assert!(FeatureSchema::parse("# nothing\n").is_err());
        assert!(FeatureSchema::parse("c:categorical:\n").is_err());
        assert!(FeatureSchema::parse("x:real:3\n").is_err());
    }

    #[test]
    fn single_level_categorical_is_accepted() {
        let s = FeatureSchema::parse("c:categorical:only\n").unwrap();
        assert_eq!(
            s.columns[0].kind,
            ColumnKind::Categorical {
                levels: Some(vec!["only".into()])
            }
        );
    }

    #[test]
    fn label_may_name_a_column_called_like_a_kind() {
        // `label:count` declares a feature named "label", not a label column.
        let s = FeatureSchema::parse("label:count\n").unwrap();
        assert_eq!(s.columns[0].name, "label");
        assert!(s.label.is_none());
    }
}
