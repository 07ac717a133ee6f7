use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FittedModel;
use crate::data::Preprocessing;
use crate::error::{Error, Result};

pub const MODEL_VERSION: &str = "dpmm-model/1";

/// Self-describing model file: the fitted variational parameters plus the
/// preprocessing needed to encode new rows. Floats are written in shortest
/// round-trip decimal form, so loading restores them exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocessing: Option<Preprocessing>,
    pub model: FittedModel,
}

impl ModelDocument {
    pub fn new(model: FittedModel, preprocessing: Option<Preprocessing>) -> Self {
        Self {
            version: MODEL_VERSION.to_string(),
            preprocessing,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)
            .map_err(|e| Error::Input(format!("malformed model document: {e}")))?;
        if doc.version != MODEL_VERSION {
            return Err(Error::Input(format!(
                "unsupported model version '{}', expected '{MODEL_VERSION}'",
                doc.version
            )));
        }
        doc.model.config.validate(&doc.model.layout)?;
        Ok(doc)
    }
}

pub fn save_model(path: &Path, doc: &ModelDocument) -> Result<()> {
    let mut text = doc.to_json()?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelDocument> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read model {}: {e}", path.display())))?;
    ModelDocument::from_json(&text)
}
