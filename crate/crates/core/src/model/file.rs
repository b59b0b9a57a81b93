//! Versioned JSON model files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CategoryModel, ModelError, RegressionModel};
use crate::stack::StackKind;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("cannot access model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("model file schema version {found} is newer than supported version {supported}")]
    UnsupportedVersion { found: u64, supported: u32 },
    #[error("model file is missing category `{0}`")]
    MissingCategory(String),
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

#[derive(Serialize, Deserialize)]
struct CoefficientRecord {
    alpha: f64,
    beta: f64,
    gamma: f64,
    rho: f64,
    mse: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    kind: StackKind,
    categories: BTreeMap<String, CoefficientRecord>,
    #[serde(default)]
    training_meta: BTreeMap<String, String>,
}

pub fn model_to_json(model: &RegressionModel) -> String {
    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        kind: model.kind(),
        categories: model
            .categories()
            .iter()
            .map(|m| {
                (
                    m.category.name().to_string(),
                    CoefficientRecord {
                        alpha: m.alpha,
                        beta: m.beta,
                        gamma: m.gamma,
                        rho: m.rho,
                        mse: m.mse,
                    },
                )
            })
            .collect(),
        training_meta: model.training_meta.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model file serializes");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str) -> Result<RegressionModel, ModelFileError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelFileError::Malformed(e.to_string()))?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ModelFileError::Malformed("missing integer `schema_version`".into()))?;
    if version > u64::from(MODEL_SCHEMA_VERSION) {
        return Err(ModelFileError::UnsupportedVersion {
            found: version,
            supported: MODEL_SCHEMA_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| ModelFileError::Malformed(e.to_string()))?;

    let mut cats = Vec::new();
    for &c in file.kind.categories() {
        let rec = file
            .categories
            .get(c.name())
            .ok_or_else(|| ModelFileError::MissingCategory(c.name().to_string()))?;
        cats.push(CategoryModel {
            category: c,
            alpha: rec.alpha,
            beta: rec.beta,
            gamma: rec.gamma,
            rho: rec.rho,
            mse: rec.mse,
        });
    }
    if let Some(extra) = file
        .categories
        .keys()
        .find(|k| !file.kind.categories().iter().any(|c| c.name() == k.as_str()))
    {
        return Err(ModelFileError::Malformed(format!(
            "category `{extra}` does not belong to a {} model",
            file.kind
        )));
    }
    let mut model = RegressionModel::new(file.kind, cats)?;
    model.training_meta = file.training_meta;
    Ok(model)
}

pub fn save_model(model: &RegressionModel, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    fs::write(path, model_to_json(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RegressionModel, ModelFileError> {
    model_from_json(&fs::read_to_string(path)?)
}
