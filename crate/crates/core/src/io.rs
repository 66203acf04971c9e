//! Model files and configuration loading.
//!
//! A model file is a JSON document carrying the format version, the three
//! dimensions and the five parameter blocks flattened in row-major order.
//! Floats are written in shortest round-trip form and parsed with exact
//! rounding, so a save/load cycle reproduces every bit.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dropping::DroppingScheme;
use crate::error::{Error, Result};
use crate::model::{Dims, ModelParameters};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamFile {
    pub format_version: u32,
    pub inputs: usize,
    pub hidden: usize,
    pub classes: usize,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    /// inputs × hidden, row-major.
    pub w1: Vec<f64>,
    /// hidden × classes, row-major.
    pub w2: Vec<f64>,
    /// Masking scheme the parameters were trained under; selects the prediction rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<DroppingScheme>,
}

impl ParamFile {
    pub fn from_params(params: &ModelParameters, scheme: Option<DroppingScheme>) -> Self {
        let dims = params.dims();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            inputs: dims.inputs,
            hidden: dims.hidden,
            classes: dims.classes,
            b: params.b().to_vec(),
            c: params.c().to_vec(),
            d: params.d().to_vec(),
            w1: params.w1().iter().copied().collect(),
            w2: params.w2().iter().copied().collect(),
            scheme,
        }
    }

    pub fn to_params(&self) -> Result<ModelParameters> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let dims = Dims::new(self.inputs, self.hidden, self.classes)?;
        let w1 = Array2::from_shape_vec((dims.inputs, dims.hidden), self.w1.clone())
            .map_err(|e| Error::Format(format!("W1: {e}")))?;
        let w2 = Array2::from_shape_vec((dims.hidden, dims.classes), self.w2.clone())
            .map_err(|e| Error::Format(format!("W2: {e}")))?;
        ModelParameters::new(
            Array1::from(self.b.clone()),
            Array1::from(self.c.clone()),
            Array1::from(self.d.clone()),
            w1,
            w2,
        )
    }
}

pub fn model_to_string(params: &ModelParameters, scheme: Option<&DroppingScheme>) -> String {
    let file = ParamFile::from_params(params, scheme.cloned());
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_str(s: &str) -> Result<(ModelParameters, Option<DroppingScheme>)> {
    let file: ParamFile =
        serde_json::from_str(s).map_err(|e| Error::Format(format!("model file: {e}")))?;
    Ok((file.to_params()?, file.scheme))
}

pub fn save_model(
    path: impl AsRef<Path>,
    params: &ModelParameters,
    scheme: Option<&DroppingScheme>,
) -> Result<()> {
    fs::write(path, model_to_string(params, scheme))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(ModelParameters, Option<DroppingScheme>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read model {}: {e}", path.display())))?;
    model_from_str(&text)
}

/// Reads a TOML file into `T`; parse errors carry the file name and line/column.
pub fn load_toml<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    toml_from_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn toml_from_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("serialize: {e}")))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
