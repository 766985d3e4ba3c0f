//! Model file: a JSON envelope with parameters as base64 little-endian f64.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Activation, MlpModel};
use crate::error::{Error, Result};
use crate::preprocess::{ScalerParams, SplitSpec};

pub const MODEL_FORMAT: &str = "wecfarm-mlp";
pub const MODEL_VERSION: u32 = 1;

/// A trained network with the scalers needed to use it on raw data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: MlpModel,
    pub feature_scaler: ScalerParams,
    pub target_scaler: ScalerParams,
    /// Split the model was trained under, so evaluation can rebuild it.
    pub split: Option<SplitSpec>,
    /// Scenario label, or `"combined"`.
    pub scenario: Option<String>,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    format: String,
    version: u32,
    layer_dims: Vec<usize>,
    activation: Activation,
    feature_scaler: ScalerParams,
    target_scaler: ScalerParams,
    #[serde(default)]
    split: Option<SplitSpec>,
    #[serde(default)]
    scenario: Option<String>,
    layers: Vec<LayerEnvelope>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEnvelope {
    rows: usize,
    cols: usize,
    weights: String,
    biases: String,
}

fn encode(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    B64.encode(bytes)
}

fn decode(field: &str, text: &str, expected: usize) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(text)
        .map_err(|e| Error::ModelFormat(format!("{field}: invalid base64: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::ModelFormat(format!(
            "{field}: holds {} values, expected {expected}",
            bytes.len() as f64 / 8.0
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Serializes the bundle as pretty-printed JSON. Identical bundles produce
/// identical bytes.
pub fn to_json(bundle: &ModelBundle) -> Result<String> {
    let m = &bundle.model;
    m.check_shapes()?;
    let layers = m
        .weights
        .iter()
        .zip(&m.biases)
        .zip(m.layer_dims.windows(2))
        .map(|((w, b), dims)| LayerEnvelope {
            rows: dims[1],
            cols: dims[0],
            weights: encode(w),
            biases: encode(b),
        })
        .collect();
    let env = Envelope {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        layer_dims: m.layer_dims.clone(),
        activation: m.activation,
        feature_scaler: bundle.feature_scaler.clone(),
        target_scaler: bundle.target_scaler.clone(),
        split: bundle.split,
        scenario: bundle.scenario.clone(),
        layers,
    };
    let mut s =
        serde_json::to_string_pretty(&env).map_err(|e| Error::ModelFormat(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<ModelBundle> {
    let header: Header =
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if header.format != MODEL_FORMAT {
        return Err(Error::ModelFormat(format!(
            "format: expected {MODEL_FORMAT:?}, found {:?}",
            header.format
        )));
    }
    if header.version != MODEL_VERSION {
        return Err(Error::ModelVersion {
            found: header.version,
            expected: MODEL_VERSION,
        });
    }
    let env: Envelope =
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;

    let dims = &env.layer_dims;
    if dims.len() < 2 {
        return Err(Error::ModelFormat(format!(
            "layer_dims: need at least 2 entries, got {dims:?}"
        )));
    }
    if env.layers.len() != dims.len() - 1 {
        return Err(Error::ModelFormat(format!(
            "layers: {} entries for layer_dims {dims:?}",
            env.layers.len()
        )));
    }
    let mut weights = Vec::with_capacity(env.layers.len());
    let mut biases = Vec::with_capacity(env.layers.len());
    for (l, (layer, pair)) in env.layers.iter().zip(dims.windows(2)).enumerate() {
        if layer.rows != pair[1] || layer.cols != pair[0] {
            return Err(Error::ModelFormat(format!(
                "layers[{l}]: weight matrix is {}x{}, layer_dims require {}x{}",
                layer.rows, layer.cols, pair[1], pair[0]
            )));
        }
        weights.push(decode(
            &format!("layers[{l}].weights"),
            &layer.weights,
            pair[0] * pair[1],
        )?);
        biases.push(decode(
            &format!("layers[{l}].biases"),
            &layer.biases,
            pair[1],
        )?);
    }
    let model = MlpModel {
        layer_dims: env.layer_dims,
        weights,
        biases,
        activation: env.activation,
    };
    model
        .check_shapes()
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    if env.feature_scaler.features() != model.input_dim() {
        return Err(Error::ModelFormat(format!(
            "feature_scaler: {} features for a {}-input model",
            env.feature_scaler.features(),
            model.input_dim()
        )));
    }
    if env.target_scaler.features() != 1 {
        return Err(Error::ModelFormat(format!(
            "target_scaler: {} features, expected 1",
            env.target_scaler.features()
        )));
    }
    Ok(ModelBundle {
        model,
        feature_scaler: env.feature_scaler,
        target_scaler: env.target_scaler,
        split: env.split,
        scenario: env.scenario,
    })
}

pub fn save_model(bundle: &ModelBundle, path: &Path) -> Result<()> {
    let text = to_json(bundle)?;
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_model(path: &Path) -> Result<ModelBundle> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{init_model, MlpConfig};

    fn bundle() -> ModelBundle {
        let cfg = MlpConfig {
            input_dim: 3,
            hidden_layers: vec![4],
            ..Default::default()
        };
        let mut model = init_model(&cfg).unwrap();
        model.biases[0][1] = -0.1 / 3.0;
        ModelBundle {
            model,
            feature_scaler: ScalerParams::MinMax {
                min: vec![0.0, 0.1, 1.0 / 3.0],
                max: vec![566.0, 565.9, 2.0],
            },
            target_scaler: ScalerParams::MinMax {
                min: vec![1_191_378.123],
                max: vec![1_583_052.7],
            },
            split: Some(SplitSpec::default()),
            scenario: Some("Adelaide".into()),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let b = bundle();
        let text = to_json(&b).unwrap();
        let back = from_json(&text).unwrap();
        assert_eq!(back, b);
        assert_eq!(to_json(&back).unwrap(), text);
    }

    #[test]
    fn truncated_file_fails() {
        let text = to_json(&bundle()).unwrap();
        assert!(matches!(
            from_json(&text[..text.len() / 2]),
            Err(Error::ModelFormat(_))
        ));
    }

    #[test]
    fn version_mismatch_fails() {
        let text = to_json(&bundle())
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            from_json(&text),
            Err(Error::ModelVersion { found: 9, .. })
        ));
    }

    #[test]
    fn missing_field_is_named() {
        let text = to_json(&bundle())
            .unwrap()
            .replace("\"activation\"", "\"activationx\"");
        let err = from_json(&text).unwrap_err().to_string();
        assert!(err.contains("activation"), "{err}");
    }

    #[test]
    fn column_mismatch_is_a_shape_error() {
        let text = to_json(&bundle())
            .unwrap()
            .replacen("\"cols\": 3", "\"cols\": 2", 1);
        let err = from_json(&text).unwrap_err().to_string();
        assert!(err.contains("layers[0]"), "{err}");
    }
}
