//! The deployable bundle (network + scaler + label map + extraction config)
//! and its versioned on-disk format.
//!
//! File layout: one JSON header line, then the parameters as text. For each
//! layer, a `layer <i> <out> <in>` line, `out` lines of `in` weights, and one
//! line of `out` biases, all printed with 17 significant digits. The header's
//! `checksum` is the SHA-256 of everything after the header line.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::{argmax, Arch, Dense, Network};
use super::train::{train, TrainConfig, TrainHistory};
use crate::dataset::{apply_scaler, fit_scaler, fmt_f64, scale_dataset, ExtractionConfig, LabeledDataset, Scaler};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_COUNT, SCHEMA_VERSION};

pub const MODEL_FORMAT: &str = "wrice-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub network: Network,
    pub scaler: Scaler,
    pub label_map: Vec<String>,
    pub extraction: ExtractionConfig,
    pub train_config: Option<TrainConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label_id: usize,
    pub label: String,
    pub probabilities: Vec<f64>,
}

impl MlpModel {
    pub fn new(network: Network, scaler: Scaler, label_map: Vec<String>, extraction: ExtractionConfig) -> Result<Self> {
        if network.n_inputs() != FEATURE_COUNT {
            return Err(Error::DimMismatch {
                expected: FEATURE_COUNT,
                actual: network.n_inputs(),
            });
        }
        if network.n_outputs() != label_map.len() {
            return Err(Error::DimMismatch {
                expected: label_map.len(),
                actual: network.n_outputs(),
            });
        }
        Ok(Self {
            network,
            scaler,
            label_map,
            extraction,
            train_config: None,
        })
    }

    /// Standardizes with the bundled scaler, runs the network and takes the
    /// arg-max (lowest index on ties).
    pub fn predict(&self, raw: &FeatureVector) -> Result<Prediction> {
        let scaled = apply_scaler(&self.scaler, raw)?;
        let probs = self.network.forward_one(&scaled.values)?;
        let label_id = argmax(probs.view());
        Ok(Prediction {
            label_id,
            label: self.label_map[label_id].clone(),
            probabilities: probs.to_vec(),
        })
    }
}

/// Fits the scaler on `train`, initializes the chosen architecture from
/// `cfg.seed`, and trains on the standardized rows.
pub fn fit(train_set: &LabeledDataset, arch: Arch, cfg: &TrainConfig) -> Result<(MlpModel, TrainHistory)> {
    if train_set.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let scaler = fit_scaler(train_set)?;
    let scaled = scale_dataset(&scaler, train_set)?;
    let x = Array2::from_shape_fn((scaled.len(), FEATURE_COUNT), |(i, j)| {
        scaled.rows[i].features.values[j]
    });
    let dims = arch.layer_dims(FEATURE_COUNT, train_set.label_map.len());
    let init = super::network::init_model(&dims, cfg.seed)?;
    let (network, history) = train(&init, x.view(), &scaled.labels(), cfg)?;
    let mut model = MlpModel::new(network, scaler, train_set.label_map.clone(), train_set.config)?;
    model.train_config = Some(*cfg);
    Ok((model, history))
}

#[derive(Debug, Serialize, Deserialize)]
struct Activations {
    hidden: String,
    output: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    schema_version: u32,
    layer_dims: Vec<usize>,
    activations: Activations,
    label_map: Vec<String>,
    scaler: Scaler,
    extraction: ExtractionConfig,
    train_config: Option<TrainConfig>,
    checksum: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(fmt_f64).collect::<Vec<_>>().join(" ")
}

pub fn encode_model(model: &MlpModel) -> Result<Vec<u8>> {
    let mut body = String::new();
    for (i, layer) in model.network.layers.iter().enumerate() {
        body.push_str(&format!("layer {i} {} {}\n", layer.fan_out(), layer.fan_in()));
        for row in layer.weights.rows() {
            body.push_str(&join(row.iter().copied()));
            body.push('\n');
        }
        body.push_str(&join(layer.biases.iter().copied()));
        body.push('\n');
    }
    let header = Header {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        schema_version: SCHEMA_VERSION,
        layer_dims: model.network.layer_dims(),
        activations: Activations {
            hidden: "relu".into(),
            output: "softmax".into(),
        },
        label_map: model.label_map.clone(),
        scaler: model.scaler.clone(),
        extraction: model.extraction,
        train_config: model.train_config,
        checksum: sha256_hex(body.as_bytes()),
    };
    let mut out = serde_json::to_string(&header).map_err(|e| Error::BadConfig(e.to_string()))?;
    out.push('\n');
    out.push_str(&body);
    Ok(out.into_bytes())
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptModel(msg.into())
}

fn parse_numbers(line: Option<&str>, expected: usize, what: &str) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| corrupt(format!("missing {what}")))?;
    let values = line
        .split(' ')
        .map(|v| v.parse::<f64>().map_err(|_| corrupt(format!("bad number in {what}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(corrupt(format!(
            "{what}: expected {expected} values, got {}",
            values.len()
        )));
    }
    Ok(values)
}

pub fn decode_model(bytes: &[u8]) -> Result<MlpModel> {
    let text = std::str::from_utf8(bytes).map_err(|_| corrupt("not UTF-8"))?;
    let (header_line, body) = text.split_once('\n').ok_or_else(|| corrupt("missing header line"))?;

    let raw: serde_json::Value = serde_json::from_str(header_line).map_err(|e| corrupt(format!("bad header: {e}")))?;
    if raw.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
        return Err(corrupt("not a wrice-model file"));
    }
    let version = raw
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| corrupt("missing version"))?;
    if version != MODEL_VERSION as u64 {
        return Err(Error::VersionMismatch {
            found: version as u32,
            expected: MODEL_VERSION,
        });
    }
    let header: Header = serde_json::from_value(raw).map_err(|e| corrupt(format!("bad header: {e}")))?;
    if sha256_hex(body.as_bytes()) != header.checksum {
        return Err(corrupt("checksum mismatch (truncated or edited parameters)"));
    }
    if header.activations.hidden != "relu" || header.activations.output != "softmax" {
        return Err(corrupt("unsupported activations"));
    }
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaMismatch(format!(
            "model built for feature schema v{}",
            header.schema_version
        )));
    }
    let dims = &header.layer_dims;
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::BadDims(dims.clone()));
    }

    let mut lines = body.lines();
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (i, w) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let expected = format!("layer {i} {fan_out} {fan_in}");
        if lines.next() != Some(expected.as_str()) {
            return Err(corrupt(format!("expected {expected:?}")));
        }
        let mut weights = Vec::with_capacity(fan_in * fan_out);
        for r in 0..fan_out {
            weights.extend(parse_numbers(lines.next(), fan_in, &format!("layer {i} row {r}"))?);
        }
        let biases = parse_numbers(lines.next(), fan_out, &format!("layer {i} biases"))?;
        layers.push(Dense {
            weights: Array2::from_shape_vec((fan_out, fan_in), weights).expect("sized above"),
            biases: Array1::from(biases),
        });
    }
    if lines.next().is_some() {
        return Err(corrupt("trailing data after parameters"));
    }
    let mut model = MlpModel::new(Network { layers }, header.scaler, header.label_map, header.extraction)?;
    model.train_config = header.train_config;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::network::init_model;

    fn small_model() -> MlpModel {
        let net = init_model(&[FEATURE_COUNT, 8, 4], 21).unwrap();
        let scaler = Scaler {
            mean: (0..FEATURE_COUNT).map(|i| i as f64 * 0.3).collect(),
            std: (0..FEATURE_COUNT).map(|i| 1.0 + i as f64 / 7.0).collect(),
            schema_version: SCHEMA_VERSION,
        };
        let labels = ["dry_40", "dry_60", "wet_40", "wet_60"].map(String::from).to_vec();
        MlpModel::new(net, scaler, labels, ExtractionConfig::default()).unwrap()
    }

    fn raw_input() -> FeatureVector {
        let mut v = [0.0; FEATURE_COUNT];
        for (i, x) in v.iter_mut().enumerate() {
            *x = (i as f64).cos() * 3.0;
        }
        FeatureVector::new(v)
    }

    #[test]
    fn predict_is_consistent_with_its_probabilities() {
        let m = small_model();
        let p = m.predict(&raw_input()).unwrap();
        assert_eq!(p.probabilities.len(), 4);
        assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(argmax(ndarray::ArrayView1::from(&p.probabilities)), p.label_id);
        assert_eq!(p.label, m.label_map[p.label_id]);

        let scaled = apply_scaler(&m.scaler, &raw_input()).unwrap();
        let direct = m.network.forward_one(&scaled.values).unwrap();
        assert_eq!(p.probabilities, direct.to_vec());
    }

    #[test]
    fn zero_weights_predict_first_label() {
        let mut m = small_model();
        for l in &mut m.network.layers {
            l.weights.fill(0.0);
        }
        let p = m.predict(&raw_input()).unwrap();
        assert_eq!(p.label, "dry_40");
        assert_eq!(p.probabilities, vec![0.25; 4]);
    }

    #[test]
    fn predict_rejects_schema_mismatch() {
        let mut fv = raw_input();
        fv.schema_version = 2;
        assert!(matches!(small_model().predict(&fv), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut m = small_model();
        m.train_config = Some(TrainConfig::default());
        let back = decode_model(&encode_model(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        let (a, b) = (m.predict(&raw_input()).unwrap(), back.predict(&raw_input()).unwrap());
        assert!(a
            .probabilities
            .iter()
            .zip(&b.probabilities)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let bytes = encode_model(&small_model()).unwrap();
        let text = String::from_utf8(bytes)
            .unwrap()
            .replacen("\"version\":1", "\"version\":7", 1);
        assert!(matches!(
            decode_model(text.as_bytes()),
            Err(Error::VersionMismatch { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn truncation_and_tampering_are_detected() {
        let bytes = encode_model(&small_model()).unwrap();
        for cut in [bytes.len() - 10, bytes.len() / 2, 20] {
            assert!(
                matches!(decode_model(&bytes[..cut]), Err(Error::CorruptModel(_))),
                "cut at {cut}"
            );
        }
        let mut tampered = bytes.clone();
        let last_digit = tampered.iter().rposition(|b| b.is_ascii_digit()).unwrap();
        tampered[last_digit] = if tampered[last_digit] == b'1' { b'2' } else { b'1' };
        assert!(matches!(decode_model(&tampered), Err(Error::CorruptModel(_))));
    }

    #[test]
    fn bundle_checks_dimensions() {
        let m = small_model();
        let net = init_model(&[FEATURE_COUNT, 8, 3], 0).unwrap();
        assert!(MlpModel::new(net, m.scaler.clone(), m.label_map.clone(), m.extraction).is_err());
        let net = init_model(&[5, 8, 4], 0).unwrap();
        assert!(MlpModel::new(net, m.scaler, m.label_map, m.extraction).is_err());
    }
}
