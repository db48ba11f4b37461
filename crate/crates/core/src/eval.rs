//! Accuracy / confusion-matrix scoring and the additive-noise validation
//! protocol.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio_io;
use crate::dataset::{extract_segments, scan_corpus, ExtractionConfig, LabeledDataset};
use crate::error::{Error, Result};
use crate::mlp::MlpModel;
use crate::synth::{add_noise, derive_seed};

/// Noise multipliers used when none are given.
pub const DEFAULT_NOISE_SCALES: [f64; 3] = [0.5, 0.05, 0.005];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub n: usize,
    pub labels: Vec<String>,
}

impl EvalReport {
    fn from_pairs(labels: &[String], pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let k = labels.len();
        let mut confusion = vec![vec![0; k]; k];
        let mut n = 0;
        for (truth, pred) in pairs {
            confusion[truth][pred] += 1;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptySet);
        }
        let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
        Ok(Self {
            accuracy: correct as f64 / n as f64,
            confusion,
            n,
            labels: labels.to_vec(),
        })
    }

    pub fn correct(&self) -> usize {
        (0..self.labels.len()).map(|i| self.confusion[i][i]).sum()
    }

    pub fn render_text(&self) -> String {
        let width = self
            .labels
            .iter()
            .map(|l| l.len())
            .max()
            .unwrap_or(0)
            .max("true\\pred".len());
        let mut s = format!("accuracy {:.4} ({}/{})\n", self.accuracy, self.correct(), self.n);
        let _ = write!(s, "{:>width$}", "true\\pred");
        for l in &self.labels {
            let _ = write!(s, " {l:>width$}");
        }
        s.push('\n');
        for (l, row) in self.labels.iter().zip(&self.confusion) {
            let _ = write!(s, "{l:>width$}");
            for c in row {
                let _ = write!(s, " {c:>width$}");
            }
            s.push('\n');
        }
        s
    }
}

/// Predicts every row with the model (and its bundled scaler).
pub fn evaluate(model: &MlpModel, test: &LabeledDataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptySet);
    }
    let label_ids = map_labels(&test.label_map, &model.label_map)?;
    let pairs = test
        .rows
        .iter()
        .map(|r| Ok((label_ids[r.label], model.predict(&r.features)?.label_id)))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_pairs(&model.label_map, pairs)
}

/// For each dataset label, the model's index for the same name.
fn map_labels(data: &[String], model: &[String]) -> Result<Vec<usize>> {
    data.iter()
        .map(|name| {
            model
                .iter()
                .position(|m| m == name)
                .ok_or_else(|| Error::SchemaMismatch(format!("label {name:?} is unknown to the model")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub scale: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseValidation {
    pub seed: u64,
    pub scales: Vec<ScaleReport>,
    pub extraction: ExtractionConfig,
    pub layer_dims: Vec<usize>,
}

impl NoiseValidation {
    pub fn accuracy_at(&self, scale: f64) -> Option<f64> {
        self.scales.iter().find(|s| s.scale == scale).map(|s| s.report.accuracy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }

    pub fn render_text(&self) -> String {
        let mut s = format!("noise validation (seed {})\n", self.seed);
        for r in &self.scales {
            let _ = writeln!(
                s,
                "scale {}: accuracy {:.4} ({}/{})",
                r.scale,
                r.report.accuracy,
                r.report.correct(),
                r.report.n
            );
        }
        for r in &self.scales {
            let _ = write!(s, "\n[scale {}]\n{}", r.scale, r.report.render_text());
        }
        s
    }
}

/// Seed of the noise realization for one file at one scale. Depends only on
/// the path relative to the corpus root, so processing order is irrelevant.
pub fn noise_seed(seed: u64, relative_path: &Path, scale: f64) -> u64 {
    let rel = relative_path
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/");
    derive_seed(seed, &format!("{rel}@{:016x}", scale.to_bits()))
}

/// Adds `scale`-weighted Gaussian noise to every recording of the corpus,
/// re-extracts features with the model's extraction config, and scores the
/// predictions. The noisy features are standardized with the bundled scaler.
pub fn noise_validation(
    model: &MlpModel,
    corpus_root: impl AsRef<Path>,
    scales: &[f64],
    seed: u64,
) -> Result<NoiseValidation> {
    let root = corpus_root.as_ref();
    if scales.is_empty() {
        return Err(Error::BadConfig("no noise scales given".into()));
    }
    if let Some(&bad) = scales.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::BadScale(bad));
    }
    let index = scan_corpus(root)?;
    let label_ids = map_labels(&index.label_map, &model.label_map)?;
    let config = model.extraction;
    let extractor = config.extractor()?;

    let mut pairs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); scales.len()];
    for (path, label) in &index.files {
        let mut run = || -> Result<()> {
            let clean = audio_io::load_mono(path, config.sample_rate)?;
            let rel = path.strip_prefix(root).unwrap_or(path);
            for (i, &scale) in scales.iter().enumerate() {
                let noisy = add_noise(&clean, scale, noise_seed(seed, rel, scale))?;
                for (_, fv) in extract_segments(&noisy, &path.display().to_string(), &config, &extractor)? {
                    pairs[i].push((label_ids[*label], model.predict(&fv)?.label_id));
                }
            }
            Ok(())
        };
        run().map_err(|e| e.context(path.display().to_string()))?;
    }
    let scales = scales
        .iter()
        .zip(pairs)
        .map(|(&scale, p)| {
            Ok(ScaleReport {
                scale,
                report: EvalReport::from_pairs(&model.label_map, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseValidation {
        seed,
        scales,
        extraction: config,
        layer_dims: model.network.layer_dims(),
    })
}
