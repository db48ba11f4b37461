//! The 26-value per-sample summary: zero-crossing rate, spectral centroid,
//! bandwidth and rolloff, RMS energy, chroma, and 20 MFCCs, each averaged over
//! the frames of one shared STFT grid.

pub mod chroma;
pub mod mel;
pub mod spectral;
pub mod temporal;

use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::dsp::{frame_signal, stft, StftConfig};
use crate::error::{Error, Result};

pub use chroma::chroma_mean;
pub use mel::{dct_matrix, hz_to_mel, mel_filterbank, mel_to_hz, mfcc_means};
pub use spectral::{spectral_bandwidth_mean, spectral_centroid_mean, spectral_rolloff_mean};
pub use temporal::{rms_mean, zcr_mean};

/// Number of MFCC coefficients in the feature schema.
pub const MFCC_COUNT: usize = 20;
/// Total feature-vector width.
pub const FEATURE_COUNT: usize = 6 + MFCC_COUNT;
/// Bumped whenever the column order or meaning of [`FeatureVector`] changes.
pub const SCHEMA_VERSION: u32 = 1;

const SCALAR_NAMES: [&str; 6] = [
    "zcr_mean",
    "centroid_mean",
    "bandwidth_mean",
    "rolloff_mean",
    "rms_mean",
    "chroma_mean",
];

/// Column names in schema order.
pub fn feature_names() -> Vec<String> {
    SCALAR_NAMES
        .iter()
        .map(|s| s.to_string())
        .chain((1..=MFCC_COUNT).map(|i| format!("mfcc_mean_{i}")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub n_mfcc: usize,
    pub n_mels: usize,
    pub rolloff_pct: f64,
    pub bandwidth_order: u32,
    pub fmin: f64,
    /// `None` means the Nyquist frequency of the analysed signal.
    pub fmax: Option<f64>,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_mfcc: MFCC_COUNT,
            n_mels: 128,
            rolloff_pct: 0.85,
            bandwidth_order: 2,
            fmin: 0.0,
            fmax: None,
            log_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    pub fn fmax_for(&self, sample_rate: u32) -> f64 {
        self.fmax.unwrap_or(sample_rate as f64 / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub schema_version: u32,
}

impl FeatureVector {
    pub fn new(values: [f64; FEATURE_COUNT]) -> Self {
        Self {
            values,
            schema_version: SCHEMA_VERSION,
        }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let values: [f64; FEATURE_COUNT] = values
            .try_into()
            .map_err(|_| Error::SchemaMismatch(format!("expected {FEATURE_COUNT} features, got {}", values.len())))?;
        Ok(Self::new(values))
    }

    pub fn zcr(&self) -> f64 {
        self.values[0]
    }
    pub fn centroid(&self) -> f64 {
        self.values[1]
    }
    pub fn bandwidth(&self) -> f64 {
        self.values[2]
    }
    pub fn rolloff(&self) -> f64 {
        self.values[3]
    }
    pub fn rms(&self) -> f64 {
        self.values[4]
    }
    pub fn chroma(&self) -> f64 {
        self.values[5]
    }
    pub fn mfcc(&self) -> &[f64] {
        &self.values[6..]
    }
}

/// Reusable extractor for one (sample rate, STFT, feature) configuration.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    stft: StftConfig,
    features: FeatureConfig,
    sample_rate: u32,
    mfcc: mel::MfccPlan,
}

impl FeatureExtractor {
    pub fn new(stft: StftConfig, features: FeatureConfig, sample_rate: u32) -> Result<Self> {
        stft.validate()?;
        if features.n_mfcc != MFCC_COUNT {
            return Err(Error::BadConfig(format!(
                "feature schema v{SCHEMA_VERSION} requires n_mfcc = {MFCC_COUNT}"
            )));
        }
        if !(features.rolloff_pct > 0.0 && features.rolloff_pct <= 1.0) {
            return Err(Error::BadPct(features.rolloff_pct));
        }
        if features.bandwidth_order == 0 {
            return Err(Error::BadOrder(0));
        }
        let mfcc = mel::MfccPlan::new(&features, stft.frame_len, sample_rate)?;
        Ok(Self {
            stft,
            features,
            sample_rate,
            mfcc,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn extract(&self, buf: &AudioBuffer) -> Result<FeatureVector> {
        if buf.sample_rate() != self.sample_rate {
            return Err(Error::BadConfig(format!(
                "buffer at {} Hz given to an extractor configured for {} Hz",
                buf.sample_rate(),
                self.sample_rate
            )));
        }
        let spec = stft(buf, &self.stft)?;
        let frames = frame_signal(buf.samples(), &self.stft);

        let mut values = [0.0; FEATURE_COUNT];
        values[0] = zcr_mean(&frames)?;
        values[1] = spectral_centroid_mean(&spec)?;
        values[2] = spectral_bandwidth_mean(&spec, self.features.bandwidth_order)?;
        values[3] = spectral_rolloff_mean(&spec, self.features.rolloff_pct)?;
        values[4] = rms_mean(&frames)?;
        values[5] = chroma_mean(&spec)?;
        values[6..].copy_from_slice(&self.mfcc.means(&spec)?);
        Ok(FeatureVector::new(values))
    }
}

pub fn extract_features(buf: &AudioBuffer, stft_cfg: &StftConfig, feat_cfg: &FeatureConfig) -> Result<FeatureVector> {
    FeatureExtractor::new(*stft_cfg, *feat_cfg, buf.sample_rate())?.extract(buf)
}
