//! HTK-scale triangular mel filterbank, orthonormal DCT-II and MFCC summary.

use std::f64::consts::PI;

use ndarray::Array2;

use super::FeatureConfig;
use crate::dsp::{bin_frequencies, Spectrogram};
use crate::error::{Error, Result};

/// `2595 * log10(1 + f / 700)`.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Dense `[n_mels x (frame_len/2 + 1)]` filterbank with unit-peak triangles
/// whose centres are equally spaced in mel between `fmin` and `fmax`.
pub fn mel_filterbank(cfg: &FeatureConfig, frame_len: usize, sample_rate: u32) -> Result<Array2<f64>> {
    let fmax = cfg.fmax_for(sample_rate);
    if !(cfg.fmin >= 0.0 && cfg.fmin < fmax && fmax <= sample_rate as f64 / 2.0) {
        return Err(Error::BadRange { fmin: cfg.fmin, fmax });
    }
    if cfg.n_mels == 0 {
        return Err(Error::BadConfig("n_mels must be positive".into()));
    }
    let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(fmax));
    let step = (hi - lo) / (cfg.n_mels + 1) as f64;
    let edges: Vec<f64> = (0..cfg.n_mels + 2).map(|i| mel_to_hz(lo + step * i as f64)).collect();

    let freqs = bin_frequencies(frame_len, sample_rate);
    let mut fb = Array2::zeros((cfg.n_mels, freqs.len()));
    for (i, mut row) in fb.rows_mut().into_iter().enumerate() {
        let (left, centre, right) = (edges[i], edges[i + 1], edges[i + 2]);
        for (w, &f) in row.iter_mut().zip(&freqs) {
            let rising = (f - left) / (centre - left);
            let falling = (right - f) / (right - centre);
            *w = rising.min(falling).max(0.0);
        }
    }
    Ok(fb)
}

/// Orthonormal DCT-II basis, `[n_out x n]`. Row `k` is
/// `s_k cos(π k (2j + 1) / 2n)` with `s_0 = sqrt(1/n)`, `s_k = sqrt(2/n)`.
pub fn dct_matrix(n_out: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n_out, n), |(k, j)| {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        scale * (PI * k as f64 * (2 * j + 1) as f64 / (2 * n) as f64).cos()
    })
}

/// Filterbank rows stored as contiguous non-zero spans, so applying it costs
/// O(bins) instead of O(mels x bins).
#[derive(Debug, Clone)]
pub(crate) struct SparseFilterbank {
    spans: Vec<(usize, Vec<f64>)>,
}

impl SparseFilterbank {
    pub(crate) fn from_dense(fb: &Array2<f64>) -> Self {
        let spans = fb
            .rows()
            .into_iter()
            .map(|row| {
                let start = row.iter().position(|w| *w > 0.0).unwrap_or(0);
                let end = row.iter().rposition(|w| *w > 0.0).map_or(start, |e| e + 1);
                (start, row.iter().skip(start).take(end - start).copied().collect())
            })
            .collect();
        Self { spans }
    }

    pub(crate) fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (dst, (start, weights)) in out.iter_mut().zip(&self.spans) {
            *dst = weights.iter().zip(&power[*start..]).map(|(w, p)| w * p).sum();
        }
    }
}

/// Precomputed pieces for repeated MFCC summaries at one configuration.
#[derive(Debug, Clone)]
pub(crate) struct MfccPlan {
    filterbank: SparseFilterbank,
    dct: Array2<f64>,
    log_floor: f64,
}

impl MfccPlan {
    pub(crate) fn new(cfg: &FeatureConfig, frame_len: usize, sample_rate: u32) -> Result<Self> {
        if cfg.n_mfcc > cfg.n_mels {
            return Err(Error::BadConfig(format!(
                "n_mfcc {} exceeds n_mels {}",
                cfg.n_mfcc, cfg.n_mels
            )));
        }
        if cfg.log_floor.is_nan() || cfg.log_floor <= 0.0 {
            return Err(Error::BadConfig("log_floor must be positive".into()));
        }
        let dense = mel_filterbank(cfg, frame_len, sample_rate)?;
        Ok(Self {
            filterbank: SparseFilterbank::from_dense(&dense),
            dct: dct_matrix(cfg.n_mfcc, cfg.n_mels),
            log_floor: cfg.log_floor,
        })
    }

    pub(crate) fn means(&self, spec: &Spectrogram) -> Result<Vec<f64>> {
        if spec.n_frames() == 0 {
            return Err(Error::NoFrames);
        }
        let n_mels = self.dct.ncols();
        let mut power = vec![0.0; spec.n_bins()];
        let mut log_mel = vec![0.0; n_mels];
        let mut sums = vec![0.0; self.dct.nrows()];
        for row in spec.magnitudes().rows() {
            for (p, m) in power.iter_mut().zip(row.iter()) {
                *p = m * m;
            }
            self.filterbank.apply(&power, &mut log_mel);
            for e in log_mel.iter_mut() {
                *e = e.max(self.log_floor).ln();
            }
            for (sum, basis) in sums.iter_mut().zip(self.dct.rows()) {
                *sum += basis.iter().zip(&log_mel).map(|(b, e)| b * e).sum::<f64>();
            }
        }
        let n = spec.n_frames() as f64;
        Ok(sums.into_iter().map(|s| s / n).collect())
    }
}

/// Per-coefficient mean over frames of `DCT(ln(max(mel energy, floor)))`,
/// keeping the first `n_mfcc` coefficients.
pub fn mfcc_means(spec: &Spectrogram, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    MfccPlan::new(cfg, spec.config().frame_len, spec.sample_rate())?.means(spec)
}
