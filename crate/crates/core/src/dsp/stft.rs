//! Framing, windowing and the magnitude spectrogram shared by every spectral
//! feature.
//!
//! Frames are never centre-padded: frame `i` covers samples
//! `[i * hop, i * hop + frame_len)` and only frames that lie fully inside the
//! signal are emitted. Time-domain features (ZCR, RMS) therefore see exactly the
//! same frame grid as the spectrum-based ones.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::RealFft;
use crate::audio_io::AudioBuffer;
use crate::error::{Error, Result};

/// Floor of the log-scaled PGM rendering, in dB relative to the peak magnitude.
pub const PGM_DB_FLOOR: f64 = -80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_len: 2048,
            hop: 512,
            window: WindowKind::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_len < 2 {
            return Err(Error::BadLength(self.frame_len));
        }
        if self.hop == 0 || self.hop > self.frame_len {
            return Err(Error::BadConfig(format!(
                "hop {} must lie in 1..={}",
                self.hop, self.frame_len
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    /// `0` if the signal is shorter than one frame, else `1 + (len - frame_len) / hop`.
    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            1 + (len - self.frame_len) / self.hop
        }
    }

    pub fn window(&self) -> Result<Vec<f64>> {
        match self.window {
            WindowKind::Hann => hann(self.frame_len),
            WindowKind::Rectangular => Ok(vec![1.0; self.frame_len]),
        }
    }
}

/// Periodic Hann window, `w[i] = 0.5 - 0.5 cos(2πi/n)`.
pub fn hann(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::BadLength(n));
    }
    Ok((0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect())
}

pub fn frame_signal<'a>(samples: &'a [f64], cfg: &StftConfig) -> Vec<&'a [f64]> {
    (0..cfg.n_frames(samples.len()))
        .map(|i| &samples[i * cfg.hop..i * cfg.hop + cfg.frame_len])
        .collect()
}

/// One-sided magnitude spectrogram, rows = frames, columns = frequency bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    magnitudes: Array2<f64>,
    bin_freqs: Vec<f64>,
    config: StftConfig,
    sample_rate: u32,
}

impl Spectrogram {
    /// Wraps an externally computed magnitude matrix, checking the shape and
    /// value invariants.
    pub fn from_magnitudes(magnitudes: Array2<f64>, sample_rate: u32, config: StftConfig) -> Result<Self> {
        config.validate()?;
        if sample_rate == 0 {
            return Err(Error::BadRate(0));
        }
        if magnitudes.ncols() != config.n_bins() {
            return Err(Error::DimMismatch {
                expected: config.n_bins(),
                actual: magnitudes.ncols(),
            });
        }
        if magnitudes.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::BadConfig("magnitudes must be finite and non-negative".into()));
        }
        Ok(Self {
            bin_freqs: bin_frequencies(config.frame_len, sample_rate),
            magnitudes,
            config,
            sample_rate,
        })
    }

    pub fn magnitudes(&self) -> &Array2<f64> {
        &self.magnitudes
    }

    pub fn bin_freqs(&self) -> &[f64] {
        &self.bin_freqs
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn n_frames(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.magnitudes.ncols()
    }

    /// Rows = frames; a header line carries the bin frequencies.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# wrice-spectrogram sample_rate={} frame_len={} hop={} window={:?}",
            self.sample_rate, self.config.frame_len, self.config.hop, self.config.window
        )?;
        write!(out, "time_s")?;
        for f in &self.bin_freqs {
            write!(out, ",{f}")?;
        }
        writeln!(out)?;
        for (i, row) in self.magnitudes.rows().into_iter().enumerate() {
            let t = (i * self.config.hop) as f64 / self.sample_rate as f64;
            write!(out, "{t}")?;
            for m in row {
                write!(out, ",{m:.9e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Binary 8-bit PGM: time on the x axis, frequency on the y axis with the
    /// lowest bin at the bottom, grey level linear in dB over
    /// `[PGM_DB_FLOOR, 0]` relative to the loudest cell.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (w, h) = (self.n_frames(), self.n_bins());
        let peak = self.magnitudes.iter().copied().fold(0.0, f64::max);
        let mut out = format!(
            "P5\n# wrice-spectrogram sample_rate={} frame_len={} hop={} db_floor={}\n{w} {h}\n255\n",
            self.sample_rate, self.config.frame_len, self.config.hop, PGM_DB_FLOOR
        )
        .into_bytes();
        for bin in (0..h).rev() {
            for frame in 0..w {
                let m = self.magnitudes[[frame, bin]];
                let level = if peak > 0.0 && m > 0.0 {
                    let db = (20.0 * (m / peak).log10()).max(PGM_DB_FLOOR);
                    ((db - PGM_DB_FLOOR) / -PGM_DB_FLOOR * 255.0).round() as u8
                } else {
                    0
                };
                out.push(level);
            }
        }
        out
    }
}

pub fn bin_frequencies(frame_len: usize, sample_rate: u32) -> Vec<f64> {
    (0..=frame_len / 2)
        .map(|k| k as f64 * sample_rate as f64 / frame_len as f64)
        .collect()
}

pub fn stft(buf: &AudioBuffer, cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    if !cfg.frame_len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(cfg.frame_len));
    }
    let samples = buf.samples();
    if samples.len() < cfg.frame_len {
        return Err(Error::TooShort {
            len: samples.len(),
            frame_len: cfg.frame_len,
        });
    }

    let window = cfg.window()?;
    let plan = RealFft::new(cfg.frame_len)?;
    let frames = frame_signal(samples, cfg);
    let n_bins = cfg.n_bins();
    let mut magnitudes = Array2::zeros((frames.len(), n_bins));
    let mut windowed = vec![0.0; cfg.frame_len];
    let mut scratch = vec![Complex64::default(); cfg.frame_len / 2];
    let mut spectrum = vec![Complex64::default(); n_bins];
    for (mut row, frame) in magnitudes.rows_mut().into_iter().zip(&frames) {
        for ((dst, &x), &w) in windowed.iter_mut().zip(frame.iter()).zip(&window) {
            *dst = x * w;
        }
        plan.process(&windowed, &mut scratch, &mut spectrum);
        for (m, z) in row.iter_mut().zip(&spectrum) {
            *m = z.norm();
        }
    }

    Ok(Spectrogram {
        magnitudes,
        bin_freqs: bin_frequencies(cfg.frame_len, buf.sample_rate()),
        config: *cfg,
        sample_rate: buf.sample_rate(),
    })
}
