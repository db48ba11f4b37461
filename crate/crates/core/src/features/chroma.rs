//! Octave-folded pitch-class energy.
//!
//! Each bin above 0 Hz is assigned to `round(12 log2(f / 440)) mod 12`, so
//! class 0 is the A4-aligned pitch class. Per frame the 12-vector of summed
//! squared magnitudes is max-normalized; the scalar summary is its mean over
//! classes and frames.

use crate::dsp::Spectrogram;
use crate::error::{Error, Result};

pub const N_CHROMA: usize = 12;

pub fn pitch_class(freq: f64) -> Option<usize> {
    if freq > 0.0 {
        let semitones = (12.0 * (freq / 440.0).log2()).round() as i64;
        Some(semitones.rem_euclid(N_CHROMA as i64) as usize)
    } else {
        None
    }
}

fn bin_classes(spec: &Spectrogram) -> Vec<Option<usize>> {
    spec.bin_freqs().iter().map(|&f| pitch_class(f)).collect()
}

/// Per-frame accumulated (un-normalized) pitch-class energies.
pub fn chroma_energies(spec: &Spectrogram) -> Vec<[f64; N_CHROMA]> {
    let classes = bin_classes(spec);
    spec.magnitudes()
        .rows()
        .into_iter()
        .map(|row| {
            let mut acc = [0.0; N_CHROMA];
            for (m, class) in row.iter().zip(&classes) {
                if let Some(c) = class {
                    acc[*c] += m * m;
                }
            }
            acc
        })
        .collect()
}

pub fn chroma_mean(spec: &Spectrogram) -> Result<f64> {
    if spec.n_frames() == 0 {
        return Err(Error::NoFrames);
    }
    let total: f64 = chroma_energies(spec)
        .iter()
        .map(|acc| {
            let peak = acc.iter().copied().fold(0.0, f64::max);
            if peak > 0.0 {
                acc.iter().map(|e| e / peak).sum::<f64>() / N_CHROMA as f64
            } else {
                0.0
            }
        })
        .sum();
    Ok(total / spec.n_frames() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::AudioBuffer;
    use crate::dsp::{stft, StftConfig};
    use std::f64::consts::PI;

    fn tone(f: f64) -> Spectrogram {
        let sr = 22050;
        let x = (0..8192).map(|i| (2.0 * PI * f * i as f64 / sr as f64).sin()).collect();
        stft(&AudioBuffer::new(x, sr).unwrap(), &StftConfig::default()).unwrap()
    }

    #[test]
    fn octaves_share_a_class() {
        assert_eq!(pitch_class(440.0), Some(0));
        assert_eq!(pitch_class(880.0), Some(0));
        assert_eq!(pitch_class(220.0), Some(0));
        assert_eq!(pitch_class(466.16), Some(1));
        assert_eq!(pitch_class(415.30), Some(11));
        assert_eq!(pitch_class(0.0), None);
    }

    #[test]
    fn a440_tone_peaks_in_class_zero() {
        let spec = tone(440.0);
        // oracle: map each bin by hand and accumulate energy over all frames
        let mut acc = [0.0; 12];
        for row in spec.magnitudes().rows() {
            for (k, m) in row.iter().enumerate().skip(1) {
                let f = spec.bin_freqs()[k];
                let c = ((12.0 * (f / 440.0).log2()).round() as i64).rem_euclid(12) as usize;
                acc[c] += m * m;
            }
        }
        let argmax = (0..12).max_by(|a, b| acc[*a].total_cmp(&acc[*b])).unwrap();
        assert_eq!(argmax, 0);
        let ours: Vec<f64> = (0..12)
            .map(|c| chroma_energies(&spec).iter().map(|a| a[c]).sum())
            .collect();
        for (a, b) in ours.iter().zip(&acc) {
            assert!((a - b).abs() <= 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn silence_is_zero_and_bounded() {
        assert_eq!(chroma_mean(&tone(0.0)).unwrap(), 0.0);
        let c = chroma_mean(&tone(440.0)).unwrap();
        assert!(c > 1.0 / 12.0 - 1e-12 && c <= 1.0);
    }
}
