//! Frame-wise spectral shape descriptors, each summarized by its mean over
//! frames. Centroid and bandwidth weight bins by magnitude; rolloff uses
//! squared magnitude as energy. Frames with no energy contribute 0.

use ndarray::ArrayView1;

use crate::dsp::Spectrogram;
use crate::error::{Error, Result};

fn frame_mean(spec: &Spectrogram, per_frame: impl Fn(ArrayView1<f64>) -> f64) -> Result<f64> {
    if spec.n_frames() == 0 {
        return Err(Error::NoFrames);
    }
    let total: f64 = spec.magnitudes().rows().into_iter().map(per_frame).sum();
    Ok(total / spec.n_frames() as f64)
}

fn centroid(row: ArrayView1<f64>, freqs: &[f64]) -> Option<f64> {
    let weight: f64 = row.sum();
    if weight <= 0.0 {
        return None;
    }
    let moment: f64 = row.iter().zip(freqs).map(|(s, f)| s * f).sum();
    Some(moment / weight)
}

pub fn spectral_centroid_mean(spec: &Spectrogram) -> Result<f64> {
    let freqs = spec.bin_freqs();
    frame_mean(spec, |row| centroid(row, freqs).unwrap_or(0.0))
}

/// `(Σ S_k |f_k - centroid|^p / Σ S_k)^(1/p)` per frame.
pub fn spectral_bandwidth_mean(spec: &Spectrogram, order: u32) -> Result<f64> {
    if order == 0 {
        return Err(Error::BadOrder(order));
    }
    let freqs = spec.bin_freqs();
    let p = order as f64;
    frame_mean(spec, |row| {
        let Some(c) = centroid(row, freqs) else {
            return 0.0;
        };
        let weight: f64 = row.sum();
        let moment: f64 = row
            .iter()
            .zip(freqs)
            .map(|(s, f)| s * (f - c).abs().powi(order as i32))
            .sum();
        (moment / weight).powf(1.0 / p)
    })
}

/// Lowest bin frequency at which cumulative energy reaches `pct` of the
/// frame total.
pub fn spectral_rolloff_mean(spec: &Spectrogram, pct: f64) -> Result<f64> {
    if !(pct > 0.0 && pct <= 1.0) {
        return Err(Error::BadPct(pct));
    }
    let freqs = spec.bin_freqs();
    frame_mean(spec, |row| {
        let total: f64 = row.iter().map(|s| s * s).sum();
        if total <= 0.0 {
            return 0.0;
        }
        let threshold = pct * total;
        let mut cumulative = 0.0;
        for (s, f) in row.iter().zip(freqs) {
            cumulative += s * s;
            if cumulative >= threshold {
                return *f;
            }
        }
        // rounding left the running sum a hair short of `total`
        let last = row.iter().rposition(|s| *s > 0.0).unwrap_or(0);
        freqs[last]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{StftConfig, WindowKind};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SR: u32 = 8000;

    fn cfg() -> StftConfig {
        StftConfig {
            frame_len: 16,
            hop: 8,
            window: WindowKind::Hann,
        }
    }

    fn spec_from_rows(rows: &[Vec<f64>]) -> Spectrogram {
        let n = rows[0].len();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Spectrogram::from_magnitudes(Array2::from_shape_vec((rows.len(), n), flat).unwrap(), SR, cfg()).unwrap()
    }

    fn single_bin(k: usize, mag: f64) -> Spectrogram {
        let mut row = vec![0.0; 9];
        row[k] = mag;
        spec_from_rows(&[row])
    }

    #[test]
    fn single_bin_cases_are_exact() {
        for k in 0..9 {
            let s = single_bin(k, 3.0);
            let f = s.bin_freqs()[k];
            assert_eq!(spectral_centroid_mean(&s).unwrap(), f);
            assert_eq!(spectral_bandwidth_mean(&s, 2).unwrap(), 0.0);
            for pct in [0.1, 0.5, 0.85, 1.0] {
                assert_eq!(spectral_rolloff_mean(&s, pct).unwrap(), f);
            }
        }
    }

    #[test]
    fn flat_spectrum() {
        let s = spec_from_rows(&[vec![1.0; 9]]);
        let mean_freq = s.bin_freqs().iter().sum::<f64>() / 9.0;
        assert!((spectral_centroid_mean(&s).unwrap() - mean_freq).abs() < 1e-9);
        let expect = s.bin_freqs()[(0.85f64 * 9.0).ceil() as usize - 1];
        assert_eq!(spectral_rolloff_mean(&s, 0.85).unwrap(), expect);
    }

    #[test]
    fn symmetric_pair_bandwidth_is_offset() {
        let mut row = vec![0.0; 9];
        row[2] = 1.0;
        row[6] = 1.0;
        let s = spec_from_rows(&[row]);
        let delta = s.bin_freqs()[4] - s.bin_freqs()[2];
        assert!((spectral_bandwidth_mean(&s, 2).unwrap() - delta).abs() < 1e-9);
        assert!((spectral_bandwidth_mean(&s, 3).unwrap() - delta).abs() < 1e-9);
    }

    #[test]
    fn full_rolloff_is_highest_nonzero_bin() {
        let s = spec_from_rows(&[vec![0.3, 0.0, 1.0, 0.2, 1e-3, 0.0, 0.0, 0.0, 0.0]]);
        assert_eq!(spectral_rolloff_mean(&s, 1.0).unwrap(), s.bin_freqs()[4]);
    }

    #[test]
    fn silent_frames_contribute_zero() {
        let s = spec_from_rows(&[vec![0.0; 9], vec![0.0; 9]]);
        assert_eq!(spectral_centroid_mean(&s).unwrap(), 0.0);
        assert_eq!(spectral_bandwidth_mean(&s, 2).unwrap(), 0.0);
        assert_eq!(spectral_rolloff_mean(&s, 0.85).unwrap(), 0.0);

        let mut loud = vec![0.0; 9];
        loud[4] = 1.0;
        let mixed = spec_from_rows(&[loud, vec![0.0; 9]]);
        assert_eq!(spectral_centroid_mean(&mixed).unwrap(), mixed.bin_freqs()[4] / 2.0);
    }

    #[test]
    fn white_noise_bandwidth_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..9).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let s = spec_from_rows(&rows);
        let freqs: Vec<f64> = (0..9).map(|k| k as f64 * SR as f64 / 16.0).collect();
        for p in [1u32, 2, 3] {
            let mut acc = 0.0;
            for row in &rows {
                let w: f64 = row.iter().sum();
                let c = row.iter().zip(&freqs).map(|(a, f)| a * f).sum::<f64>() / w;
                let m = row
                    .iter()
                    .zip(&freqs)
                    .map(|(a, f)| a * (f - c).abs().powf(p as f64))
                    .sum::<f64>()
                    / w;
                acc += m.powf(1.0 / p as f64);
            }
            acc /= rows.len() as f64;
            let got = spectral_bandwidth_mean(&s, p).unwrap();
            assert!((got - acc).abs() / acc < 1e-9, "p={p}");
        }
    }

    #[test]
    fn argument_errors() {
        let s = single_bin(1, 1.0);
        assert!(matches!(spectral_bandwidth_mean(&s, 0), Err(Error::BadOrder(0))));
        assert!(matches!(spectral_rolloff_mean(&s, 0.0), Err(Error::BadPct(_))));
        assert!(matches!(spectral_rolloff_mean(&s, 1.5), Err(Error::BadPct(_))));
        let empty = Spectrogram::from_magnitudes(Array2::zeros((0, 9)), SR, cfg()).unwrap();
        assert!(matches!(spectral_centroid_mean(&empty), Err(Error::NoFrames)));
    }
}
