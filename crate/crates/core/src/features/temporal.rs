//! Time-domain features computed directly on raw (unwindowed) frames.

use crate::error::{Error, Result};

/// Mean over frames of the fraction of sign changes per frame.
///
/// Zero counts as non-negative. Each frame's count is divided by the frame
/// length, not by the number of sample pairs.
pub fn zcr_mean(frames: &[&[f64]]) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::NoFrames);
    }
    let total: f64 = frames
        .iter()
        .map(|frame| {
            let flips = frame.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
            flips as f64 / frame.len() as f64
        })
        .sum();
    Ok(total / frames.len() as f64)
}

/// Mean over frames of `sqrt(mean(x²))`.
pub fn rms_mean(frames: &[&[f64]]) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::NoFrames);
    }
    let total: f64 = frames
        .iter()
        .map(|frame| (frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64).sqrt())
        .sum();
    Ok(total / frames.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{frame_signal, StftConfig};
    use std::f64::consts::PI;

    fn sine(f: f64, sr: f64, n: usize, a: f64) -> Vec<f64> {
        (0..n).map(|i| a * (2.0 * PI * f * i as f64 / sr).sin()).collect()
    }

    #[test]
    fn constant_has_no_crossings() {
        let x = vec![1.0; 64];
        assert_eq!(zcr_mean(&[&x]).unwrap(), 0.0);
        let zeros = vec![0.0; 64];
        assert_eq!(zcr_mean(&[&zeros]).unwrap(), 0.0);
    }

    #[test]
    fn alternating_signal_flips_every_pair() {
        let n = 10;
        let x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((zcr_mean(&[&x]).unwrap() - (n - 1) as f64 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn sine_zcr_matches_sign_flip_count() {
        let sr = 22050.0;
        let x = sine(500.0, sr, 22050, 1.0);
        let cfg = StftConfig::default();
        let frames = frame_signal(&x, &cfg);
        // independent count over the same frames
        let mut oracle = 0.0;
        for f in &frames {
            let mut c = 0usize;
            for i in 1..f.len() {
                if f[i - 1].is_sign_negative() != f[i].is_sign_negative() && f[i - 1] != 0.0 && f[i] != 0.0 {
                    c += 1;
                }
            }
            oracle += c as f64 / f.len() as f64;
        }
        oracle /= frames.len() as f64;
        let z = zcr_mean(&frames).unwrap();
        assert!((z - oracle).abs() < 1e-3);
        assert!((z - 2.0 * 500.0 / sr).abs() / (2.0 * 500.0 / sr) < 0.05);
    }

    #[test]
    fn rms_closed_forms() {
        let zeros = vec![0.0; 32];
        assert_eq!(rms_mean(&[&zeros]).unwrap(), 0.0);
        let c = vec![-0.3; 32];
        assert!((rms_mean(&[&c, &c]).unwrap() - 0.3).abs() < 1e-15);
        let x = sine(441.0, 22050.0, 22050, 1.0);
        let frames = frame_signal(&x, &StftConfig::default());
        let r = rms_mean(&frames).unwrap();
        assert!((r - 0.5f64.sqrt()).abs() / 0.5f64.sqrt() < 0.01);
    }

    #[test]
    fn no_frames_is_an_error() {
        assert!(matches!(zcr_mean(&[]), Err(Error::NoFrames)));
        assert!(matches!(rms_mean(&[]), Err(Error::NoFrames)));
    }
}
