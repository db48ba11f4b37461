//! Synthetic rolling-noise corpus and additive-noise augmentation.
//!
//! Each sample is low-passed Gaussian noise plus a short harmonic series,
//! amplitude-modulated at the wheel rotation rate. Wet contact lowers the
//! noise cutoff and the level. The harmonic series sits at the rotation rate
//! times [`EVENTS_PER_REVOLUTION`], so its pitch follows the speed; harmonics
//! of the bare rotation rate (under 6 Hz) would be invisible to frame-level
//! features and leave the speed classes indistinguishable.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio_io::{write_wav, AudioBuffer, WavEncoding};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_COUNT};

/// Depth of the once-per-revolution amplitude modulation.
pub const MODULATION_DEPTH: f64 = 0.3;
/// Number of harmonics in the tonal series.
pub const N_HARMONICS: usize = 5;
/// Roughness events per wheel revolution; sets the tonal fundamental.
pub const EVENTS_PER_REVOLUTION: f64 = 200.0;
/// RMS of the tonal series relative to the noise component.
pub const TONAL_LEVEL: f64 = 0.5;
/// Level multiplier for dry contact.
pub const DRY_GAIN: f64 = 1.25;
/// Ratio of the nominal peak amplitude (`base_level`) to the carrier RMS.
pub const CREST_FACTOR: f64 = 3.0;

/// Default corpus sizes for dry_40, dry_60, wet_40, wet_60.
pub const DEFAULT_COUNTS: [usize; 4] = [52, 61, 51, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Friction {
    Dry,
    Wet,
}

impl fmt::Display for Friction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Friction::Dry => "dry",
            Friction::Wet => "wet",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub friction: Friction,
    pub speed_rpm: f64,
    pub duration_s: f64,
    /// Nominal peak amplitude for wet contact; the carrier (noise + tones)
    /// RMS before modulation is `base_level / CREST_FACTOR`.
    pub base_level: f64,
    pub noise_cutoff_hz: f64,
    pub jitter_pct: f64,
}

impl ConditionSpec {
    pub fn new(friction: Friction, speed_rpm: f64) -> Self {
        Self {
            friction,
            speed_rpm,
            duration_s: 30.0,
            base_level: 0.3,
            noise_cutoff_hz: match friction {
                Friction::Dry => 4000.0,
                Friction::Wet => 1200.0,
            },
            jitter_pct: 0.1,
        }
    }

    /// The four categories in label order.
    pub fn categories() -> [ConditionSpec; 4] {
        [
            Self::new(Friction::Dry, 40.0),
            Self::new(Friction::Dry, 60.0),
            Self::new(Friction::Wet, 40.0),
            Self::new(Friction::Wet, 60.0),
        ]
    }

    pub fn category(&self) -> String {
        format!("{}_{}", self.friction, self.speed_rpm)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        let ok = self.duration_s > 0.0
            && self.duration_s.is_finite()
            && self.speed_rpm > 0.0
            && self.speed_rpm.is_finite()
            && self.base_level > 0.0
            && self.base_level.is_finite()
            && (0.0..0.5).contains(&self.jitter_pct)
            && self.noise_cutoff_hz > 0.0
            && self.noise_cutoff_hz * (1.0 + self.jitter_pct) < nyquist
            && self.speed_rpm / 60.0 * EVENTS_PER_REVOLUTION * N_HARMONICS as f64 * (1.0 + self.jitter_pct) < nyquist;
        if sample_rate == 0 || !ok {
            return Err(Error::BadSpec(format!("{self:?} at {sample_rate} Hz")));
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

/// Derives an independent seed from a root seed and a tag.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// `y = x + scale * n` with `n` i.i.d. standard normal from `seed`. No clipping.
pub fn add_noise(buf: &AudioBuffer, scale: f64, seed: u64) -> Result<AudioBuffer> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::BadScale(scale));
    }
    if scale == 0.0 {
        return Ok(buf.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = buf.samples().iter().map(|x| x + scale * normal(&mut rng)).collect();
    AudioBuffer::new(samples, buf.sample_rate())
}

pub fn synth_sample(spec: &ConditionSpec, sample_rate: u32, seed: u64) -> Result<AudioBuffer> {
    spec.validate(sample_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = spec.jitter_pct;
    let jitter = |rng: &mut ChaCha8Rng| if j > 0.0 { 1.0 + rng.random_range(-j..j) } else { 1.0 };

    let sr = sample_rate as f64;
    let f_rot = spec.speed_rpm / 60.0 * jitter(&mut rng);
    let cutoff = spec.noise_cutoff_hz * jitter(&mut rng);
    let gain = if spec.friction == Friction::Dry { DRY_GAIN } else { 1.0 };
    let level = spec.base_level / CREST_FACTOR * gain * jitter(&mut rng);
    let tonal = TONAL_LEVEL * jitter(&mut rng);
    let f0 = f_rot * EVENTS_PER_REVOLUTION;
    let am_phase = rng.random_range(0.0..2.0 * PI);
    let phases: Vec<f64> = (0..N_HARMONICS).map(|_| rng.random_range(0.0..2.0 * PI)).collect();

    // harmonic k gets amplitude ∝ 1/k, scaled so the series has RMS `tonal`
    let norm: f64 = (1..=N_HARMONICS).map(|k| 1.0 / (k * k) as f64).sum::<f64>().sqrt();
    let amps: Vec<f64> = (1..=N_HARMONICS)
        .map(|k| tonal * 2f64.sqrt() / (k as f64 * norm))
        .collect();
    let carrier_rms = (1.0 + tonal * tonal).sqrt();

    // first-order low-pass y += a (x - y); stationary std for unit input is sqrt(a / (2 - a))
    let a = 1.0 - (-2.0 * PI * cutoff / sr).exp();
    let lp_std = (a / (2.0 - a)).sqrt();
    let mut y = lp_std * normal(&mut rng);

    let n = (spec.duration_s * sr).round() as usize;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sr;
        y += a * (normal(&mut rng) - y);
        let tones: f64 = amps
            .iter()
            .zip(&phases)
            .enumerate()
            .map(|(k, (amp, ph))| amp * (2.0 * PI * (k + 1) as f64 * f0 * t + ph).sin())
            .sum();
        let carrier = (y / lp_std + tones) / carrier_rms;
        let envelope = 1.0 + MODULATION_DEPTH * (2.0 * PI * f_rot * t + am_phase).sin();
        out.push(level * envelope * carrier);
    }
    AudioBuffer::new(out, sample_rate)
}

/// Class pairs whose centroids are within three mean within-class standard
/// deviations of each other along every coordinate. Empty means separable.
pub fn separation_failures(by_class: &[Vec<FeatureVector>]) -> Vec<(usize, usize)> {
    let stats: Vec<(Vec<f64>, Vec<f64>)> = by_class
        .iter()
        .map(|rows| {
            let n = rows.len() as f64;
            let mean: Vec<f64> = (0..FEATURE_COUNT)
                .map(|j| rows.iter().map(|r| r.values[j]).sum::<f64>() / n)
                .collect();
            let std = (0..FEATURE_COUNT)
                .map(|j| (rows.iter().map(|r| (r.values[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
                .collect();
            (mean, std)
        })
        .collect();
    let k = stats.len() as f64;
    let within: Vec<f64> = (0..FEATURE_COUNT)
        .map(|j| stats.iter().map(|s| s.1[j]).sum::<f64>() / k)
        .collect();
    let mut failing = Vec::new();
    for a in 0..stats.len() {
        for b in a + 1..stats.len() {
            let ok = (0..FEATURE_COUNT).any(|j| (stats[a].0[j] - stats[b].0[j]).abs() > 3.0 * within[j]);
            if !ok {
                failing.push((a, b));
            }
        }
    }
    failing
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub category: String,
}

/// Writes `counts[i]` 16-bit WAVs for the i-th category into
/// `root/<category>/` plus `root/manifest.csv`. Returns the manifest sorted
/// by path.
pub fn synth_corpus(
    root: impl AsRef<Path>,
    counts: &[usize; 4],
    sample_rate: u32,
    seed: u64,
) -> Result<Vec<ManifestEntry>> {
    let root = root.as_ref();
    let mut manifest = Vec::new();
    for (spec, &count) in ConditionSpec::categories().iter().zip(counts) {
        if count == 0 {
            continue;
        }
        let category = spec.category();
        let dir = root.join(&category);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for i in 0..count {
            let name = format!("{category}_{i:04}.wav");
            let buf = synth_sample(spec, sample_rate, derive_seed(seed, &format!("{category}/{name}")))?;
            let path = dir.join(name);
            write_wav(&path, &[buf], WavEncoding::Pcm16)?;
            manifest.push(ManifestEntry {
                path,
                category: category.clone(),
            });
        }
    }
    manifest.sort_by(|a, b| a.path.cmp(&b.path));
    if !manifest.is_empty() {
        write_manifest(root, &manifest)?;
    }
    Ok(manifest)
}

fn write_manifest(root: &Path, manifest: &[ManifestEntry]) -> Result<()> {
    let path = root.join("manifest.csv");
    let io_err = |e: std::io::Error| Error::io(&path, e);
    let mut out = fs::File::create(&path).map_err(io_err)?;
    writeln!(out, "path,category").map_err(io_err)?;
    for e in manifest {
        let rel = e.path.strip_prefix(root).unwrap_or(&e.path);
        writeln!(out, "{},{}", rel.display(), e.category).map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::read_wav;
    use crate::dataset::{ingest_corpus, ExtractionConfig};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    const SR: u32 = 22050;

    fn short(friction: Friction, rpm: f64) -> ConditionSpec {
        ConditionSpec {
            duration_s: 3.0,
            ..ConditionSpec::new(friction, rpm)
        }
    }

    fn features(buf: &AudioBuffer) -> FeatureVector {
        ExtractionConfig::default().extractor().unwrap().extract(buf).unwrap()
    }

    #[test]
    fn thirty_seconds_is_661500_samples() {
        let buf = synth_sample(&ConditionSpec::new(Friction::Wet, 40.0), SR, 1).unwrap();
        assert_eq!(buf.len(), 661_500);
        assert_eq!(buf.sample_rate(), SR);
    }

    #[test]
    fn dry_is_brighter_and_louder_than_wet() {
        for seed in 0..4 {
            let dry = features(&synth_sample(&short(Friction::Dry, 60.0), SR, seed).unwrap());
            let wet = features(&synth_sample(&short(Friction::Wet, 60.0), SR, seed).unwrap());
            assert!(dry.centroid() > wet.centroid(), "seed {seed}");
            assert!(dry.rms() > wet.rms(), "seed {seed}");
        }
    }

    #[test]
    fn sample_is_deterministic_per_seed() {
        let spec = short(Friction::Dry, 40.0);
        let a = synth_sample(&spec, SR, 9).unwrap();
        assert_eq!(a, synth_sample(&spec, SR, 9).unwrap());
        assert_ne!(a, synth_sample(&spec, SR, 10).unwrap());
    }

    #[test]
    fn carrier_level_matches_base_level() {
        let spec = ConditionSpec {
            jitter_pct: 0.0,
            ..short(Friction::Wet, 60.0)
        };
        let buf = synth_sample(&spec, SR, 3).unwrap();
        let rms = (buf.samples().iter().map(|x| x * x).sum::<f64>() / buf.len() as f64).sqrt();
        // modulation raises the mean power by depth^2 / 2
        let expected = 0.3 / CREST_FACTOR * (1.0 + MODULATION_DEPTH * MODULATION_DEPTH / 2.0).sqrt();
        assert!((rms - expected).abs() / expected < 0.05, "rms {rms}");
    }

    #[test]
    fn invalid_specs() {
        let good = ConditionSpec::new(Friction::Dry, 60.0);
        for bad in [
            ConditionSpec {
                duration_s: 0.0,
                ..good
            },
            ConditionSpec {
                noise_cutoff_hz: 12000.0,
                ..good
            },
            ConditionSpec {
                noise_cutoff_hz: -1.0,
                ..good
            },
            ConditionSpec {
                jitter_pct: 0.5,
                ..good
            },
            ConditionSpec { speed_rpm: 0.0, ..good },
        ] {
            assert!(matches!(synth_sample(&bad, SR, 0), Err(Error::BadSpec(_))), "{bad:?}");
        }
    }

    #[test]
    fn add_noise_scale_zero_is_identity() {
        let buf = synth_sample(&short(Friction::Wet, 40.0), SR, 2).unwrap();
        assert_eq!(add_noise(&buf, 0.0, 5).unwrap(), buf);
        assert!(matches!(add_noise(&buf, -0.1, 5), Err(Error::BadScale(_))));
    }

    #[test]
    fn add_noise_std_matches_scale() {
        let zeros = AudioBuffer::new(vec![0.0; 1_000_000], SR).unwrap();
        let y = add_noise(&zeros, 0.5, 42).unwrap();
        let n = y.len() as f64;
        let mean = y.samples().iter().sum::<f64>() / n;
        let std = (y.samples().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 0.5).abs() / 0.5 < 0.01, "std {std}");
        assert_eq!(y, add_noise(&zeros, 0.5, 42).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn add_noise_is_linear(xs in proptest::collection::vec(-1.0f64..1.0, 1..200), scale in 0.0f64..2.0, seed: u64) {
            let x = AudioBuffer::new(xs.clone(), SR).unwrap();
            let zero = AudioBuffer::new(vec![0.0; xs.len()], SR).unwrap();
            let y = add_noise(&x, scale, seed).unwrap();
            let n = add_noise(&zero, scale, seed).unwrap();
            for ((yi, xi), ni) in y.samples().iter().zip(&xs).zip(n.samples()) {
                prop_assert!((yi - xi - ni).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
        assert_eq!(derive_seed(3, "x"), derive_seed(3, "x"));
    }

    #[test]
    fn zero_counts_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("corpus");
        assert!(synth_corpus(&root, &[0; 4], SR, 1).unwrap().is_empty());
        assert!(!root.exists());
    }

    #[test]
    fn small_corpus_layout_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let ma = synth_corpus(&a, &[2, 1, 0, 3], 11025, 4).unwrap();
        let mb = synth_corpus(&b, &[2, 1, 0, 3], 11025, 4).unwrap();
        assert_eq!(ma.len(), 6);
        assert!(ma.windows(2).all(|w| w[0].path < w[1].path));
        assert!(!a.join("wet_40").exists());
        for (x, y) in ma.iter().zip(&mb) {
            assert_eq!(fs::read(&x.path).unwrap(), fs::read(&y.path).unwrap());
        }
        let (info, chans) = read_wav(&ma[0].path).unwrap();
        assert_eq!((info.bits_per_sample, info.sample_rate, chans.len()), (16, 11025, 1));
        let manifest = fs::read_to_string(a.join("manifest.csv")).unwrap();
        assert_eq!(manifest.lines().count(), 7);
        assert!(manifest.contains("dry_40/dry_40_0000.wav,dry_40"));
    }

    #[test]
    fn corpus_ingests_with_all_categories() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExtractionConfig {
            segment_seconds: 30.0,
            ..ExtractionConfig::default()
        };
        // 30 s files: one row each
        let root = dir.path();
        synth_corpus(root, &[1, 1, 1, 2], SR, 8).unwrap();
        let ds = ingest_corpus(root, &cfg).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.label_map, vec!["dry_40", "dry_60", "wet_40", "wet_60"]);
        assert_eq!(ds.class_counts(), vec![1, 1, 1, 2]);
        assert!(ds.rows.iter().all(|r| r.features.values.len() == FEATURE_COUNT));
    }

    #[test]
    fn classes_are_separable() {
        let per_class = 6;
        let mut by_class: Vec<Vec<FeatureVector>> = Vec::new();
        for spec in ConditionSpec::categories() {
            let spec = ConditionSpec {
                duration_s: 5.0,
                ..spec
            };
            by_class.push(
                (0..per_class)
                    .map(|i| {
                        features(&synth_sample(&spec, SR, derive_seed(5, &format!("{}{i}", spec.category()))).unwrap())
                    })
                    .collect(),
            );
        }
        assert!(
            separation_failures(&by_class).is_empty(),
            "{:?}",
            separation_failures(&by_class)
        );
    }
}
