//! WAV decoding/encoding and the buffer-level plumbing that sits between a
//! recording on disk and the feature extractor: down-mixing, resampling and
//! cutting fixed-length analysis segments.
//!
//! Only little-endian RIFF/WAVE with uncompressed PCM (16/24/32-bit) or
//! 32-bit IEEE float payloads is understood. Integer PCM is mapped to floats by
//! dividing by `2^(bits-1)`, so decoding followed by re-encoding at the same
//! depth is lossless.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Analysis sample rate used when none is given.
pub const DEFAULT_SAMPLE_RATE: u32 = 22_050;

/// Length of one training sample in seconds.
pub const DEFAULT_SEGMENT_SECONDS: f64 = 30.0;

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_IEEE_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Mono (or single-channel) float samples at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::BadRate(sample_rate));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::BadConfig(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Int,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub channels: u16,
    pub bits_per_sample: u16,
    pub sample_rate: u32,
    pub frame_count: usize,
    pub format: SampleFormat,
}

/// Output sample encodings supported by [`encode_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Pcm24,
    Pcm32,
    Float32,
}

impl WavEncoding {
    fn bits(self) -> u16 {
        match self {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Pcm24 => 24,
            WavEncoding::Pcm32 | WavEncoding::Float32 => 32,
        }
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<(WavInfo, Vec<AudioBuffer>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

/// Convenience: read, down-mix to mono and resample to `target_rate`.
pub fn load_mono(path: impl AsRef<Path>, target_rate: u32) -> Result<AudioBuffer> {
    let (_, channels) = read_wav(path)?;
    let mono = to_mono(&channels)?;
    resample_linear(&mono, target_rate)
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

pub fn decode_wav(bytes: &[u8]) -> Result<(WavInfo, Vec<AudioBuffer>)> {
    if bytes.len() < 12 {
        return Err(Error::MalformedWav("file shorter than RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::MalformedWav(format!(
            "bad magic {:?}, expected \"RIFF\"",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedWav("RIFF form type is not WAVE".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .ok_or_else(|| Error::MalformedWav("chunk size overflow".into()))?;
        match id {
            b"fmt " => {
                if size < 16 || body_end > bytes.len() {
                    return Err(Error::MalformedWav("truncated fmt chunk".into()));
                }
                let b = &bytes[body_start..body_end];
                let mut tag = le_u16(&b[0..2]);
                let channels = le_u16(&b[2..4]);
                let rate = le_u32(&b[4..8]);
                let block_align = le_u16(&b[12..14]);
                let bits = le_u16(&b[14..16]);
                if tag == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(Error::MalformedWav("truncated WAVE_FORMAT_EXTENSIBLE".into()));
                    }
                    tag = le_u16(&b[24..26]);
                }
                fmt = Some((tag, channels, rate, block_align, bits));
            }
            b"data" => {
                // Some writers leave the data size unset when streaming; clamp to the file.
                let end = body_end.min(bytes.len());
                data = Some(&bytes[body_start..end]);
            }
            _ => {}
        }
        pos = body_end + (size & 1);
    }

    let (tag, channels, sample_rate, block_align, bits) =
        fmt.ok_or_else(|| Error::MalformedWav("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::MalformedWav("missing data chunk".into()))?;

    let format = match (tag, bits) {
        (FORMAT_PCM, 16 | 24 | 32) => SampleFormat::Int,
        (FORMAT_IEEE_FLOAT, 32) => SampleFormat::Float,
        (FORMAT_PCM | FORMAT_IEEE_FLOAT, b) => return Err(Error::UnsupportedEncoding(format!("{b}-bit samples"))),
        (t, _) => return Err(Error::UnsupportedEncoding(format!("format tag {t:#06x}"))),
    };
    if channels == 0 {
        return Err(Error::MalformedWav("zero channels".into()));
    }
    if sample_rate == 0 {
        return Err(Error::MalformedWav("zero sample rate".into()));
    }
    let width = (bits / 8) as usize;
    let frame_bytes = width * channels as usize;
    if block_align as usize != frame_bytes {
        return Err(Error::MalformedWav(format!(
            "block align {block_align} inconsistent with {channels} x {bits}-bit"
        )));
    }

    let frame_count = data.len() / frame_bytes;
    let scale = 1.0 / (1u64 << (bits - 1)) as f64;
    let mut out = vec![Vec::with_capacity(frame_count); channels as usize];
    for frame in data.chunks_exact(frame_bytes) {
        for (ch, s) in frame.chunks_exact(width).enumerate() {
            let v = match (format, bits) {
                (SampleFormat::Float, _) => f32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64,
                (_, 16) => i16::from_le_bytes([s[0], s[1]]) as f64 * scale,
                (_, 24) => {
                    let raw = i32::from_le_bytes([0, s[0], s[1], s[2]]) >> 8;
                    raw as f64 * scale
                }
                _ => i32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64 * scale,
            };
            if !v.is_finite() {
                return Err(Error::MalformedWav("non-finite float sample".into()));
            }
            out[ch].push(v);
        }
    }

    let info = WavInfo {
        channels,
        bits_per_sample: bits,
        sample_rate,
        frame_count,
        format,
    };
    let buffers = out
        .into_iter()
        .map(|samples| AudioBuffer { samples, sample_rate })
        .collect();
    Ok((info, buffers))
}

/// Encodes channel buffers as an interleaved little-endian WAV.
///
/// Integer encodings round to the nearest step and saturate at full scale;
/// `Float32` stores values unclipped.
pub fn encode_wav(channels: &[AudioBuffer], encoding: WavEncoding) -> Result<Vec<u8>> {
    let first = channels.first().ok_or(Error::EmptyInput("no channels to encode"))?;
    let rate = first.sample_rate;
    let frames = first.len();
    for ch in channels {
        if ch.len() != frames {
            return Err(Error::LengthMismatch {
                expected: frames,
                actual: ch.len(),
            });
        }
        if ch.sample_rate != rate {
            return Err(Error::BadRate(ch.sample_rate));
        }
    }

    let n_ch = channels.len() as u16;
    let bits = encoding.bits();
    let width = (bits / 8) as usize;
    let block_align = n_ch * (bits / 8);
    let data_len = frames * block_align as usize;
    let tag = match encoding {
        WavEncoding::Float32 => FORMAT_IEEE_FLOAT,
        _ => FORMAT_PCM,
    };

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&n_ch.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    let full_scale = (1u64 << (bits - 1)) as f64;
    let quantize = |v: f64| -> i64 { (v * full_scale).round().clamp(-full_scale, full_scale - 1.0) as i64 };
    for i in 0..frames {
        for ch in channels {
            let v = ch.samples[i];
            match encoding {
                WavEncoding::Pcm16 => out.extend_from_slice(&(quantize(v) as i16).to_le_bytes()),
                WavEncoding::Pcm24 => out.extend_from_slice(&(quantize(v) as i32).to_le_bytes()[..3]),
                WavEncoding::Pcm32 => out.extend_from_slice(&(quantize(v) as i32).to_le_bytes()),
                WavEncoding::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
    }
    debug_assert_eq!(out.len(), 44 + frames * n_ch as usize * width);
    Ok(out)
}

pub fn write_wav(path: impl AsRef<Path>, channels: &[AudioBuffer], encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_wav(channels, encoding)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Sample-wise mean across channels.
pub fn to_mono(channels: &[AudioBuffer]) -> Result<AudioBuffer> {
    let first = channels.first().ok_or(Error::EmptyInput("no channels to down-mix"))?;
    if channels.len() == 1 {
        return Ok(first.clone());
    }
    for ch in &channels[1..] {
        if ch.len() != first.len() {
            return Err(Error::LengthMismatch {
                expected: first.len(),
                actual: ch.len(),
            });
        }
        if ch.sample_rate != first.sample_rate {
            return Err(Error::BadRate(ch.sample_rate));
        }
    }
    let n = channels.len() as f64;
    let samples = (0..first.len())
        .map(|i| channels.iter().map(|c| c.samples[i]).sum::<f64>() / n)
        .collect();
    Ok(AudioBuffer {
        samples,
        sample_rate: first.sample_rate,
    })
}

/// Linear-interpolation resampler. No anti-aliasing filter is applied.
pub fn resample_linear(buf: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::BadRate(target_rate));
    }
    let source_rate = buf.sample_rate;
    if source_rate == target_rate {
        return Ok(buf.clone());
    }
    let src = buf.samples();
    let (s, t) = (source_rate as u64, target_rate as u64);
    let out_len = (src.len() as u64 * t / s) as usize;
    let samples = (0..out_len as u64)
        .map(|j| {
            // Exact rational position j * s / t split into integer index and fraction.
            let num = j * s;
            let i = (num / t) as usize;
            let frac = (num % t) as f64 / t as f64;
            let a = src[i];
            match src.get(i + 1) {
                Some(&b) if frac > 0.0 => a + (b - a) * frac,
                _ => a,
            }
        })
        .collect();
    Ok(AudioBuffer {
        samples,
        sample_rate: target_rate,
    })
}

/// Cuts consecutive non-overlapping windows of `floor(seconds * rate)` samples.
/// A trailing partial window is dropped.
pub fn segment(buf: &AudioBuffer, seconds: f64) -> Result<Vec<AudioBuffer>> {
    if seconds.is_nan() || seconds <= 0.0 || !seconds.is_finite() {
        return Err(Error::BadDuration(seconds));
    }
    let window = (seconds * buf.sample_rate as f64).floor() as usize;
    if window == 0 {
        return Err(Error::BadDuration(seconds));
    }
    Ok(buf
        .samples
        .chunks_exact(window)
        .map(|chunk| AudioBuffer {
            samples: chunk.to_vec(),
            sample_rate: buf.sample_rate,
        })
        .collect())
}
