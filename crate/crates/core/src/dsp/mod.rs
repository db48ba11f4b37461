//! Short-time spectral analysis.

pub mod fft;
pub mod stft;

pub use fft::{Fft, RealFft};
pub use stft::{bin_frequencies, frame_signal, hann, stft, Spectrogram, StftConfig, WindowKind};
