//! Acoustic feature extraction and resynthesis.
//!
//! Three feature streams are derived from a [`Waveform`]: 40-band log-mel
//! frames for the speaker encoder, 24-dimensional mel-cepstra for spectrum
//! conversion, and a 10-scale wavelet decomposition of log-F0 for prosody
//! conversion. [`synthesize`] maps mel-cepstra and F0 back to audio.

pub mod cache;
pub mod cwt;
pub mod frames;
pub mod mcep;
pub mod mel;
pub mod pitch;
pub mod synth;
pub mod waveform;

pub use cwt::{cwt_decompose, cwt_reconstruct, LogF0Cwt, N_SCALES};
pub use frames::frame_signal;
pub use mcep::{mcep_analyze, McepSequence, N_MCEP};
pub use mel::{mel_spectrogram, MelSpectrogram, LOG_FLOOR, N_MELS};
pub use pitch::{estimate_f0, estimate_f0_with, F0Config, F0Contour};
pub use synth::synthesize;
pub use waveform::{Waveform, DEFAULT_SAMPLE_RATE};
