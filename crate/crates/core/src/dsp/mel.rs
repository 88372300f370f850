//! Short-time power spectra and the 40-band log-mel representation used by
//! the speaker encoder.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::frames::{frame_geometry, hann, raw_frames};
use super::Waveform;
use crate::error::Result;
use crate::tensor::Tensor;

pub const N_MELS: usize = 40;
/// Additive floor inside the log.
pub const LOG_FLOOR: f64 = 1e-10;
pub const DEFAULT_FRAME_MS: f64 = 25.0;
pub const DEFAULT_HOP_MS: f64 = 10.0;
const MEL_MAX_HZ: f64 = 8000.0;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters evenly spaced on the mel scale.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_bins: usize,
    bin_hz: f64,
    /// Per band: first bin index and weights for consecutive bins.
    bands: Vec<(usize, Vec<f64>)>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate_hz: u32) -> Self {
        let n_bins = n_fft / 2 + 1;
        let nyquist = f64::from(sample_rate_hz) / 2.0;
        let f_max = MEL_MAX_HZ.min(nyquist);
        let bin_hz = f64::from(sample_rate_hz) / n_fft as f64;
        let m_max = hz_to_mel(f_max);
        let points: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(m_max * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut bands = Vec::with_capacity(n_mels);
        for b in 0..n_mels {
            let (lo, mid, hi) = (points[b], points[b + 1], points[b + 2]);
            let first = (lo / bin_hz).floor() as usize;
            let last = ((hi / bin_hz).ceil() as usize).min(n_bins - 1);
            let weights = (first..=last)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect();
            bands.push((first, weights));
        }
        Self {
            n_bins,
            bin_hz,
            bands,
            centers_hz: points[1..=n_mels].to_vec(),
        }
    }

    pub fn n_mels(&self) -> usize {
        self.bands.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// Sum of each filter's weights.
    pub fn areas(&self) -> Vec<f64> {
        self.bands.iter().map(|(_, w)| w.iter().sum()).collect()
    }

    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for ((first, w), o) in self.bands.iter().zip(out.iter_mut()) {
            *o = w.iter().zip(&power[*first..]).map(|(a, p)| a * p).sum();
        }
    }
}

/// Framing, windowing, FFT and mel pooling for 16 kHz-style analysis.
pub struct SpectralAnalyzer {
    frame_len: usize,
    hop: usize,
    n_fft: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    filterbank: MelFilterbank,
}

impl SpectralAnalyzer {
    pub fn new(sample_rate_hz: u32, frame_ms: f64, hop_ms: f64) -> Self {
        let (frame_len, hop) = frame_geometry(sample_rate_hz, frame_ms, hop_ms);
        let n_fft = frame_len.next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Self {
            frame_len,
            hop,
            n_fft,
            window: hann(frame_len),
            fft,
            filterbank: MelFilterbank::new(N_MELS, n_fft, sample_rate_hz),
        }
    }

    pub fn for_waveform(w: &Waveform) -> Self {
        Self::new(w.sample_rate_hz(), DEFAULT_FRAME_MS, DEFAULT_HOP_MS)
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Power spectrum (`n_fft/2 + 1` bins) of one windowed frame.
    pub fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); self.n_fft];
        for ((b, s), h) in buf.iter_mut().zip(frame).zip(&self.window) {
            b.re = s * h;
        }
        self.fft.process(&mut buf);
        buf[..self.n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
    }

    /// `T × 40` matrix of `ln(band power + LOG_FLOOR)`.
    pub fn log_mel(&self, w: &Waveform) -> Result<Tensor> {
        let frames = raw_frames(w.samples(), self.frame_len, self.hop)?;
        let mut data = Vec::new();
        let mut bands = vec![0.0; N_MELS];
        for f in frames {
            let p = self.power_spectrum(f);
            self.filterbank.apply(&p, &mut bands);
            data.extend(bands.iter().map(|b| (b + LOG_FLOOR).ln()));
        }
        let t = data.len() / N_MELS;
        Tensor::from_vec(&[t, N_MELS], data)
    }
}

/// Log-mel energies, `T × 40`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub frames: Tensor,
    pub frame_ms: f64,
    pub hop_ms: f64,
}

impl MelSpectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }
}

pub fn mel_spectrogram(w: &Waveform) -> Result<MelSpectrogram> {
    let analyzer = SpectralAnalyzer::for_waveform(w);
    Ok(MelSpectrogram {
        frames: analyzer.log_mel(w)?,
        frame_ms: DEFAULT_FRAME_MS,
        hop_ms: DEFAULT_HOP_MS,
    })
}
