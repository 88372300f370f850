use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono audio with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidWaveform("no samples".into()));
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidWaveform("sample rate must be positive".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::InvalidWaveform(format!("sample {bad} outside [-1, 1]")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Clamps to `[-1, 1]` and replaces non-finite values with zero.
    pub fn from_unchecked(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        let samples = samples
            .into_iter()
            .map(|s| if s.is_finite() { s.clamp(-1.0, 1.0) } else { 0.0 })
            .collect();
        Self::new(samples, sample_rate_hz)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Multiplies every sample by `gain`, clamping to the valid range.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|s| (s * gain).clamp(-1.0, 1.0))
                .collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Linear-interpolation resampling.
    pub fn resample(&self, target_hz: u32) -> Self {
        if target_hz == self.sample_rate_hz {
            return self.clone();
        }
        let ratio = f64::from(self.sample_rate_hz) / f64::from(target_hz);
        let out_len = ((self.samples.len() as f64) / ratio).round().max(1.0) as usize;
        let last = self.samples.len() - 1;
        let samples = (0..out_len)
            .map(|i| {
                let pos = i as f64 * ratio;
                let j = pos.floor() as usize;
                if j >= last {
                    self.samples[last]
                } else {
                    let frac = pos - j as f64;
                    self.samples[j] * (1.0 - frac) + self.samples[j + 1] * frac
                }
            })
            .collect();
        Self {
            samples,
            sample_rate_hz: target_hz,
        }
    }

    /// Reads a mono 16-bit PCM WAV and resamples it to 16 kHz.
    pub fn read_wav(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingAudio(path.to_path_buf()));
        }
        let mut reader = hound::WavReader::open(path)?;
        let spec = reader.spec();
        if spec.channels != 1 {
            return Err(Error::InvalidWaveform(format!(
                "expected mono audio, found {} channels",
                spec.channels
            )));
        }
        if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
            return Err(Error::InvalidWaveform(
                "expected 16-bit integer PCM".into(),
            ));
        }
        let samples = reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self::new(samples, spec.sample_rate)?.resample(DEFAULT_SAMPLE_RATE))
    }

    /// Writes 16-bit mono PCM.
    pub fn write_wav(&self, path: &Path) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate_hz,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(path, spec)?;
        for &s in &self.samples {
            writer.write_sample(quantize_i16(s))?;
        }
        writer.finalize()?;
        Ok(())
    }

    /// The waveform after a 16-bit write/read cycle.
    pub fn quantized(&self) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|&s| f64::from(quantize_i16(s)) / 32768.0)
                .collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

fn quantize_i16(s: f64) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}
