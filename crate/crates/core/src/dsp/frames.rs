use super::Waveform;
use crate::error::{Error, Result};

/// Frame and hop lengths in samples for a given rate.
pub fn frame_geometry(sample_rate_hz: u32, frame_ms: f64, hop_ms: f64) -> (usize, usize) {
    let sr = f64::from(sample_rate_hz);
    let frame = (frame_ms * sr / 1000.0).round() as usize;
    let hop = (hop_ms * sr / 1000.0).round() as usize;
    (frame.max(1), hop.max(1))
}

/// `floor((len - frame) / hop) + 1`, or an error when the signal is shorter
/// than one frame.
pub fn frame_count(len: usize, frame: usize, hop: usize) -> Result<usize> {
    if len < frame {
        return Err(Error::UtteranceTooShort {
            samples: len,
            needed: frame,
        });
    }
    Ok((len - frame) / hop + 1)
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Slices `w` into Hann-windowed frames.
pub fn frame_signal(w: &Waveform, frame_ms: f64, hop_ms: f64) -> Result<Vec<Vec<f64>>> {
    if !(hop_ms > 0.0 && frame_ms >= hop_ms) {
        return Err(Error::Config(format!(
            "need frame_ms >= hop_ms > 0, got {frame_ms} / {hop_ms}"
        )));
    }
    let (frame, hop) = frame_geometry(w.sample_rate_hz(), frame_ms, hop_ms);
    let window = hann(frame);
    let raw = raw_frames(w.samples(), frame, hop)?;
    Ok(raw
        .map(|f| f.iter().zip(&window).map(|(s, h)| s * h).collect())
        .collect())
}

/// Unwindowed frames as slices into `samples`.
pub fn raw_frames(
    samples: &[f64],
    frame: usize,
    hop: usize,
) -> Result<impl Iterator<Item = &[f64]> + '_> {
    let count = frame_count(samples.len(), frame, hop)?;
    Ok((0..count).map(move |t| &samples[t * hop..t * hop + frame]))
}
