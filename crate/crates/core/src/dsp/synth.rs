//! Pulse/noise source-filter synthesis from mel-cepstra and F0.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::mcep::{mcep_to_log_mel, McepSequence};
use super::mel::{SpectralAnalyzer, LOG_FLOOR, N_MELS};
use super::pitch::F0Contour;
use super::waveform::{Waveform, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const OUTPUT_PEAK: f64 = 0.9;
/// Largest frame-count difference absorbed by resampling the contour.
pub const MAX_FRAME_SLACK: usize = 2;
const NOISE_SEED: u64 = 0x5EED_0F_A0D10;

/// Aligns a contour to `frames` frames, or fails when the lengths are more
/// than [`MAX_FRAME_SLACK`] apart.
pub fn align_contour(c: &F0Contour, frames: usize) -> Result<F0Contour> {
    if c.len().abs_diff(frames) > MAX_FRAME_SLACK {
        return Err(Error::FeatureLengthMismatch {
            left: frames,
            right: c.len(),
        });
    }
    Ok(c.resampled(frames))
}

/// Per-bin amplitude response for one log-mel frame.
fn amplitude_response(
    log_mel: &[f64],
    centers_hz: &[f64],
    areas: &[f64],
    window_power: f64,
    n_bins: usize,
    bin_hz: f64,
) -> Vec<f64> {
    // log power density per bin at each band centre
    let log_density: Vec<f64> = log_mel
        .iter()
        .zip(areas)
        .map(|(&lm, &area)| {
            let p = (lm.exp() - LOG_FLOOR).max(LOG_FLOOR);
            (p / (area * window_power)).ln()
        })
        .collect();
    let last = N_MELS - 1;
    (0..n_bins)
        .map(|k| {
            let f = k as f64 * bin_hz;
            let ld = if f <= centers_hz[0] {
                log_density[0]
            } else if f >= centers_hz[last] {
                log_density[last]
            } else {
                let b = centers_hz.partition_point(|&c| c <= f) - 1;
                let frac = (f - centers_hz[b]) / (centers_hz[b + 1] - centers_hz[b]);
                log_density[b] * (1.0 - frac) + log_density[b + 1] * frac
            };
            (0.5 * ld).exp()
        })
        .collect()
}

fn excitation(
    contour: &F0Contour,
    len: usize,
    frame_len: usize,
    hop: usize,
    sr: f64,
) -> Vec<f64> {
    let mut rng = SeededRng::new(NOISE_SEED);
    let t_max = contour.len() - 1;
    let mut phase = 1.0;
    let mut out = vec![0.0; len];
    for (n, o) in out.iter_mut().enumerate() {
        let pos = (n as f64 - frame_len as f64 / 2.0) / hop as f64;
        let pos = pos.clamp(0.0, t_max as f64);
        let j = pos.floor() as usize;
        let k = (j + 1).min(t_max);
        let frac = pos - j as f64;
        let near = if frac < 0.5 { j } else { k };
        if contour.voiced[near] {
            let f0 = match (contour.voiced[j], contour.voiced[k]) {
                (true, true) => contour.f0_hz[j] * (1.0 - frac) + contour.f0_hz[k] * frac,
                _ => contour.f0_hz[near],
            };
            phase += f0 / sr;
            if phase >= 1.0 {
                phase -= phase.floor();
                *o = (sr / f0).sqrt();
            }
        } else {
            phase = 1.0;
            *o = rng.normal();
        }
    }
    out
}

pub fn synthesize(m: &McepSequence, c: &F0Contour) -> Result<Waveform> {
    let frames = m.num_frames();
    if frames == 0 {
        return Err(Error::Dimension("empty mel-cepstrum".into()));
    }
    let contour = align_contour(c, frames)?;
    let sr = DEFAULT_SAMPLE_RATE;
    let analyzer = SpectralAnalyzer::new(sr, m.frame_ms, m.hop_ms);
    let (frame_len, hop, n_fft) = (analyzer.frame_len(), analyzer.hop(), analyzer.n_fft());
    let fb = analyzer.filterbank();
    let areas = fb.areas();
    let window = analyzer.window();
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let log_mel = mcep_to_log_mel(&m.coeffs);

    let len = (frames - 1) * hop + frame_len;
    let exc = excitation(&contour, len, frame_len, hop, f64::from(sr));

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n_fft);
    let inv = planner.plan_fft_inverse(n_fft);
    let mut out = vec![0.0; len];
    let mut norm = vec![0.0; len];
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for t in 0..frames {
        let start = t * hop;
        buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
        for i in 0..frame_len {
            buf[i].re = exc[start + i] * window[i];
        }
        fwd.process(&mut buf);
        let amp = amplitude_response(
            log_mel.row(t),
            fb.centers_hz(),
            &areas,
            window_power,
            fb.n_bins(),
            fb.bin_hz(),
        );
        for k in 0..n_fft {
            let bin = if k <= n_fft / 2 { k } else { n_fft - k };
            buf[k] *= amp[bin];
        }
        inv.process(&mut buf);
        let scale = 1.0 / n_fft as f64;
        for i in 0..frame_len {
            out[start + i] += buf[i].re * scale * window[i];
            norm[start + i] += window[i] * window[i];
        }
    }
    for (o, n) in out.iter_mut().zip(&norm) {
        *o /= n.max(1e-3);
    }
    let peak = out.iter().fold(0.0f64, |p, v| p.max(v.abs()));
    if peak > 0.0 {
        let g = OUTPUT_PEAK / peak;
        out.iter_mut().for_each(|v| *v *= g);
    }
    Waveform::from_unchecked(out, sr)
}
