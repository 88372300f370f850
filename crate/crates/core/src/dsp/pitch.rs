//! Normalized-autocorrelation F0 tracking.

use super::frames::{frame_geometry, raw_frames};
use super::Waveform;
use crate::error::{Error, Result};

pub const F0_MIN_HZ: f64 = 50.0;
pub const F0_MAX_HZ: f64 = 600.0;
pub const VOICING_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Config {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub voicing_threshold: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        Self {
            frame_ms: 40.0,
            hop_ms: 5.0,
            voicing_threshold: VOICING_THRESHOLD,
        }
    }
}

/// Per-frame F0 in Hz; zero marks unvoiced frames.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Contour {
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    pub hop_ms: f64,
}

impl F0Contour {
    /// Builds a contour from F0 values, deriving the voicing mask from `f0 > 0`.
    pub fn from_f0(f0_hz: Vec<f64>, hop_ms: f64) -> Result<Self> {
        if let Some(bad) = f0_hz
            .iter()
            .find(|&&f| !f.is_finite() || f < 0.0 || (f > 0.0 && !(F0_MIN_HZ..=F0_MAX_HZ).contains(&f)))
        {
            return Err(Error::Format(format!("F0 value {bad} outside [50, 600] Hz")));
        }
        let voiced = f0_hz.iter().map(|&f| f > 0.0).collect();
        Ok(Self {
            f0_hz,
            voiced,
            hop_ms,
        })
    }

    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced.iter().filter(|&&v| v).count()
    }

    pub fn voiced_values(&self) -> Vec<f64> {
        self.f0_hz
            .iter()
            .zip(&self.voiced)
            .filter(|(_, &v)| v)
            .map(|(&f, _)| f)
            .collect()
    }

    /// Median of voiced frames, `None` if fully unvoiced.
    pub fn median_voiced(&self) -> Option<f64> {
        let mut v = self.voiced_values();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        })
    }

    /// Resamples to `target_len` frames by linear interpolation of the F0
    /// values; voicing follows the nearest source frame.
    pub fn resampled(&self, target_len: usize) -> Self {
        let n = self.f0_hz.len();
        if n == target_len || n == 0 {
            return self.clone();
        }
        let mut f0 = Vec::with_capacity(target_len);
        let mut voiced = Vec::with_capacity(target_len);
        for i in 0..target_len {
            let pos = if target_len == 1 {
                0.0
            } else {
                i as f64 * (n - 1) as f64 / (target_len - 1) as f64
            };
            let j = (pos.floor() as usize).min(n - 1);
            let k = (j + 1).min(n - 1);
            let frac = pos - j as f64;
            let near = if frac < 0.5 { j } else { k };
            let v = self.voiced[near];
            voiced.push(v);
            if !v {
                f0.push(0.0);
                continue;
            }
            // interpolate only between voiced neighbours
            let value = match (self.voiced[j], self.voiced[k]) {
                (true, true) => self.f0_hz[j] * (1.0 - frac) + self.f0_hz[k] * frac,
                _ => self.f0_hz[near],
            };
            f0.push(value);
        }
        Self {
            f0_hz: f0,
            voiced,
            hop_ms: self.hop_ms * n as f64 / target_len as f64,
        }
    }
}

/// Autocorrelation numerators `Σ x[n]·x[n+lag]` for every lag, via FFT.
struct AutocorrEngine {
    n_fft: usize,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl AutocorrEngine {
    fn new(frame_len: usize) -> Self {
        let n_fft = (2 * frame_len).next_power_of_two();
        let mut planner = rustfft::FftPlanner::new();
        Self {
            n_fft,
            fwd: planner.plan_fft_forward(n_fft),
            inv: planner.plan_fft_inverse(n_fft),
        }
    }

    fn numerators(&self, frame: &[f64]) -> Vec<f64> {
        use rustfft::num_complex::Complex;
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        for (b, &x) in buf.iter_mut().zip(frame) {
            b.re = x;
        }
        self.fwd.process(&mut buf);
        for b in buf.iter_mut() {
            *b = Complex::new(b.norm_sqr(), 0.0);
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.n_fft as f64;
        buf[..frame.len()].iter().map(|c| c.re * scale).collect()
    }
}

/// Peak of the normalized autocorrelation inside `[min_lag, max_lag]`
/// with parabolic refinement. Returns `(lag, peak_value)`.
fn autocorr_peak(
    engine: &AutocorrEngine,
    frame: &[f64],
    min_lag: usize,
    max_lag: usize,
) -> Option<(f64, f64)> {
    let n = frame.len();
    let max_lag = max_lag.min(n.saturating_sub(2));
    if min_lag < 2 || min_lag >= max_lag {
        return None;
    }
    let num = engine.numerators(frame);
    let mut cum = vec![0.0; n + 1];
    for (i, &x) in frame.iter().enumerate() {
        cum[i + 1] = cum[i] + x * x;
    }
    let at = |lag: usize| {
        let m = n - lag;
        let den = (cum[m] * (cum[n] - cum[lag])).sqrt();
        if den > 1e-300 {
            num[lag] / den
        } else {
            0.0
        }
    };
    let mut best = min_lag;
    let mut peak = at(min_lag);
    for lag in min_lag + 1..=max_lag {
        let v = at(lag);
        if v > peak {
            best = lag;
            peak = v;
        }
    }
    if peak <= 0.0 {
        return Some((best as f64, peak));
    }
    // prefer the shortest lag whose local peak is near the global one
    for lag in min_lag..best {
        let v = at(lag);
        if v >= 0.9 * peak && v >= at(lag - 1) && v >= at(lag + 1) {
            best = lag;
            break;
        }
    }
    let (y0, y1, y2) = (at(best - 1), at(best), at(best + 1));
    let denom = y0 - 2.0 * y1 + y2;
    let shift = if denom.abs() > 1e-12 {
        (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Some((best as f64 + shift, y1))
}

pub fn estimate_f0(w: &Waveform) -> Result<F0Contour> {
    estimate_f0_with(w, &F0Config::default())
}

pub fn estimate_f0_with(w: &Waveform, cfg: &F0Config) -> Result<F0Contour> {
    let sr = f64::from(w.sample_rate_hz());
    let (frame, hop) = frame_geometry(w.sample_rate_hz(), cfg.frame_ms, cfg.hop_ms);
    let min_lag = (sr / F0_MAX_HZ).ceil() as usize;
    let max_lag = (sr / F0_MIN_HZ).floor() as usize;
    let engine = AutocorrEngine::new(frame);
    let mut f0 = Vec::new();
    for fr in raw_frames(w.samples(), frame, hop)? {
        let mean = fr.iter().sum::<f64>() / fr.len() as f64;
        let centred: Vec<f64> = fr.iter().map(|s| s - mean).collect();
        let value = match autocorr_peak(&engine, &centred, min_lag, max_lag) {
            Some((lag, peak)) if peak >= cfg.voicing_threshold && lag > 0.0 => {
                (sr / lag).clamp(F0_MIN_HZ, F0_MAX_HZ)
            }
            _ => 0.0,
        };
        f0.push(value);
    }
    F0Contour::from_f0(f0, cfg.hop_ms)
}
