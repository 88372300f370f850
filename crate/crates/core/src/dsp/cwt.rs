//! Ten-scale Mexican-hat wavelet decomposition of log-F0.
//!
//! The contour is made continuous (log-domain linear interpolation over
//! unvoiced gaps, edge-hold at the ends), z-normalized per utterance, then
//! analysed at dyadic scales `2^k` frames, `k = 0..9`. Reconstruction is the
//! weighted sum `Σ_k W_k(t) · (k + 2.5)^(-5/2)` followed by de-normalization.

use super::pitch::F0Contour;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const N_SCALES: usize = 10;

/// Folded into the analysis kernels so that smooth contours reconstruct at
/// close to unit gain (the weighted sum alone attenuates by about this much).
const ANALYSIS_GAIN: f64 = 7.8;

#[derive(Debug, Clone, PartialEq)]
pub struct LogF0Cwt {
    /// `10 × T`.
    pub coeffs: Tensor,
    pub norm_mean: f64,
    pub norm_std: f64,
    pub scale_means: Vec<f64>,
    pub scale_stds: Vec<f64>,
}

impl LogF0Cwt {
    pub fn num_frames(&self) -> usize {
        self.coeffs.cols()
    }

    /// Coefficients z-normalized per scale with the stored statistics, as
    /// a `T × 10` frame matrix.
    pub fn normalized_frames(&self) -> Tensor {
        let t = self.num_frames();
        let mut out = Tensor::zeros(&[t, N_SCALES]);
        for k in 0..N_SCALES {
            for i in 0..t {
                let v = (self.coeffs.get2(k, i) - self.scale_means[k]) / self.scale_stds[k];
                out.set2(i, k, v);
            }
        }
        out
    }

    /// Inverse of [`normalized_frames`](Self::normalized_frames): replaces the
    /// coefficients with de-normalized `T × 10` frames.
    pub fn with_normalized_frames(&self, frames: &Tensor) -> Result<Self> {
        if frames.cols() != N_SCALES || frames.rows() != self.num_frames() {
            return Err(Error::Dimension(format!(
                "expected {} × {N_SCALES} frames, got {:?}",
                self.num_frames(),
                frames.shape()
            )));
        }
        let t = self.num_frames();
        let mut coeffs = Tensor::zeros(&[N_SCALES, t]);
        for k in 0..N_SCALES {
            for i in 0..t {
                coeffs.set2(k, i, frames.get2(i, k) * self.scale_stds[k] + self.scale_means[k]);
            }
        }
        Ok(Self {
            coeffs,
            ..self.clone()
        })
    }
}

fn mexican_hat(t: f64) -> f64 {
    let c = 2.0 / (3f64.sqrt() * std::f64::consts::PI.powf(0.25));
    c * (1.0 - t * t) * (-0.5 * t * t).exp()
}

pub fn reconstruction_weight(k: usize) -> f64 {
    (k as f64 + 2.5).powf(-2.5)
}

/// Continuous log-F0: linear interpolation across unvoiced frames, holding
/// the first/last voiced value at the edges.
pub fn interpolate_log_f0(c: &F0Contour) -> Result<Vec<f64>> {
    let voiced: Vec<usize> = (0..c.len()).filter(|&i| c.voiced[i]).collect();
    let (&first, &last) = match (voiced.first(), voiced.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::NoVoicedFrames),
    };
    let lf: Vec<f64> = c.f0_hz.iter().map(|&f| if f > 0.0 { f.ln() } else { 0.0 }).collect();
    let mut out = vec![0.0; c.len()];
    out[..=first].iter_mut().for_each(|v| *v = lf[first]);
    out[last..].iter_mut().for_each(|v| *v = lf[last]);
    for pair in voiced.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for (i, o) in out.iter_mut().enumerate().take(b + 1).skip(a) {
            let frac = (i - a) as f64 / (b - a) as f64;
            *o = lf[a] * (1.0 - frac) + lf[b] * frac;
        }
    }
    Ok(out)
}

/// Wavelet coefficients of a zero-mean signal, `10 × T` (zero padding).
pub fn cwt(signal: &[f64]) -> Tensor {
    let t = signal.len();
    let mut out = Tensor::zeros(&[N_SCALES, t]);
    for k in 0..N_SCALES {
        let s = 2f64.powi(k as i32);
        let half = ((5.0 * s).ceil() as usize).min(t.saturating_sub(1));
        let kernel: Vec<f64> = (0..=2 * half)
            .map(|j| mexican_hat((j as f64 - half as f64) / s) * ANALYSIS_GAIN / s.sqrt())
            .collect();
        let row = out.row_mut(k);
        for (i, o) in row.iter_mut().enumerate() {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(t - 1);
            let mut acc = 0.0;
            for (j, &x) in signal.iter().enumerate().take(hi + 1).skip(lo) {
                acc += x * kernel[j + half - i];
            }
            *o = acc;
        }
    }
    out
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Zero standard deviations are replaced by one so normalization is total.
fn safe_std(s: f64) -> f64 {
    if s > 1e-12 {
        s
    } else {
        1.0
    }
}

pub fn cwt_decompose(c: &F0Contour) -> Result<LogF0Cwt> {
    let lf0 = interpolate_log_f0(c)?;
    let (mean, std) = mean_std(&lf0);
    let norm_std = safe_std(std);
    let z: Vec<f64> = if std > 1e-12 {
        lf0.iter().map(|v| (v - mean) / norm_std).collect()
    } else {
        vec![0.0; lf0.len()]
    };
    let coeffs = cwt(&z);
    let mut scale_means = Vec::with_capacity(N_SCALES);
    let mut scale_stds = Vec::with_capacity(N_SCALES);
    for k in 0..N_SCALES {
        let (m, s) = mean_std(coeffs.row(k));
        scale_means.push(m);
        scale_stds.push(safe_std(s));
    }
    Ok(LogF0Cwt {
        coeffs,
        norm_mean: mean,
        norm_std,
        scale_means,
        scale_stds,
    })
}

/// Continuous log-F0 sequence of length `T`.
pub fn cwt_reconstruct(x: &LogF0Cwt) -> Vec<f64> {
    let t = x.num_frames();
    let mut z = vec![0.0; t];
    for k in 0..N_SCALES {
        let w = reconstruction_weight(k);
        for (acc, c) in z.iter_mut().zip(x.coeffs.row(k)) {
            *acc += w * c;
        }
    }
    z.iter().map(|v| v * x.norm_std + x.norm_mean).collect()
}
