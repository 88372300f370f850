//! 24-coefficient mel-cepstrum: orthonormal DCT-II of the 40-band log-mel
//! spectrum, truncated. Coefficient 0 carries the frame energy.

use super::mel::{SpectralAnalyzer, DEFAULT_FRAME_MS, DEFAULT_HOP_MS, N_MELS};
use super::Waveform;
use crate::error::Result;
use crate::tensor::{gemm, MatRef, Tensor};

pub const N_MCEP: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct McepSequence {
    /// `T × 24`.
    pub coeffs: Tensor,
    pub frame_ms: f64,
    pub hop_ms: f64,
}

impl McepSequence {
    pub fn num_frames(&self) -> usize {
        self.coeffs.rows()
    }
}

/// Orthonormal DCT-II basis, `n_out × n_in`.
pub fn dct_matrix(n_out: usize, n_in: usize) -> Tensor {
    let mut m = Tensor::zeros(&[n_out, n_in]);
    for k in 0..n_out {
        let scale = if k == 0 {
            (1.0 / n_in as f64).sqrt()
        } else {
            (2.0 / n_in as f64).sqrt()
        };
        for n in 0..n_in {
            let v = scale
                * (std::f64::consts::PI * k as f64 * (2 * n + 1) as f64 / (2 * n_in) as f64).cos();
            m.set2(k, n, v);
        }
    }
    m
}

/// Log-mel frames (`T × 40`) to mel-cepstra (`T × 24`).
pub fn log_mel_to_mcep(log_mel: &Tensor) -> Tensor {
    let dct = dct_matrix(N_MCEP, N_MELS);
    let t = log_mel.rows();
    let mut out = vec![0.0; t * N_MCEP];
    gemm(
        MatRef::new(log_mel.data(), t, N_MELS),
        MatRef::t(dct.data(), N_MCEP, N_MELS),
        0.0,
        &mut out,
    );
    Tensor::from_vec(&[t, N_MCEP], out).expect("shape computed above")
}

/// Mel-cepstra (`T × 24`) back to smoothed log-mel frames (`T × 40`); the
/// dropped high-quefrency coefficients are taken as zero.
pub fn mcep_to_log_mel(mcep: &Tensor) -> Tensor {
    let dct = dct_matrix(N_MCEP, N_MELS);
    let t = mcep.rows();
    let mut out = vec![0.0; t * N_MELS];
    gemm(
        MatRef::new(mcep.data(), t, N_MCEP),
        MatRef::new(dct.data(), N_MCEP, N_MELS),
        0.0,
        &mut out,
    );
    Tensor::from_vec(&[t, N_MELS], out).expect("shape computed above")
}

pub fn mcep_analyze(w: &Waveform) -> Result<McepSequence> {
    let analyzer = SpectralAnalyzer::for_waveform(w);
    let log_mel = analyzer.log_mel(w)?;
    Ok(McepSequence {
        coeffs: log_mel_to_mcep(&log_mel),
        frame_ms: DEFAULT_FRAME_MS,
        hop_ms: DEFAULT_HOP_MS,
    })
}
