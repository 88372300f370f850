//! Neutral-to-emotional conversion of whole utterances.

use super::{CycleGanModel, FeatureKind};
use crate::dsp::cwt::{cwt_decompose, cwt_reconstruct, LogF0Cwt};
use crate::dsp::pitch::{estimate_f0_with, F0Config, F0Contour, F0_MAX_HZ, F0_MIN_HZ, VOICING_THRESHOLD};
use crate::dsp::synth::align_contour;
use crate::dsp::{mcep_analyze, synthesize, McepSequence, Waveform, N_MELS};
use crate::emotion::Emotion;
use crate::error::{dim_err, Error, Result};
use crate::tensor::Tensor;

/// Pitch analysis on the mel-cepstral frame rate.
pub const CONVERSION_F0: F0Config = F0Config {
    frame_ms: 40.0,
    hop_ms: 10.0,
    voicing_threshold: VOICING_THRESHOLD,
};

/// Mel-cepstra and an F0 contour aligned to the same frame count.
pub fn analyze_for_conversion(w: &Waveform) -> Result<(McepSequence, F0Contour)> {
    let m = mcep_analyze(w)?;
    let f0 = estimate_f0_with(w, &CONVERSION_F0)?;
    let f0 = align_contour(&f0, m.num_frames())?;
    Ok((m, f0))
}

/// Converted features of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvertedBundle {
    /// `T × 24`.
    pub mcep: McepSequence,
    /// `10 × T`.
    pub cwt: LogF0Cwt,
    pub f0: F0Contour,
    pub source_f0: F0Contour,
}

fn check_kind(m: &CycleGanModel, kind: FeatureKind) -> Result<()> {
    if m.kind != kind || m.dim() != kind.dim() {
        return Err(dim_err(format!(
            "expected a {} model, got {} with width {}",
            kind.as_str(),
            m.kind.as_str(),
            m.dim()
        )));
    }
    Ok(())
}

/// Converts the CWT coefficients and applies the learned level shift.
fn convert_cwt(src: &LogF0Cwt, prosody: &CycleGanModel) -> Result<LogF0Cwt> {
    let frames = src.normalized_frames();
    let (_, res) = prosody.convert_frames(&frames)?;
    let mut out = src.clone();
    let t = src.num_frames();
    for k in 0..src.coeffs.rows() {
        let s = src.scale_stds[k];
        for i in 0..t {
            let c = src.coeffs.get2(k, i) + s * res.get2(i, k);
            out.coeffs.set2(k, i, c);
        }
    }
    out.norm_mean += prosody.f0_shift();
    out.norm_std *= prosody.f0_range();
    Ok(out)
}

fn contour_from_log_f0(log_f0: &[f64], voiced: &[bool], hop_ms: f64) -> Result<F0Contour> {
    let f0 = log_f0
        .iter()
        .zip(voiced)
        .map(|(&l, &v)| if v { l.exp().clamp(F0_MIN_HZ, F0_MAX_HZ) } else { 0.0 })
        .collect();
    F0Contour::from_f0(f0, hop_ms)
}

fn rms(w: &Waveform) -> f64 {
    (w.samples().iter().map(|s| s * s).sum::<f64>() / w.len() as f64).sqrt()
}

/// Synthesis normalizes peak level; this rescales the output to the source
/// loudness, shifted by the converted change in the energy coefficient.
fn restore_level(src: &Waveform, out: &Waveform, m: &McepSequence, conv: &McepSequence) -> Result<Waveform> {
    let t = m.num_frames() as f64;
    let dc0: f64 = (0..m.num_frames())
        .map(|i| conv.coeffs.get2(i, 0) - m.coeffs.get2(i, 0))
        .sum::<f64>()
        / t;
    // c0 is √40 times the mean log power across bands
    let gain = (dc0 / (2.0 * (N_MELS as f64).sqrt())).exp();
    let (r_src, r_out) = (rms(src), rms(out));
    if r_out == 0.0 {
        return Ok(out.clone());
    }
    let k = gain * r_src / r_out;
    Waveform::from_unchecked(out.samples().iter().map(|s| s * k).collect(), out.sample_rate_hz())
}

pub fn convert_utterance(
    w: &Waveform,
    spectrum: &CycleGanModel,
    prosody: &CycleGanModel,
) -> Result<(Waveform, ConvertedBundle)> {
    check_kind(spectrum, FeatureKind::Mcep24)?;
    check_kind(prosody, FeatureKind::CwtF0)?;
    let (m, f0) = analyze_for_conversion(w)?;
    if f0.voiced_count() == 0 {
        return Err(Error::NoVoicedFrames);
    }
    let cwt = cwt_decompose(&f0)?;
    let conv_cwt = convert_cwt(&cwt, prosody)?;
    let log_f0 = cwt_reconstruct(&conv_cwt);
    let conv_f0 = contour_from_log_f0(&log_f0, &f0.voiced, f0.hop_ms)?;
    let (coeffs, _) = spectrum.convert_frames(&m.coeffs)?;
    let conv_m = McepSequence {
        coeffs,
        frame_ms: m.frame_ms,
        hop_ms: m.hop_ms,
    };
    let out = restore_level(w, &synthesize(&conv_m, &conv_f0)?, &m, &conv_m)?;
    Ok((
        out,
        ConvertedBundle {
            mcep: conv_m,
            cwt: conv_cwt,
            f0: conv_f0,
            source_f0: f0,
        },
    ))
}

/// Anything that can turn a neutral waveform into a target emotion.
pub trait UtteranceConverter {
    fn convert(&self, w: &Waveform, target: Emotion) -> Result<Waveform>;
}

/// Spectrum and prosody models for one target emotion.
#[derive(Debug, Clone)]
pub struct EmotionConverter {
    pub target: Emotion,
    pub spectrum: CycleGanModel,
    pub prosody: CycleGanModel,
}

impl EmotionConverter {
    pub fn identity(target: Emotion) -> Self {
        Self {
            target,
            spectrum: CycleGanModel::identity(FeatureKind::Mcep24),
            prosody: CycleGanModel::identity(FeatureKind::CwtF0),
        }
    }
}

impl UtteranceConverter for [EmotionConverter] {
    fn convert(&self, w: &Waveform, target: Emotion) -> Result<Waveform> {
        let c = self
            .iter()
            .find(|c| c.target == target)
            .ok_or_else(|| Error::Config(format!("no converter for {target}")))?;
        Ok(convert_utterance(w, &c.spectrum, &c.prosody)?.0)
    }
}

impl UtteranceConverter for Vec<EmotionConverter> {
    fn convert(&self, w: &Waveform, target: Emotion) -> Result<Waveform> {
        self.as_slice().convert(w, target)
    }
}

/// Per-utterance prosody training frames: normalized CWT frames (`T × 10`)
/// and the `(mean, std)` of the interpolated log-F0.
pub fn prosody_frames(f0: &F0Contour) -> Result<(Tensor, (f64, f64))> {
    let c = cwt_decompose(f0)?;
    Ok((c.normalized_frames(), (c.norm_mean, c.norm_std)))
}
