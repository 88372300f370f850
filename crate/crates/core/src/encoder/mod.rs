//! LSTM d-vector speaker encoder, GE2E training, enrollment and scoring.

pub mod ge2e;
pub mod train;

pub use ge2e::{ge2e_loss, ge2e_loss_and_grad, ge2e_similarity, Ge2eParams};
pub use train::{train_sv, validation_eer, write_sv_log, SpeakerSet, SvLogRow, SvTrainConfig, SvTrainOutput};

use serde::{Deserialize, Serialize};

use crate::dsp::N_MELS;
use crate::error::{dim_err, Error, Result};
use crate::nn::{prefixed, Activation, DenseCache, DenseLayer, LstmCache, LstmLayer, Parameters};
use crate::rng::SeededRng;
use crate::tensor::{cosine, l2_norm, Tensor};

/// Log-mel values below this are treated as silence.
pub const MEL_CLAMP: f64 = -12.0;
pub const MEL_CENTER: f64 = -1.5;
pub const MEL_SCALE: f64 = 3.0;

/// Fixed affine input scaling applied before the LSTM stack.
pub fn normalize_mel(frames: &Tensor) -> Tensor {
    frames.map(|x| (x.max(MEL_CLAMP) - MEL_CENTER) / MEL_SCALE)
}

/// Unit-norm speaker embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct DVector {
    values: Vec<f64>,
}

impl DVector {
    /// Normalizes `raw`; a zero vector is rejected.
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        let n = l2_norm(&raw);
        if n == 0.0 || !n.is_finite() {
            return Err(dim_err("cannot normalize a zero or non-finite vector"));
        }
        Ok(Self {
            values: raw.into_iter().map(|v| v / n).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn cosine(&self, other: &DVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(dim_err(format!(
                "d-vector dims differ: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(cosine(&self.values, &other.values).clamp(-1.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerProfile {
    pub speaker_id: String,
    pub centroid: DVector,
    pub num_enrollment_utterances: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileJson {
    speaker_id: String,
    dim: usize,
    values: Vec<f64>,
    num_enrollment_utterances: usize,
}

impl Serialize for SpeakerProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProfileJson {
            speaker_id: self.speaker_id.clone(),
            dim: self.centroid.dim(),
            values: self.centroid.values.clone(),
            num_enrollment_utterances: self.num_enrollment_utterances,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpeakerProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = ProfileJson::deserialize(d)?;
        if j.values.len() != j.dim {
            return Err(D::Error::custom("profile dim does not match values"));
        }
        if j.num_enrollment_utterances == 0 {
            return Err(D::Error::custom("num_enrollment_utterances must be positive"));
        }
        Ok(Self {
            speaker_id: j.speaker_id,
            centroid: DVector::new(j.values).map_err(D::Error::custom)?,
            num_enrollment_utterances: j.num_enrollment_utterances,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderShape {
    pub lstm_layers: usize,
    pub hidden_size: usize,
    pub dvector_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerEncoder {
    pub lstm: Vec<LstmLayer>,
    pub proj: DenseLayer,
    pub ge2e: Ge2eParams,
}

pub struct EncoderCache {
    lstm: Vec<LstmCache>,
    t_len: usize,
    proj: DenseCache,
    /// Pre-normalization projections, `B × d`.
    raw: Tensor,
}

impl SpeakerEncoder {
    pub fn new(shape: EncoderShape, rng: &mut SeededRng) -> Self {
        let mut lstm = Vec::with_capacity(shape.lstm_layers);
        for l in 0..shape.lstm_layers {
            let input = if l == 0 { N_MELS } else { shape.hidden_size };
            lstm.push(LstmLayer::new(input, shape.hidden_size, rng));
        }
        let proj = DenseLayer::new(shape.hidden_size, shape.dvector_dim, Activation::Linear, rng);
        Self {
            lstm,
            proj,
            ge2e: Ge2eParams::default(),
        }
    }

    pub fn shape(&self) -> EncoderShape {
        EncoderShape {
            lstm_layers: self.lstm.len(),
            hidden_size: self.proj.in_dim(),
            dvector_dim: self.proj.out_dim(),
        }
    }

    pub fn dvector_dim(&self) -> usize {
        self.proj.out_dim()
    }

    /// Unit-norm embeddings for a normalized `[T, B, 40]` batch.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, EncoderCache)> {
        let mut caches = Vec::with_capacity(self.lstm.len());
        let mut h = x.clone();
        for layer in &self.lstm {
            let (out, c) = layer.forward(&h)?;
            caches.push(c);
            h = out;
        }
        let s = h.shape().to_vec();
        let (t_len, b, hd) = (s[0], s[1], s[2]);
        let mut mean = Tensor::zeros(&[b, hd]);
        for t in 0..t_len {
            let step = &h.data()[t * b * hd..(t + 1) * b * hd];
            for (m, v) in mean.data_mut().iter_mut().zip(step) {
                *m += v / t_len as f64;
            }
        }
        let (raw, proj) = self.proj.forward(&mean)?;
        let mut emb = raw.clone();
        for r in 0..b {
            let row = emb.row_mut(r);
            let n = l2_norm(row).max(1e-12);
            row.iter_mut().for_each(|v| *v /= n);
        }
        Ok((
            emb,
            EncoderCache {
                lstm: caches,
                t_len,
                proj,
                raw,
            },
        ))
    }

    /// Gradients for every parameter block given `d_emb` (`B × d`). The GE2E
    /// block receives zeros; its gradient comes from the loss directly.
    pub fn backward(&self, cache: &EncoderCache, d_emb: &Tensor) -> Result<Vec<Tensor>> {
        let b = cache.raw.rows();
        let mut d_raw = Tensor::zeros(cache.raw.shape());
        for r in 0..b {
            let raw = cache.raw.row(r);
            let n = l2_norm(raw).max(1e-12);
            let g = d_emb.row(r);
            let proj: f64 = raw.iter().zip(g).map(|(x, y)| x * y).sum::<f64>() / (n * n);
            for (d, (x, y)) in d_raw.row_mut(r).iter_mut().zip(raw.iter().zip(g)) {
                *d = (y - x * proj) / n;
            }
        }
        let (d_mean, proj_grads) = self.proj.backward(&cache.proj, &d_raw)?;
        let hd = d_mean.cols();
        let t_len = cache.t_len;
        let mut dh = vec![0.0; t_len * b * hd];
        for t in 0..t_len {
            for (d, m) in dh[t * b * hd..(t + 1) * b * hd].iter_mut().zip(d_mean.data()) {
                *d = m / t_len as f64;
            }
        }
        let mut dh = Tensor::from_vec(&[t_len, b, hd], dh)?;
        let mut lstm_grads = Vec::with_capacity(self.lstm.len());
        for (layer, c) in self.lstm.iter().zip(&cache.lstm).rev() {
            let (d_in, g) = layer.backward(c, &dh)?;
            lstm_grads.push(g);
            dh = d_in;
        }
        let mut grads: Vec<Tensor> = lstm_grads.into_iter().rev().flatten().collect();
        grads.extend(proj_grads);
        grads.push(Tensor::zeros(&[2]));
        Ok(grads)
    }

    /// d-vector of a raw log-mel spectrogram (`T × 40`).
    pub fn embed(&self, mel: &Tensor) -> Result<DVector> {
        if mel.is_empty() || mel.rows() == 0 {
            return Err(dim_err("empty spectrogram"));
        }
        if mel.cols() != N_MELS {
            return Err(dim_err(format!("expected {N_MELS} mel bands, got {}", mel.cols())));
        }
        let x = normalize_mel(mel).reshape(&[mel.rows(), 1, N_MELS])?;
        let (e, _) = self.forward(&x)?;
        DVector::new(e.row(0).to_vec())
    }
}

impl Parameters for SpeakerEncoder {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = prefixed("lstm", &self.lstm);
        out.extend(prefixed("proj", &self.proj));
        out.extend(prefixed("ge2e", &self.ge2e));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.lstm.params_mut();
        out.extend(self.proj.params_mut());
        out.extend(self.ge2e.params_mut());
        out
    }
}

/// Mean of d-vectors, re-normalized.
pub fn enroll_dvectors(speaker_id: &str, vectors: &[DVector]) -> Result<SpeakerProfile> {
    let first = vectors.first().ok_or(Error::EmptyEnrollment)?;
    let d = first.dim();
    let mut sum = vec![0.0; d];
    for v in vectors {
        if v.dim() != d {
            return Err(dim_err("enrollment d-vectors differ in dimension"));
        }
        for (s, x) in sum.iter_mut().zip(v.values()) {
            *s += x;
        }
    }
    Ok(SpeakerProfile {
        speaker_id: speaker_id.to_string(),
        centroid: DVector::new(sum)?,
        num_enrollment_utterances: vectors.len(),
    })
}

pub fn enroll(speaker_id: &str, mels: &[Tensor], model: &SpeakerEncoder) -> Result<SpeakerProfile> {
    if mels.is_empty() {
        return Err(Error::EmptyEnrollment);
    }
    let vs = mels.iter().map(|m| model.embed(m)).collect::<Result<Vec<_>>>()?;
    enroll_dvectors(speaker_id, &vs)
}

pub fn verify(profile: &SpeakerProfile, mel: &Tensor, model: &SpeakerEncoder) -> Result<f64> {
    if profile.centroid.dim() != model.dvector_dim() {
        return Err(dim_err(format!(
            "profile has dim {}, model produces {}",
            profile.centroid.dim(),
            model.dvector_dim()
        )));
    }
    profile.centroid.cosine(&model.embed(mel)?)
}
