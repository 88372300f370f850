//! GE2E training loop with validation-EER early stopping.

use serde::{Deserialize, Serialize};

use super::{enroll_dvectors, normalize_mel, EncoderShape, SpeakerEncoder};
use crate::dsp::N_MELS;
use crate::error::{Error, Result};
use crate::eval::eer_from_scores;
use crate::nn::{clip_global_norm, AdamConfig, AdamState, Parameters};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvTrainConfig {
    /// Speakers per batch.
    pub n_speakers: usize,
    /// Utterances per speaker per batch.
    pub m_utterances: usize,
    pub lstm_layers: usize,
    pub hidden_size: usize,
    pub dvector_dim: usize,
    pub adam: AdamConfig,
    pub max_iterations: usize,
    /// Iterations between validation-EER evaluations.
    pub eval_every: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub crop_frames: usize,
    pub clip_norm: f64,
}

impl Default for SvTrainConfig {
    fn default() -> Self {
        Self {
            n_speakers: 8,
            m_utterances: 5,
            lstm_layers: 2,
            hidden_size: 96,
            dvector_dim: 64,
            adam: AdamConfig::default(),
            max_iterations: 1000,
            eval_every: 50,
            patience: 5,
            crop_frames: 100,
            clip_norm: 5.0,
        }
    }
}

impl SvTrainConfig {
    /// Batch of 32 speakers × 5 utterances with the slow decayed schedule.
    pub fn full_schedule() -> Self {
        Self {
            n_speakers: 32,
            m_utterances: 5,
            adam: AdamConfig::full_schedule(),
            max_iterations: 100_000,
            ..Self::default()
        }
    }

    pub fn encoder_shape(&self) -> EncoderShape {
        EncoderShape {
            lstm_layers: self.lstm_layers,
            hidden_size: self.hidden_size,
            dvector_dim: self.dvector_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_speakers", self.n_speakers),
            ("m_utterances", self.m_utterances),
            ("lstm_layers", self.lstm_layers),
            ("hidden_size", self.hidden_size),
            ("dvector_dim", self.dvector_dim),
            ("max_iterations", self.max_iterations),
            ("eval_every", self.eval_every),
            ("crop_frames", self.crop_frames),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("sv.{name} must be positive")));
            }
        }
        if self.n_speakers < 2 || self.m_utterances < 2 {
            return Err(Error::Config("sv batches need N ≥ 2 and M ≥ 2".into()));
        }
        if !(self.clip_norm > 0.0) || !(self.adam.base_lr > 0.0) {
            return Err(Error::Config("sv.clip_norm and sv.adam.base_lr must be positive".into()));
        }
        Ok(())
    }
}

/// Raw log-mel spectrograms grouped by speaker.
#[derive(Debug, Clone, Default)]
pub struct SpeakerSet {
    pub speakers: Vec<(String, Vec<Tensor>)>,
}

impl SpeakerSet {
    pub fn num_speakers(&self) -> usize {
        self.speakers.len()
    }

    pub fn num_utterances(&self) -> usize {
        self.speakers.iter().map(|(_, u)| u.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvLogRow {
    pub iter: usize,
    pub loss: f64,
    pub lr: f64,
    pub w: f64,
    pub b: f64,
    pub val_eer: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SvTrainOutput {
    pub model: SpeakerEncoder,
    pub log: Vec<SvLogRow>,
    /// Iteration whose parameters were kept (best validation EER).
    pub best_iteration: usize,
    pub best_val_eer: Option<f64>,
    pub stopped_early: bool,
}

/// `crop` frames starting at `start`, wrapping around short utterances.
pub fn crop_into(src: &Tensor, start: usize, crop: usize, dst: &mut [f64], b: usize, batch: usize) {
    let len = src.rows();
    for t in 0..crop {
        let row = src.row((start + t) % len);
        let off = (t * batch + b) * N_MELS;
        dst[off..off + N_MELS].copy_from_slice(row);
    }
}

/// Validation EER: each speaker enrolls from the first half of its
/// utterances (at most 5); the rest are scored against every profile.
pub fn validation_eer(model: &SpeakerEncoder, val: &SpeakerSet) -> Result<f64> {
    let mut profiles = Vec::new();
    let mut tests = Vec::new();
    for (spk, utts) in &val.speakers {
        if utts.len() < 2 {
            continue;
        }
        let n_enroll = (utts.len() / 2).clamp(1, 5);
        let vs = utts[..n_enroll]
            .iter()
            .map(|u| model.embed(u))
            .collect::<Result<Vec<_>>>()?;
        profiles.push(enroll_dvectors(spk, &vs)?);
        for u in &utts[n_enroll..] {
            tests.push((spk.as_str(), model.embed(u)?));
        }
    }
    let (mut targets, mut impostors) = (Vec::new(), Vec::new());
    for (spk, v) in &tests {
        for p in &profiles {
            let s = p.centroid.cosine(v)?;
            if p.speaker_id == *spk {
                targets.push(s);
            } else {
                impostors.push(s);
            }
        }
    }
    Ok(eer_from_scores(&targets, &impostors)?.0)
}

pub fn train_sv(
    train: &SpeakerSet,
    validation: Option<&SpeakerSet>,
    config: &SvTrainConfig,
    seed: u64,
) -> Result<SvTrainOutput> {
    config.validate()?;
    let (n, m) = (config.n_speakers, config.m_utterances);
    let eligible: Vec<usize> = (0..train.num_speakers())
        .filter(|&s| train.speakers[s].1.len() >= m)
        .collect();
    if eligible.len() < n {
        return Err(Error::CorpusTooSmall(format!(
            "{} speakers with ≥ {m} utterances, batch needs {n}",
            eligible.len()
        )));
    }
    let data: Vec<Vec<Tensor>> = eligible
        .iter()
        .map(|&s| train.speakers[s].1.iter().map(normalize_mel).collect())
        .collect();
    if data.iter().flatten().any(|u| u.rows() == 0) {
        return Err(Error::Dimension("empty spectrogram in training set".into()));
    }
    let validation = validation.filter(|v| v.num_speakers() >= 2);

    let root = SeededRng::new(seed);
    let mut model = SpeakerEncoder::new(config.encoder_shape(), &mut root.fork("sv-init"));
    let mut rng = root.fork("sv-batches");
    let mut adam = AdamState::new(config.adam, &model.params());
    let crop = config.crop_frames;
    let batch = n * m;

    let mut log = Vec::with_capacity(config.max_iterations);
    let mut best = (f64::INFINITY, 0usize, None::<SpeakerEncoder>);
    let mut since_best = 0usize;
    let mut stopped_early = false;
    let mut x = vec![0.0; crop * batch * N_MELS];
    for iter in 0..config.max_iterations {
        let spk = rng.sample_indices(data.len(), n);
        for (j, &s) in spk.iter().enumerate() {
            let utts = rng.sample_indices(data[s].len(), m);
            for (i, &u) in utts.iter().enumerate() {
                let src = &data[s][u];
                let start = if src.rows() > crop {
                    rng.below(src.rows() - crop + 1)
                } else {
                    rng.below(src.rows())
                };
                crop_into(src, start, crop, &mut x, j * m + i, batch);
            }
        }
        let xt = Tensor::from_vec(&[crop, batch, N_MELS], x.clone())?;
        let (emb, cache) = model.forward(&xt)?;
        let (loss, d_emb, d_wb) = super::ge2e_loss_and_grad(&emb, n, m, &model.ge2e)?;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("GE2E loss {loss} at iteration {iter}")));
        }
        let mut grads = model.backward(&cache, &d_emb)?;
        *grads.last_mut().expect("ge2e block") = d_wb;
        clip_global_norm(&mut grads, config.clip_norm);
        let lr = adam.effective_lr();
        adam.update(model.params_mut(), &grads)?;
        model.ge2e.clamp();

        let last = iter + 1 == config.max_iterations;
        let mut val_eer = None;
        if let Some(val) = validation {
            if (iter + 1) % config.eval_every == 0 || last {
                let eer = validation_eer(&model, val)?;
                val_eer = Some(eer);
                if eer < best.0 {
                    best = (eer, iter, Some(model.clone()));
                    since_best = 0;
                } else {
                    since_best += 1;
                }
            }
        }
        log.push(SvLogRow {
            iter,
            loss,
            lr,
            w: model.ge2e.w(),
            b: model.ge2e.b(),
            val_eer,
        });
        if validation.is_some() && config.patience > 0 && since_best >= config.patience {
            stopped_early = true;
            break;
        }
    }
    let last_iter = log.last().map(|r| r.iter).unwrap_or(0);
    let (best_val_eer, best_iteration, model) = match best {
        (eer, it, Some(bm)) => (Some(eer), it, bm),
        _ => (None, last_iter, model),
    };
    Ok(SvTrainOutput {
        model,
        log,
        best_iteration,
        best_val_eer,
        stopped_early,
    })
}

pub fn write_sv_log<W: std::io::Write>(w: W, rows: &[SvLogRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}
