//! Same-speaker cosine similarity between neutral and emotional utterances.

use serde::{Deserialize, Serialize};

use crate::emotion::Emotion;
use crate::encoder::{DVector, SpeakerEncoder};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub pairs: usize,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            pairs: xs.len(),
        })
    }

    /// `0.51 ± 0.10`.
    pub fn display(&self) -> String {
        format!("{:.2} ± {:.2}", self.mean, self.std)
    }
}

/// All neutral × emotional cross-pair cosines for one speaker.
pub fn cross_pair_similarity(neutral: &[DVector], emotional: &[DVector]) -> Result<MeanStd> {
    if neutral.is_empty() || emotional.is_empty() || neutral.len() * emotional.len() < 2 {
        return Err(Error::InsufficientUtterances(format!(
            "{} neutral × {} emotional utterances",
            neutral.len(),
            emotional.len()
        )));
    }
    let mut sims = Vec::with_capacity(neutral.len() * emotional.len());
    for a in neutral {
        for b in emotional {
            sims.push(a.cosine(b)?);
        }
    }
    Ok(MeanStd::of(&sims).expect("non-empty"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerSimilarity {
    pub speaker_id: String,
    pub authentic: MeanStd,
    pub synthetic: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineSimilarityReport {
    pub emotion: Emotion,
    pub speakers: Vec<SpeakerSimilarity>,
}

impl CosineSimilarityReport {
    /// Mean over speakers of the per-speaker authentic means.
    pub fn mean_authentic(&self) -> f64 {
        mean(self.speakers.iter().map(|s| s.authentic.mean))
    }

    pub fn mean_synthetic(&self) -> f64 {
        mean(self.speakers.iter().map(|s| s.synthetic.mean))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Per-speaker log-mel inputs for the similarity report.
#[derive(Debug, Clone)]
pub struct SimilarityInput {
    pub speaker_id: String,
    pub neutral: Vec<Tensor>,
    pub authentic: Vec<Tensor>,
    pub synthetic: Vec<Tensor>,
}

pub fn cosine_similarity_report(
    model: &SpeakerEncoder,
    emotion: Emotion,
    inputs: &[SimilarityInput],
) -> Result<CosineSimilarityReport> {
    let embed = |ms: &[Tensor]| ms.iter().map(|m| model.embed(m)).collect::<Result<Vec<_>>>();
    let mut speakers = Vec::with_capacity(inputs.len());
    for inp in inputs {
        let n = embed(&inp.neutral)?;
        speakers.push(SpeakerSimilarity {
            speaker_id: inp.speaker_id.clone(),
            authentic: cross_pair_similarity(&n, &embed(&inp.authentic)?)?,
            synthetic: cross_pair_similarity(&n, &embed(&inp.synthetic)?)?,
        });
    }
    Ok(CosineSimilarityReport { emotion, speakers })
}
