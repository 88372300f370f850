//! Experiment configuration: one TOML file, unknown keys rejected.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use evsv_core::converter::{CycleGanConfig, EarlyStop, NetShape};
use evsv_core::corpus::{AugmentationPlan, EmotionMix};
use evsv_core::encoder::SvTrainConfig;
use evsv_core::nn::AdamConfig;
use evsv_core::Emotion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    pub num_speakers: usize,
    pub media_speakers: usize,
    pub mix: EmotionMix,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub eval_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let mix: BTreeMap<Emotion, usize> = [
            (Emotion::Neutral, 24),
            (Emotion::Angry, 5),
            (Emotion::Happy, 5),
            (Emotion::Sad, 3),
            (Emotion::Calm, 3),
        ]
        .into_iter()
        .collect();
        Self {
            num_speakers: 32,
            media_speakers: 4,
            mix: EmotionMix::PerSpeaker(mix),
            min_duration_s: 1.0,
            max_duration_s: 1.6,
            eval_fraction: 0.3,
            validation_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConverterSection {
    /// Target emotions, each trained from neutral.
    pub emotions: Vec<Emotion>,
    pub spectrum: CycleGanConfig,
    pub prosody: CycleGanConfig,
    /// Validation neutral utterances converted when scoring prosody
    /// checkpoints for early stopping.
    pub monitor_utterances: usize,
}

fn toy_cyclegan(iterations: usize, early_stop: Option<EarlyStop>) -> CycleGanConfig {
    let shape = NetShape {
        context: 2,
        hidden: 32,
        layers: 2,
    };
    CycleGanConfig {
        iterations,
        head_start_k: iterations / 5,
        batch_segments: 4,
        segment_frames: 32,
        generator: shape,
        discriminator: shape,
        adam: AdamConfig {
            base_lr: 1e-3,
            ..AdamConfig::default()
        },
        early_stop,
        ..CycleGanConfig::default()
    }
}

impl Default for ConverterSection {
    fn default() -> Self {
        Self {
            emotions: vec![Emotion::Angry, Emotion::Happy],
            spectrum: toy_cyclegan(400, None),
            prosody: toy_cyclegan(400, Some(EarlyStop { every: 100, patience: 2 })),
            monitor_utterances: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentationSection {
    /// Plans to train and compare; `baseline` is always trained first.
    pub plans: Vec<AugmentationPlan>,
}

impl Default for AugmentationSection {
    fn default() -> Self {
        Self {
            plans: vec![
                AugmentationPlan::baseline(),
                "alln+5a+5h".parse().expect("valid plan"),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    /// Neutral utterances averaged into each enrolled profile.
    pub enroll_utterances: usize,
    /// FAR the media check calibrates its threshold to.
    pub far_target: f64,
    /// Emotion of the neutral-vs-authentic/synthetic similarity table.
    pub similarity_emotion: Emotion,
    /// Neutral utterances per speaker converted for that table.
    pub similarity_conversions: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            enroll_utterances: 5,
            far_target: 0.03,
            similarity_emotion: Emotion::Angry,
            similarity_conversions: 5,
        }
    }
}

fn toy_sv() -> SvTrainConfig {
    SvTrainConfig {
        n_speakers: 8,
        m_utterances: 4,
        lstm_layers: 2,
        hidden_size: 32,
        dvector_dim: 32,
        adam: AdamConfig {
            base_lr: 3e-3,
            ..AdamConfig::default()
        },
        max_iterations: 300,
        eval_every: 25,
        patience: 4,
        crop_frames: 60,
        clip_norm: 5.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub corpus: CorpusSection,
    pub converter: ConverterSection,
    pub sv: SvTrainConfig,
    pub augmentation: AugmentationSection,
    pub evaluation: EvaluationSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            corpus: CorpusSection::default(),
            converter: ConverterSection::default(),
            sv: toy_sv(),
            augmentation: AugmentationSection::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| anyhow::anyhow!("config schema error: {}", e.message()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&s).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.corpus;
        if c.num_speakers < 2 {
            bail!("split infeasible: need at least 2 speakers, got {}", c.num_speakers);
        }
        if !(0.0..1.0).contains(&c.eval_fraction) || !(0.0..1.0).contains(&c.validation_fraction) {
            bail!("corpus split fractions must lie in [0, 1)");
        }
        if self.converter.emotions.iter().any(|e| !e.is_emotional()) {
            bail!("converter targets must be emotional");
        }
        self.converter.spectrum.validate()?;
        self.converter.prosody.validate()?;
        self.sv.validate()?;
        let e = &self.evaluation;
        if e.enroll_utterances == 0 {
            bail!("evaluation.enroll_utterances must be positive");
        }
        if !(e.far_target > 0.0 && e.far_target < 1.0) {
            bail!("evaluation.far_target must lie in (0, 1)");
        }
        Ok(())
    }

    /// Every plan's synthetic emotions must have a configured converter.
    pub fn validate_plans(&self) -> Result<()> {
        for p in &self.augmentation.plans {
            for emo in p.synthetic.keys() {
                if !self.converter.emotions.contains(emo) {
                    bail!("plan {p} needs a {emo} converter, not listed in converter.emotions");
                }
            }
        }
        Ok(())
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let d = Sha256::digest(&json);
        d.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// Plans in run order: the baseline first, then the rest as listed.
    pub fn plans(&self) -> Vec<AugmentationPlan> {
        let mut out = vec![AugmentationPlan::baseline()];
        for p in &self.augmentation.plans {
            if !out.contains(p) {
                out.push(p.clone());
            }
        }
        out
    }

    /// Seed for a named stage.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        evsv_core::rng::derive_seed(self.seed, stage)
    }
}
