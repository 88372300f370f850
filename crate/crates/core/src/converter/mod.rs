//! CycleGAN emotion conversion over mel-cepstra and wavelet log-F0.
//!
//! Two independent models are trained per target emotion: one maps
//! 24-dimensional mel-cepstral frames, the other maps 10-scale CWT frames.
//! Domain X is always neutral speech.

pub mod convert;
pub mod losses;
pub mod net;
pub mod train;

pub use convert::{
    analyze_for_conversion, convert_utterance, prosody_frames, ConvertedBundle, EmotionConverter,
    UtteranceConverter,
};
pub use losses::{
    adversarial_from_probs, adversarial_loss, cycle_loss, discriminator_grads, generator_grads,
    identity_loss, lambda_id, total_loss, LossBreakdown,
};
pub use net::{Discriminator, FrameNet, Generator, NetShape};
pub use train::{
    train_cyclegan, write_cyclegan_log, CycleGanLogRow, CycleGanTrainOutput, DomainData, TrainHooks,
};

use serde::{Deserialize, Serialize};

use crate::dsp::{N_MCEP, N_SCALES};
use crate::emotion::Emotion;
use crate::error::{dim_err, Error, Result};
use crate::nn::{prefixed, AdamConfig, Parameters};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "mcep24")]
    Mcep24,
    #[serde(rename = "cwtf0_10")]
    CwtF0,
}

impl FeatureKind {
    pub fn dim(self) -> usize {
        match self {
            FeatureKind::Mcep24 => N_MCEP,
            FeatureKind::CwtF0 => N_SCALES,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Mcep24 => "mcep24",
            FeatureKind::CwtF0 => "cwtf0_10",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionPair {
    pub source: Emotion,
    pub target: Emotion,
}

impl EmotionPair {
    pub fn new(source: Emotion, target: Emotion) -> Result<Self> {
        if source == target {
            return Err(Error::Config(format!(
                "conversion needs distinct domains, got {source} → {target}"
            )));
        }
        Ok(Self { source, target })
    }

    pub fn from_neutral(target: Emotion) -> Result<Self> {
        Self::new(Emotion::Neutral, target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStop {
    /// Iterations between monitor evaluations.
    pub every: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleGanConfig {
    pub lambda_cy: f64,
    pub lambda_id: f64,
    pub id_cutoff_iters: usize,
    /// Iterations during which the discriminators are frozen.
    pub head_start_k: usize,
    pub iterations: usize,
    /// Segments per batch.
    pub batch_segments: usize,
    /// Frames per segment.
    pub segment_frames: usize,
    pub generator: NetShape,
    pub discriminator: NetShape,
    pub adam: AdamConfig,
    /// Per-dimension standardization of each domain before the networks.
    pub normalize_domains: bool,
    /// Only used by the prosody model.
    pub early_stop: Option<EarlyStop>,
}

impl Default for CycleGanConfig {
    fn default() -> Self {
        Self {
            lambda_cy: 10.0,
            lambda_id: 5.0,
            id_cutoff_iters: 10_000,
            head_start_k: 500,
            iterations: 2000,
            batch_segments: 8,
            segment_frames: 32,
            generator: NetShape::default(),
            discriminator: NetShape::default(),
            adam: AdamConfig::default(),
            normalize_domains: true,
            early_stop: None,
        }
    }
}

impl CycleGanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_cy < 0.0 || self.lambda_id < 0.0 {
            return Err(Error::Config("lambda_cy and lambda_id must be ≥ 0".into()));
        }
        if self.iterations == 0 || self.head_start_k >= self.iterations {
            return Err(Error::Config(format!(
                "head_start_k ({}) must be below iterations ({})",
                self.head_start_k, self.iterations
            )));
        }
        if self.batch_segments == 0 || self.segment_frames == 0 {
            return Err(Error::Config("converter batches must be non-empty".into()));
        }
        if self.generator.layers == 0 || self.generator.hidden == 0 || self.discriminator.hidden == 0 {
            return Err(Error::Config("converter networks need hidden layers".into()));
        }
        if let Some(es) = self.early_stop {
            if es.every == 0 {
                return Err(Error::Config("early_stop.every must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Per-dimension mean and standard deviation of both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainStats {
    pub x_mean: Tensor,
    pub x_std: Tensor,
    pub y_mean: Tensor,
    pub y_std: Tensor,
}

impl DomainStats {
    pub fn unit(dim: usize) -> Self {
        Self {
            x_mean: Tensor::zeros(&[dim]),
            x_std: Tensor::filled(&[dim], 1.0),
            y_mean: Tensor::zeros(&[dim]),
            y_std: Tensor::filled(&[dim], 1.0),
        }
    }
}

impl Parameters for DomainStats {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("x_mean".into(), &self.x_mean),
            ("x_std".into(), &self.x_std),
            ("y_mean".into(), &self.y_mean),
            ("y_std".into(), &self.y_std),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.x_mean, &mut self.x_std, &mut self.y_mean, &mut self.y_std]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleGanModel {
    pub kind: FeatureKind,
    pub g_xy: Generator,
    pub g_yx: Generator,
    pub d_x: Discriminator,
    pub d_y: Discriminator,
    pub stats: DomainStats,
    /// `[log-F0 mean shift, log-F0 range ratio]`, X → Y. Prosody models only;
    /// `[0, 1]` otherwise.
    pub f0_level: Tensor,
}

impl CycleGanModel {
    pub fn new(kind: FeatureKind, config: &CycleGanConfig, rng: &mut SeededRng) -> Self {
        Self::with_dim(kind, kind.dim(), config, rng)
    }

    /// Arbitrary feature width, for toy problems.
    pub fn with_dim(kind: FeatureKind, dim: usize, config: &CycleGanConfig, rng: &mut SeededRng) -> Self {
        Self {
            kind,
            g_xy: Generator::new(dim, config.generator, &mut rng.fork("g_xy")),
            g_yx: Generator::new(dim, config.generator, &mut rng.fork("g_yx")),
            d_x: Discriminator::new(dim, config.discriminator, &mut rng.fork("d_x")),
            d_y: Discriminator::new(dim, config.discriminator, &mut rng.fork("d_y")),
            stats: DomainStats::unit(dim),
            f0_level: Tensor::from_vec(&[2], vec![0.0, 1.0]).expect("two values"),
        }
    }

    /// Both generators exact identities; unit statistics.
    pub fn identity(kind: FeatureKind) -> Self {
        let config = CycleGanConfig::default();
        let mut m = Self::new(kind, &config, &mut SeededRng::new(0));
        m.g_xy = Generator::identity(kind.dim(), config.generator);
        m.g_yx = Generator::identity(kind.dim(), config.generator);
        m
    }

    pub fn dim(&self) -> usize {
        self.g_xy.dim()
    }

    pub fn f0_shift(&self) -> f64 {
        self.f0_level.data()[0]
    }

    pub fn f0_range(&self) -> f64 {
        self.f0_level.data()[1]
    }

    pub fn generator_params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.g_xy.params_mut();
        v.extend(self.g_yx.params_mut());
        v
    }

    pub fn generator_params(&self) -> Vec<&Tensor> {
        let mut v = self.g_xy.params();
        v.extend(self.g_yx.params());
        v
    }

    pub fn discriminator_params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.d_x.params_mut();
        v.extend(self.d_y.params_mut());
        v
    }

    pub fn discriminator_params(&self) -> Vec<&Tensor> {
        let mut v = self.d_x.params();
        v.extend(self.d_y.params());
        v
    }

    /// Content hash of the discriminator blocks alone.
    pub fn discriminator_hash(&self) -> String {
        let ck = crate::nn::Checkpoint {
            blocks: prefixed("d_x", &self.d_x)
                .into_iter()
                .chain(prefixed("d_y", &self.d_y))
                .map(|(n, t)| (n, t.clone()))
                .collect(),
        };
        ck.content_hash()
    }

    /// Converts raw X-domain frames (`T × dim`) to the Y domain. Returns the
    /// generator residual in normalized units alongside the result.
    pub fn convert_frames(&self, frames: &Tensor) -> Result<(Tensor, Tensor)> {
        let d = self.dim();
        if frames.cols() != d || frames.rows() == 0 {
            return Err(dim_err(format!(
                "converter expects T × {d} frames, got {:?}",
                frames.shape()
            )));
        }
        let t = frames.rows();
        let (xm, xs) = (self.stats.x_mean.data(), self.stats.x_std.data());
        let (ym, ys) = (self.stats.y_mean.data(), self.stats.y_std.data());
        let mut norm = frames.clone();
        for r in 0..t {
            for (j, v) in norm.row_mut(r).iter_mut().enumerate() {
                *v = (*v - xm[j]) / xs[j];
            }
        }
        let norm = norm.reshape(&[1, t, d])?;
        let res = self.g_xy.residual(&norm)?;
        let mut out = Tensor::zeros(&[t, d]);
        for r in 0..t {
            for j in 0..d {
                let z = norm.data()[r * d + j] + res.get2(r, j);
                out.set2(r, j, ym[j] + ys[j] * z);
            }
        }
        Ok((out, res))
    }
}

impl Parameters for CycleGanModel {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("g_xy", &self.g_xy);
        v.extend(prefixed("g_yx", &self.g_yx));
        v.extend(prefixed("d_x", &self.d_x));
        v.extend(prefixed("d_y", &self.d_y));
        v.extend(prefixed("stats", &self.stats));
        v.push(("f0_level".into(), &self.f0_level));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.g_xy.params_mut();
        v.extend(self.g_yx.params_mut());
        v.extend(self.d_x.params_mut());
        v.extend(self.d_y.params_mut());
        v.extend(self.stats.params_mut());
        v.push(&mut self.f0_level);
        v
    }
}
