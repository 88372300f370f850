//! Alternating CycleGAN training with a generator head start.

use serde::Serialize;

use super::losses::{discriminator_grads, generator_grads};
use super::{CycleGanConfig, CycleGanModel, DomainStats, FeatureKind};
use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, AdamState};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

const CLIP_NORM: f64 = 5.0;
const MIN_STD: f64 = 1e-3;

/// Non-parallel training frames of one domain.
#[derive(Debug, Clone, Default)]
pub struct DomainData {
    /// Per-utterance `T × dim` frames.
    pub utterances: Vec<Tensor>,
    /// Per-utterance `(mean, std)` of log-F0, prosody models only.
    pub f0_stats: Vec<(f64, f64)>,
}

impl DomainData {
    pub fn new(utterances: Vec<Tensor>) -> Self {
        Self {
            utterances,
            f0_stats: Vec::new(),
        }
    }

    fn is_empty(&self) -> bool {
        self.utterances.iter().all(|u| u.rows() == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleGanLogRow {
    pub iter: usize,
    /// Absent while the discriminators are frozen.
    pub d_loss: Option<f64>,
    pub g_loss: f64,
    pub cycle: f64,
    pub identity: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct CycleGanTrainOutput {
    pub model: CycleGanModel,
    pub log: Vec<CycleGanLogRow>,
    /// `(iteration, monitor value)` for every early-stopping evaluation.
    pub monitor_history: Vec<(usize, f64)>,
    pub best_iteration: usize,
    pub stopped_early: bool,
}

/// Optional callbacks: `observer` sees the model after every iteration;
/// `monitor` scores it for early stopping (higher is better).
#[derive(Default)]
pub struct TrainHooks<'a> {
    pub observer: Option<&'a mut dyn FnMut(usize, &CycleGanModel)>,
    pub monitor: Option<&'a dyn Fn(&CycleGanModel) -> Result<f64>>,
}

fn column_stats(utts: &[Tensor], dim: usize) -> (Tensor, Tensor) {
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    let mut n = 0.0;
    for u in utts {
        for r in 0..u.rows() {
            for (j, v) in u.row(r).iter().enumerate() {
                sum[j] += v;
                sq[j] += v * v;
            }
            n += 1.0;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std: Vec<f64> = sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| (q / n - m * m).max(0.0).sqrt().max(MIN_STD))
        .collect();
    (
        Tensor::from_vec(&[dim], mean).expect("dim"),
        Tensor::from_vec(&[dim], std).expect("dim"),
    )
}

fn standardize(utts: &[Tensor], mean: &Tensor, std: &Tensor) -> Vec<Tensor> {
    utts.iter()
        .filter(|u| u.rows() > 0)
        .map(|u| {
            let mut o = u.clone();
            for r in 0..o.rows() {
                for (j, v) in o.row_mut(r).iter_mut().enumerate() {
                    *v = (*v - mean.data()[j]) / std.data()[j];
                }
            }
            o
        })
        .collect()
}

fn sample_batch(utts: &[Tensor], segs: usize, len: usize, dim: usize, rng: &mut SeededRng) -> Tensor {
    let mut data = Vec::with_capacity(segs * len * dim);
    for _ in 0..segs {
        let u = &utts[rng.below(utts.len())];
        let t = u.rows();
        let start = if t > len { rng.below(t - len + 1) } else { rng.below(t) };
        for k in 0..len {
            data.extend_from_slice(u.row((start + k) % t));
        }
    }
    Tensor::from_vec(&[segs, len, dim], data).expect("batch shape")
}

fn mean_of(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n.max(1) as f64
}

pub fn train_cyclegan(
    x: &DomainData,
    y: &DomainData,
    kind: FeatureKind,
    config: &CycleGanConfig,
    seed: u64,
    mut hooks: TrainHooks<'_>,
) -> Result<CycleGanTrainOutput> {
    config.validate()?;
    if x.is_empty() {
        return Err(Error::EmptyDomain("source".into()));
    }
    if y.is_empty() {
        return Err(Error::EmptyDomain("target".into()));
    }
    let dim = x.utterances.iter().find(|u| u.rows() > 0).expect("non-empty").cols();
    if x.utterances.iter().chain(&y.utterances).any(|u| u.rows() > 0 && u.cols() != dim) {
        return Err(Error::Dimension("domains disagree on feature width".into()));
    }
    let root = SeededRng::new(seed);
    let mut model = CycleGanModel::with_dim(kind, dim, config, &mut root.fork("cyclegan-init"));
    if config.normalize_domains {
        let (xm, xs) = column_stats(&x.utterances, dim);
        let (ym, ys) = column_stats(&y.utterances, dim);
        model.stats = DomainStats {
            x_mean: xm,
            x_std: xs,
            y_mean: ym,
            y_std: ys,
        };
    } else {
        model.stats = DomainStats::unit(dim);
    }
    if !x.f0_stats.is_empty() && !y.f0_stats.is_empty() {
        let shift = mean_of(y.f0_stats.iter().map(|s| s.0)) - mean_of(x.f0_stats.iter().map(|s| s.0));
        let range = mean_of(y.f0_stats.iter().map(|s| s.1)) / mean_of(x.f0_stats.iter().map(|s| s.1)).max(1e-12);
        model.f0_level = Tensor::from_vec(&[2], vec![shift, range])?;
    }
    let xs = standardize(&x.utterances, &model.stats.x_mean, &model.stats.x_std);
    let ys = standardize(&y.utterances, &model.stats.y_mean, &model.stats.y_std);

    let mut rng = root.fork("cyclegan-batches");
    let mut g_adam = AdamState::new(config.adam, &model.generator_params());
    let mut d_adam = AdamState::new(config.adam, &model.discriminator_params());
    let (segs, len) = (config.batch_segments, config.segment_frames);

    let mut log = Vec::with_capacity(config.iterations);
    let mut monitor_history = Vec::new();
    let mut best: Option<(f64, usize, CycleGanModel)> = None;
    let mut since_best = 0usize;
    let mut stopped_early = false;
    for iter in 0..config.iterations {
        let bx = sample_batch(&xs, segs, len, dim, &mut rng);
        let by = sample_batch(&ys, segs, len, dim, &mut rng);
        let mut d_loss = None;
        if iter >= config.head_start_k {
            let (dl, mut grads) = discriminator_grads(&model, &bx, &by)?;
            if !dl.is_finite() {
                return Err(Error::Divergence(format!("discriminator loss {dl} at iteration {iter}")));
            }
            clip_global_norm(&mut grads, CLIP_NORM);
            d_adam.update(model.discriminator_params_mut(), &grads)?;
            d_loss = Some(dl);
        }
        let (br, mut grads) = generator_grads(&model, &bx, &by, iter, config, true)?;
        if !br.total.is_finite() {
            return Err(Error::Divergence(format!("generator loss {} at iteration {iter}", br.total)));
        }
        clip_global_norm(&mut grads, CLIP_NORM);
        g_adam.update(model.generator_params_mut(), &grads)?;
        log.push(CycleGanLogRow {
            iter,
            d_loss,
            g_loss: br.g_adv_fwd + br.g_adv_bwd,
            cycle: br.cycle,
            identity: br.identity,
            total: br.total,
        });
        if let Some(obs) = hooks.observer.as_mut() {
            obs(iter, &model);
        }
        if let (Some(es), Some(monitor)) = (config.early_stop, hooks.monitor) {
            let last = iter + 1 == config.iterations;
            if (iter + 1) % es.every == 0 || last {
                let v = monitor(&model)?;
                monitor_history.push((iter, v));
                if best.as_ref().map_or(true, |b| v > b.0) {
                    best = Some((v, iter, model.clone()));
                    since_best = 0;
                } else {
                    since_best += 1;
                    if es.patience > 0 && since_best >= es.patience {
                        stopped_early = true;
                        break;
                    }
                }
            }
        }
    }
    let last_iter = log.last().map_or(0, |r| r.iter);
    let (model, best_iteration) = match best {
        Some((_, it, m)) => (m, it),
        None => (model, last_iter),
    };
    Ok(CycleGanTrainOutput {
        model,
        log,
        monitor_history,
        best_iteration,
        stopped_early,
    })
}

pub fn write_cyclegan_log<W: std::io::Write>(w: W, rows: &[CycleGanLogRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}
