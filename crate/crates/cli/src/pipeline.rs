//! Pipeline stages shared by the subcommands.
//!
//! Layout under the output root:
//!
//! ```text
//! corpus/<corpus hash>/           generated corpus with its split manifest
//! cache/                          feature cache (unless EVSV_CACHE_DIR is set)
//! runs/<config hash>/
//!     models/<plan>.evck          speaker encoders
//!     converters/<emo>_<kind>.*   CycleGAN checkpoints and JSON sidecars
//!     augmented/<plan>/           synthetic WAVs and the augmented manifest
//!     logs/                       training-log CSVs
//!     reports/                    text tables, JSON results, projection CSV
//!     records/<command>.json      run records
//! ```
//!
//! Stages reuse artifacts that already exist in the run directory, so every
//! subcommand is idempotent under a fixed config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use evsv_core::converter::{
    convert_utterance, prosody_frames, train_cyclegan, write_cyclegan_log, CycleGanConfig, CycleGanModel,
    DomainData, EmotionConverter, FeatureKind, TrainHooks,
};
use evsv_core::corpus::{
    build_augmented_set, gen_corpus, load_manifest, split_speakers, AugmentationPlan, CorpusSpec, Manifest,
    ManifestRecord, Split, MANIFEST_FILE,
};
use evsv_core::dsp::{mel_spectrogram, Waveform};
use evsv_core::encoder::{enroll_dvectors, train_sv, write_sv_log, DVector, SpeakerEncoder, SpeakerProfile, SpeakerSet};
use evsv_core::eval::{
    calibrate_threshold, cosine_similarity_report, far_at_threshold, per_emotion_breakdown, project_embeddings_2d,
    CosineSimilarityReport, EerReport, ProjectedPoint, SimilarityInput, Trial, TrialScoreSet,
};
use evsv_core::nn::checkpoint::{read_checkpoint, Checkpoint};
use evsv_core::{Emotion, SeededRng};

use crate::config::ExperimentConfig;
use crate::features::{self, FeatureMap};
use crate::record::{record_path, sha256_hex, write_atomic, Outputs, RunRecord};

/// Paths derived from the output root and the config.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
    pub config: ExperimentConfig,
}

fn short_hash<T: Serialize>(v: &T) -> String {
    sha256_hex(&serde_json::to_vec(v).expect("serializable"))[..12].to_string()
}

/// File-name form of a plan: `alln+5a+5h` becomes `alln_5a_5h`.
pub fn plan_slug(plan: &AugmentationPlan) -> String {
    plan.to_string().replace('+', "_")
}

impl Workspace {
    /// `root` is made absolute so manifests resolve from any directory.
    pub fn new(root: impl Into<PathBuf>, config: ExperimentConfig) -> Self {
        let root = root.into();
        Self {
            root: std::path::absolute(&root).unwrap_or(root),
            config,
        }
    }

    pub fn corpus_spec(&self) -> CorpusSpec {
        let c = &self.config.corpus;
        CorpusSpec {
            num_speakers: c.num_speakers,
            media_speakers: c.media_speakers,
            mix: c.mix.clone(),
            min_duration_s: c.min_duration_s,
            max_duration_s: c.max_duration_s,
            seed: self.config.stage_seed("corpus"),
        }
    }

    /// Depends only on what shapes the corpus and its split.
    pub fn corpus_dir(&self) -> PathBuf {
        let c = &self.config.corpus;
        let key = short_hash(&(self.corpus_spec(), c.eval_fraction, c.validation_fraction));
        self.root.join("corpus").join(key)
    }

    pub fn cache_dir(&self) -> PathBuf {
        features::cache_dir(&self.root.join("cache"))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.root.join("runs").join(self.config.hash())
    }

    pub fn model_path(&self, plan: &AugmentationPlan) -> PathBuf {
        self.run_dir().join("models").join(format!("{}.evck", plan_slug(plan)))
    }

    pub fn converter_path(&self, emotion: Emotion, kind: FeatureKind) -> PathBuf {
        self.run_dir()
            .join("converters")
            .join(format!("{}_{}.evck", emotion.as_str(), kind.as_str()))
    }

    pub fn sv_log_path(&self, plan: &AugmentationPlan) -> PathBuf {
        self.run_dir().join("logs").join(format!("sv_{}.csv", plan_slug(plan)))
    }

    pub fn converter_log_path(&self, emotion: Emotion, kind: FeatureKind) -> PathBuf {
        self.run_dir()
            .join("logs")
            .join(format!("cyclegan_{}_{}.csv", emotion.as_str(), kind.as_str()))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.run_dir().join("reports")
    }
}

/// Wall-clock timings per stage.
#[derive(Debug, Default)]
pub struct Timings(pub BTreeMap<String, f64>);

impl Timings {
    /// Runs `f`, records its duration and tags any error with the stage name.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f().with_context(|| format!("stage {name} failed"));
        *self.0.entry(name.to_string()).or_default() += t.elapsed().as_secs_f64();
        r
    }
}

/// Writes the run record of `command` and returns it.
pub fn finish_record(ws: &Workspace, out: &mut Outputs, command: &str, timings: Timings) -> Result<RunRecord> {
    let rec = RunRecord {
        command: command.to_string(),
        config_hash: ws.config.hash(),
        config: ws.config.clone(),
        artifacts: out.hashes()?,
        timings_s: timings.0,
    };
    let path = record_path(&ws.run_dir(), command);
    write_atomic(&path, &serde_json::to_vec_pretty(&rec)?)?;
    Ok(rec)
}

// ---------------------------------------------------------------- corpus

fn track_corpus(out: &mut Outputs, m: &Manifest, dir: &Path, owned: bool) {
    let mut files = vec![dir.join(MANIFEST_FILE), dir.join("speakers.json")];
    files.extend(m.records.iter().map(|r| m.resolve(r)));
    for f in files {
        if owned {
            out.track(f);
        } else {
            out.reuse(f);
        }
    }
}

/// Generates the corpus and assigns speakers to splits, replacing any
/// earlier copy.
pub fn generate_corpus(ws: &Workspace, out: &mut Outputs) -> Result<Manifest> {
    let dir = ws.corpus_dir();
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    let c = &ws.config.corpus;
    let built = gen_corpus(&ws.corpus_spec(), &dir).and_then(|(m, _)| {
        split_speakers(&m, c.eval_fraction, c.validation_fraction, ws.config.stage_seed("split"))
    });
    let m = match built {
        Ok(m) => m,
        Err(e) => {
            let _ = std::fs::remove_dir_all(&dir);
            return Err(e.into());
        }
    };
    write_atomic(&dir.join(MANIFEST_FILE), &m.to_jsonl())?;
    track_corpus(out, &m, &dir, true);
    Ok(m)
}

pub fn load_corpus(ws: &Workspace) -> Result<Manifest> {
    let path = ws.corpus_dir().join(MANIFEST_FILE);
    if !path.is_file() {
        bail!("corpus missing at {}: run gen-corpus first", path.display());
    }
    Ok(load_manifest(&path)?)
}

/// Loads the corpus, generating it first when absent.
pub fn ensure_corpus(ws: &Workspace, out: &mut Outputs) -> Result<Manifest> {
    if ws.corpus_dir().join(MANIFEST_FILE).is_file() {
        let m = load_corpus(ws)?;
        track_corpus(out, &m, &ws.corpus_dir(), false);
        Ok(m)
    } else {
        generate_corpus(ws, out)
    }
}

// -------------------------------------------------------------- features

pub fn extract_features(ws: &Workspace, manifest: &Manifest) -> Result<FeatureMap> {
    features::extract_all(manifest, &manifest.records, &ws.cache_dir())
}

/// Features of every record, failing when the cache has not been filled.
pub fn require_features(ws: &Workspace, manifest: &Manifest) -> Result<FeatureMap> {
    let dir = ws.cache_dir();
    if !features::is_cached(manifest, &dir)? {
        bail!("feature cache missing under {}: run extract-features first", dir.display());
    }
    extract_features(ws, manifest)
}

/// Log-mel spectrograms grouped by speaker, in id order.
pub fn speaker_set<'a>(records: impl IntoIterator<Item = &'a ManifestRecord>, feats: &FeatureMap) -> Result<SpeakerSet> {
    let mut by: BTreeMap<&str, Vec<&ManifestRecord>> = BTreeMap::new();
    for r in records {
        by.entry(r.speaker_id.as_str()).or_default().push(r);
    }
    let mut speakers = Vec::with_capacity(by.len());
    for (spk, mut recs) in by {
        recs.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
        let mels = recs
            .iter()
            .map(|r| mel_of(feats, r).cloned())
            .collect::<Result<Vec<_>>>()?;
        speakers.push((spk.to_string(), mels));
    }
    Ok(SpeakerSet { speakers })
}

fn mel_of<'a>(feats: &'a FeatureMap, r: &ManifestRecord) -> Result<&'a evsv_core::Tensor> {
    feats
        .get(&r.utterance_id)
        .map(|f| &f.mel)
        .ok_or_else(|| anyhow!("no features for {}", r.utterance_id))
}

// ------------------------------------------------------- speaker encoder

pub fn load_encoder(ws: &Workspace, path: &Path) -> Result<SpeakerEncoder> {
    let mut m = SpeakerEncoder::new(ws.config.sv.encoder_shape(), &mut SeededRng::new(0));
    read_checkpoint(path)
        .and_then(|ck| ck.load_into(&mut m))
        .with_context(|| format!("loading {}", path.display()))?;
    Ok(m)
}

/// Trains the speaker encoder on the training split of `manifest`, or
/// loads it when the checkpoint already exists.
pub fn ensure_encoder(
    ws: &Workspace,
    out: &mut Outputs,
    plan: &AugmentationPlan,
    manifest: &Manifest,
    feats: &FeatureMap,
) -> Result<SpeakerEncoder> {
    let path = ws.model_path(plan);
    let log_path = ws.sv_log_path(plan);
    if path.is_file() {
        out.reuse(path.clone());
        if log_path.is_file() {
            out.reuse(log_path);
        }
        return load_encoder(ws, &path);
    }
    let train = speaker_set(manifest.in_split(Split::Train), feats)?;
    let val = speaker_set(manifest.in_split(Split::Validation), feats)?;
    let res = train_sv(&train, Some(&val), &ws.config.sv, ws.config.stage_seed("sv"))?;
    let mut log = Vec::new();
    write_sv_log(&mut log, &res.log)?;
    out.write(&log_path, &log)?;
    out.write(&path, &Checkpoint::from_model(&res.model).encode())?;
    Ok(res.model)
}

// ------------------------------------------------------------ converters

/// JSON sidecar written next to every converter checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterSidecar {
    pub feature_kind: FeatureKind,
    pub target_emotion: Emotion,
    pub config: CycleGanConfig,
    pub seed: u64,
    pub content_hash: String,
}

fn sidecar_path(ck: &Path) -> PathBuf {
    ck.with_extension("json")
}

fn load_converter_model(path: &Path, kind: FeatureKind, target: Emotion) -> Result<CycleGanModel> {
    let sc: ConverterSidecar = serde_json::from_slice(
        &std::fs::read(sidecar_path(path)).with_context(|| format!("reading sidecar of {}", path.display()))?,
    )?;
    if sc.feature_kind != kind || sc.target_emotion != target {
        bail!("sidecar of {} describes a different model", path.display());
    }
    let ck = read_checkpoint(path)?;
    if ck.content_hash() != sc.content_hash {
        bail!("{} does not match its sidecar hash", path.display());
    }
    let mut m = CycleGanModel::new(kind, &sc.config, &mut SeededRng::new(0));
    ck.load_into(&mut m)?;
    Ok(m)
}

fn converter_ready(ws: &Workspace, e: Emotion) -> bool {
    [FeatureKind::Mcep24, FeatureKind::CwtF0].iter().all(|&k| {
        let p = ws.converter_path(e, k);
        p.is_file() && sidecar_path(&p).is_file()
    })
}

/// Loads trained converters for `emotions`; fails when any is missing.
pub fn load_converters(ws: &Workspace, out: &mut Outputs, emotions: &[Emotion]) -> Result<Vec<EmotionConverter>> {
    emotions
        .iter()
        .map(|&e| {
            if !converter_ready(ws, e) {
                bail!("{e} converter missing under {}: run train-converter first", ws.run_dir().display());
            }
            let mut load = |k| {
                let p = ws.converter_path(e, k);
                out.reuse(p.clone());
                out.reuse(sidecar_path(&p));
                let log = ws.converter_log_path(e, k);
                if log.is_file() {
                    out.reuse(log);
                }
                load_converter_model(&p, k, e)
            };
            Ok(EmotionConverter {
                target: e,
                spectrum: load(FeatureKind::Mcep24)?,
                prosody: load(FeatureKind::CwtF0)?,
            })
        })
        .collect()
}

fn write_converter(
    ws: &Workspace,
    out: &mut Outputs,
    target: Emotion,
    kind: FeatureKind,
    config: &CycleGanConfig,
    seed: u64,
    res: &evsv_core::converter::CycleGanTrainOutput,
) -> Result<()> {
    let path = ws.converter_path(target, kind);
    let ck = Checkpoint::from_model(&res.model);
    let sidecar = ConverterSidecar {
        feature_kind: kind,
        target_emotion: target,
        config: config.clone(),
        seed,
        content_hash: ck.content_hash(),
    };
    let mut log = Vec::new();
    write_cyclegan_log(&mut log, &res.log)?;
    out.write(ws.converter_log_path(target, kind), &log)?;
    out.write(&path, &ck.encode())?;
    out.write(sidecar_path(&path), &serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

/// Mean cosine similarity between each source and its conversion.
fn identity_score(
    encoder: &SpeakerEncoder,
    sources: &[(Waveform, DVector)],
    spectrum: &CycleGanModel,
    prosody: &CycleGanModel,
) -> evsv_core::Result<f64> {
    let sims = sources
        .par_iter()
        .map(|(w, v)| {
            let (conv, _) = convert_utterance(w, spectrum, prosody)?;
            let mel = mel_spectrogram(&conv)?.frames;
            encoder.embed(&mel)?.cosine(v)
        })
        .collect::<evsv_core::Result<Vec<f64>>>()?;
    Ok(sims.iter().sum::<f64>() / sims.len().max(1) as f64)
}

fn prosody_domain<'a>(recs: impl Iterator<Item = &'a ManifestRecord>, feats: &FeatureMap) -> Result<DomainData> {
    let mut d = DomainData::default();
    for r in recs {
        let f = feats.get(&r.utterance_id).ok_or_else(|| anyhow!("no features for {}", r.utterance_id))?;
        match prosody_frames(&f.f0) {
            Ok((frames, stats)) => {
                d.utterances.push(frames);
                d.f0_stats.push(stats);
            }
            Err(evsv_core::Error::NoVoicedFrames) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(d)
}

/// Trains (or loads) the spectrum and prosody models for every emotion.
/// `monitor` scores prosody checkpoints for early stopping.
pub fn ensure_converters(
    ws: &Workspace,
    out: &mut Outputs,
    manifest: &Manifest,
    feats: &FeatureMap,
    monitor: &SpeakerEncoder,
    emotions: &[Emotion],
) -> Result<Vec<EmotionConverter>> {
    let cfg = &ws.config.converter;
    let train = |e: Emotion| {
        let mut v: Vec<&ManifestRecord> = manifest
            .in_split(Split::Train)
            .filter(|r| r.emotion == e && !r.synthetic)
            .collect();
        v.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
        v
    };
    let mut val_neutral: Vec<&ManifestRecord> = manifest
        .in_split(Split::Validation)
        .filter(|r| r.emotion == Emotion::Neutral)
        .collect();
    val_neutral.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    val_neutral.truncate(cfg.monitor_utterances);
    let sources = val_neutral
        .iter()
        .map(|r| {
            let w = manifest.read_audio(r)?;
            let v = monitor.embed(mel_of(feats, r)?)?;
            Ok((w, v))
        })
        .collect::<Result<Vec<_>>>()?;

    let neutral = train(Emotion::Neutral);
    let mut convs = Vec::new();
    for &target in emotions {
        if converter_ready(ws, target) {
            convs.extend(load_converters(ws, out, &[target])?);
            continue;
        }
        let emo = train(target);
        let tag = |k: FeatureKind| format!("converter/{}/{}", target.as_str(), k.as_str());

        let mcep = |recs: &[&ManifestRecord]| -> Result<DomainData> {
            Ok(DomainData::new(
                recs.iter()
                    .map(|r| {
                        feats
                            .get(&r.utterance_id)
                            .map(|f| f.mcep.clone())
                            .ok_or_else(|| anyhow!("no features for {}", r.utterance_id))
                    })
                    .collect::<Result<_>>()?,
            ))
        };
        let seed = ws.config.stage_seed(&tag(FeatureKind::Mcep24));
        let spec = train_cyclegan(
            &mcep(&neutral)?,
            &mcep(&emo)?,
            FeatureKind::Mcep24,
            &cfg.spectrum,
            seed,
            TrainHooks::default(),
        )
        .with_context(|| format!("{target} spectrum model"))?;
        write_converter(ws, out, target, FeatureKind::Mcep24, &cfg.spectrum, seed, &spec)?;

        let score = |p: &CycleGanModel| identity_score(monitor, &sources, &spec.model, p);
        let hooks = TrainHooks {
            observer: None,
            monitor: if sources.is_empty() { None } else { Some(&score) },
        };
        let seed = ws.config.stage_seed(&tag(FeatureKind::CwtF0));
        let pros = train_cyclegan(
            &prosody_domain(neutral.iter().copied(), feats)?,
            &prosody_domain(emo.iter().copied(), feats)?,
            FeatureKind::CwtF0,
            &cfg.prosody,
            seed,
            hooks,
        )
        .with_context(|| format!("{target} prosody model"))?;
        write_converter(ws, out, target, FeatureKind::CwtF0, &cfg.prosody, seed, &pros)?;
        convs.push(EmotionConverter {
            target,
            spectrum: spec.model,
            prosody: pros.model,
        });
    }
    Ok(convs)
}

// ---------------------------------------------------------- augmentation

/// Builds the plan's training set (or reloads it) and extracts features of
/// its synthetic utterances into `feats`.
pub fn ensure_augmented(
    ws: &Workspace,
    out: &mut Outputs,
    manifest: &Manifest,
    plan: &AugmentationPlan,
    converters: &[EmotionConverter],
    feats: &mut FeatureMap,
) -> Result<Manifest> {
    let dir = ws.run_dir().join("augmented").join(plan_slug(plan));
    let mpath = dir.join(MANIFEST_FILE);
    let aug = if mpath.is_file() {
        let m = load_manifest(&mpath)?;
        for r in m.records.iter().filter(|r| r.synthetic) {
            out.reuse(m.resolve(r));
        }
        m
    } else {
        let convs = converters.to_vec();
        let m = build_augmented_set(manifest, plan, &convs, &dir, ws.config.stage_seed("augment"))?;
        for r in m.records.iter().filter(|r| r.synthetic) {
            out.track(m.resolve(r));
        }
        // paths are absolute, so the manifest itself stays out of the hashes
        write_atomic(&mpath, &m.to_jsonl())?;
        m
    };
    let synth: Vec<&ManifestRecord> = aug.records.iter().filter(|r| r.synthetic).collect();
    feats.extend(features::extract_all(&aug, synth, &ws.cache_dir())?);
    Ok(aug)
}

// ------------------------------------------------------------ evaluation

/// Spoofing-style check: threshold calibrated on enrolled-speaker
/// impostors, then applied to media-speaker trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarCheck {
    pub target_far: f64,
    pub threshold: f64,
    /// FAR at `threshold` on the calibration impostors.
    pub dev_far: f64,
    pub media_trials: usize,
    pub media_accepts: usize,
    pub media_far: f64,
    pub within_target: bool,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EerReport,
    pub trials: TrialScoreSet,
    pub media_trials: TrialScoreSet,
    pub far: Option<FarCheck>,
    pub profiles: Vec<SpeakerProfile>,
}

/// Neutral enrollment utterances of an eval speaker: a seeded shuffle of
/// its neutral pool, first `k`. Identical for every model.
pub fn enrollment_ids(ws: &Workspace, manifest: &Manifest, speaker: &str) -> Vec<String> {
    let mut ids: Vec<String> = manifest
        .records
        .iter()
        .filter(|r| r.speaker_id == speaker && r.emotion == Emotion::Neutral && !r.synthetic)
        .map(|r| r.utterance_id.clone())
        .collect();
    ids.sort();
    SeededRng::new(ws.config.stage_seed("enroll")).fork(speaker).shuffle(&mut ids);
    ids.truncate(ws.config.evaluation.enroll_utterances);
    ids
}

fn embed_all(model: &SpeakerEncoder, recs: &[&ManifestRecord], feats: &FeatureMap) -> Result<BTreeMap<String, DVector>> {
    let vs = recs
        .par_iter()
        .map(|r| Ok(model.embed(mel_of(feats, r)?)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(recs.iter().map(|r| r.utterance_id.clone()).zip(vs).collect())
}

/// Enrolls every eval speaker and scores every remaining eval utterance
/// against every profile; media utterances are scored as impostors.
pub fn evaluate_model(ws: &Workspace, model: &SpeakerEncoder, manifest: &Manifest, feats: &FeatureMap) -> Result<Evaluation> {
    let eval: Vec<&ManifestRecord> = manifest.in_split(Split::Eval).collect();
    let media: Vec<&ManifestRecord> = manifest.in_split(Split::Media).collect();
    let mut all = eval.clone();
    all.extend(&media);
    let emb = embed_all(model, &all, feats)?;

    let mut profiles = Vec::new();
    let mut enrolled = std::collections::BTreeSet::new();
    for spk in manifest.speakers_in(Split::Eval) {
        let ids = enrollment_ids(ws, manifest, spk);
        let vs: Vec<DVector> = ids.iter().map(|id| emb[id].clone()).collect();
        profiles.push(enroll_dvectors(spk, &vs)?);
        enrolled.extend(ids);
    }
    let score = |recs: &[&ManifestRecord]| -> Result<TrialScoreSet> {
        let mut trials = Vec::new();
        for r in recs.iter().filter(|r| !enrolled.contains(&r.utterance_id)) {
            for p in &profiles {
                let s = p.centroid.cosine(&emb[&r.utterance_id])?;
                trials.push(Trial::new(&p.speaker_id, &r.speaker_id, r.emotion, s));
            }
        }
        Ok(TrialScoreSet { trials })
    };
    let trials = score(&eval)?;
    let media_trials = score(&media)?;
    let report = per_emotion_breakdown(&trials)?;

    let (_, dev) = trials.split();
    let far = if media_trials.trials.is_empty() {
        None
    } else {
        let target = ws.config.evaluation.far_target;
        let threshold = calibrate_threshold(&dev, target)?;
        let (_, media_scores) = media_trials.split();
        let media_far = far_at_threshold(&media_scores, threshold)?;
        Some(FarCheck {
            target_far: target,
            threshold,
            dev_far: far_at_threshold(&dev, threshold)?,
            media_trials: media_scores.len(),
            media_accepts: media_scores.iter().filter(|&&s| s >= threshold).count(),
            media_far,
            within_target: media_far <= target,
        })
    };
    Ok(Evaluation {
        report,
        trials,
        media_trials,
        far,
        profiles,
    })
}

/// Neutral vs authentic and neutral vs synthetic similarity per eval
/// speaker, using `model`. `None` when no converter targets the configured
/// emotion.
pub fn similarity_report(
    ws: &Workspace,
    model: &SpeakerEncoder,
    manifest: &Manifest,
    feats: &FeatureMap,
    converters: &[EmotionConverter],
) -> Result<Option<CosineSimilarityReport>> {
    let emo = ws.config.evaluation.similarity_emotion;
    let Some(conv) = converters.iter().find(|c| c.target == emo) else {
        return Ok(None);
    };
    let by = manifest.by_speaker(|r| r.split == Split::Eval && !r.synthetic);
    let mut inputs = Vec::new();
    for (spk, mut recs) in by {
        recs.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
        let neutral: Vec<&ManifestRecord> = recs.iter().copied().filter(|r| r.emotion == Emotion::Neutral).collect();
        let authentic: Vec<&ManifestRecord> = recs.iter().copied().filter(|r| r.emotion == emo).collect();
        if neutral.is_empty() || authentic.is_empty() {
            continue;
        }
        let synthetic = neutral
            .iter()
            .take(ws.config.evaluation.similarity_conversions)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|r| {
                let w = manifest.read_audio(r)?;
                let (out, _) = convert_utterance(&w, &conv.spectrum, &conv.prosody)?;
                Ok(mel_spectrogram(&out)?.frames)
            })
            .collect::<Result<Vec<_>>>()?;
        let mels = |rs: &[&ManifestRecord]| rs.iter().map(|r| mel_of(feats, r).cloned()).collect::<Result<Vec<_>>>();
        inputs.push(SimilarityInput {
            speaker_id: spk.to_string(),
            neutral: mels(&neutral)?,
            authentic: mels(&authentic)?,
            synthetic,
        });
    }
    if inputs.is_empty() {
        return Ok(None);
    }
    Ok(Some(cosine_similarity_report(model, emo, &inputs)?))
}

/// 2-D projection of one eval speaker's utterances, labelled by emotion,
/// plus conversions of its first neutral utterances labelled
/// `synthetic_<emotion>`.
pub fn projection(
    ws: &Workspace,
    model: &SpeakerEncoder,
    manifest: &Manifest,
    feats: &FeatureMap,
    converters: &[EmotionConverter],
) -> Result<Vec<ProjectedPoint>> {
    let Some(spk) = manifest.speakers_in(Split::Eval).into_iter().next().map(str::to_string) else {
        bail!("no eval speakers to project");
    };
    let mut recs: Vec<&ManifestRecord> = manifest
        .in_split(Split::Eval)
        .filter(|r| r.speaker_id == spk && !r.synthetic)
        .collect();
    recs.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for r in &recs {
        vectors.push(model.embed(mel_of(feats, r)?)?.values().to_vec());
        labels.push(r.emotion.as_str().to_string());
    }
    let neutral: Vec<&&ManifestRecord> = recs
        .iter()
        .filter(|r| r.emotion == Emotion::Neutral)
        .take(ws.config.evaluation.similarity_conversions)
        .collect();
    for c in converters {
        for r in &neutral {
            let (w, _) = convert_utterance(&manifest.read_audio(r)?, &c.spectrum, &c.prosody)?;
            vectors.push(model.embed(&mel_spectrogram(&w)?.frames)?.values().to_vec());
            labels.push(format!("synthetic_{}", c.target.as_str()));
        }
    }
    Ok(project_embeddings_2d(&vectors, &labels)?)
}
