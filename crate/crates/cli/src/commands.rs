//! One function per subcommand. Each writes a run record on success and
//! removes the files it wrote on failure.

use std::path::Path;

use anyhow::{bail, Result};

use evsv_core::converter::{EmotionConverter, UtteranceConverter};
use evsv_core::corpus::{AugmentationPlan, Manifest};
use evsv_core::dsp::Waveform;
use evsv_core::encoder::SpeakerEncoder;
use evsv_core::Emotion;

use crate::features::FeatureMap;
use crate::pipeline::{self as p, Timings, Workspace};
use crate::record::{write_atomic, Outputs, RunRecord};
use crate::report::{load_results, write_reports, ExperimentResults, ModelResult};

fn run<T>(
    ws: &Workspace,
    command: &str,
    f: impl FnOnce(&mut Outputs, &mut Timings) -> Result<T>,
) -> Result<(RunRecord, T)> {
    let mut out = Outputs::new(&ws.root);
    let mut timings = Timings::default();
    let res = f(&mut out, &mut timings).and_then(|v| Ok((p::finish_record(ws, &mut out, command, timings)?, v)));
    if res.is_err() {
        out.remove_written();
    }
    res
}

pub fn gen_corpus(ws: &Workspace) -> Result<(RunRecord, Manifest)> {
    run(ws, "gen-corpus", |out, t| t.stage("corpus", || p::generate_corpus(ws, out)))
}

pub fn extract_features(ws: &Workspace) -> Result<(RunRecord, usize)> {
    run(ws, "extract-features", |_, t| {
        let m = t.stage("corpus", || p::load_corpus(ws))?;
        let feats = t.stage("features", || p::extract_features(ws, &m))?;
        Ok(feats.len())
    })
}

fn baseline_encoder(ws: &Workspace, out: &mut Outputs, t: &mut Timings, m: &Manifest, feats: &FeatureMap) -> Result<SpeakerEncoder> {
    let plan = AugmentationPlan::baseline();
    let aug = t.stage("augment", || {
        let mut f = feats.clone();
        p::ensure_augmented(ws, out, m, &plan, &[], &mut f)
    })?;
    t.stage("train-sv", || p::ensure_encoder(ws, out, &plan, &aug, feats))
}

/// Trains the baseline encoder (the prosody monitor) when missing, then
/// every configured converter.
pub fn train_converter(ws: &Workspace) -> Result<(RunRecord, Vec<EmotionConverter>)> {
    run(ws, "train-converter", |out, t| {
        let m = t.stage("corpus", || p::load_corpus(ws))?;
        let feats = t.stage("features", || p::require_features(ws, &m))?;
        let monitor = baseline_encoder(ws, out, t, &m, &feats)?;
        t.stage("train-converter", || {
            p::ensure_converters(ws, out, &m, &feats, &monitor, &ws.config.converter.emotions)
        })
    })
}

fn plan_emotions(plan: &AugmentationPlan) -> Vec<Emotion> {
    plan.synthetic.keys().copied().collect()
}

fn train_plans(
    ws: &Workspace,
    out: &mut Outputs,
    t: &mut Timings,
    m: &Manifest,
    feats: &mut FeatureMap,
    plans: &[AugmentationPlan],
    converters: &[EmotionConverter],
) -> Result<Vec<(AugmentationPlan, SpeakerEncoder)>> {
    let mut models = Vec::new();
    for plan in plans {
        let aug = t.stage("augment", || p::ensure_augmented(ws, out, m, plan, converters, feats))?;
        let model = t.stage("train-sv", || p::ensure_encoder(ws, out, plan, &aug, feats))?;
        models.push((plan.clone(), model));
    }
    Ok(models)
}

/// Trains one encoder per plan; augmented plans need trained converters.
pub fn train_sv(ws: &Workspace, plans: &[AugmentationPlan]) -> Result<(RunRecord, Vec<String>)> {
    run(ws, "train-sv", |out, t| {
        let m = t.stage("corpus", || p::load_corpus(ws))?;
        let mut feats = t.stage("features", || p::require_features(ws, &m))?;
        let mut emotions: Vec<Emotion> = plans.iter().flat_map(plan_emotions).collect();
        emotions.sort();
        emotions.dedup();
        let convs = t.stage("load-converters", || p::load_converters(ws, out, &emotions))?;
        let models = train_plans(ws, out, t, &m, &mut feats, plans, &convs)?;
        Ok(models.iter().map(|(pl, _)| pl.to_string()).collect())
    })
}

fn evaluate_models(
    ws: &Workspace,
    out: &mut Outputs,
    t: &mut Timings,
    m: &Manifest,
    feats: &FeatureMap,
    models: &[(AugmentationPlan, SpeakerEncoder)],
    converters: &[EmotionConverter],
    absolute: bool,
) -> Result<ExperimentResults> {
    let mut results = Vec::new();
    for (plan, model) in models {
        let ev = t.stage("evaluate", || p::evaluate_model(ws, model, m, feats))?;
        results.push(ModelResult {
            plan: plan.clone(),
            label: plan.describe(),
            eer: ev.report,
            far: ev.far,
        });
    }
    let baseline = &models.first().expect("baseline listed first").1;
    let similarity = t.stage("similarity", || p::similarity_report(ws, baseline, m, feats, converters))?;
    let last = &models.last().expect("non-empty").1;
    let points = t.stage("projection", || p::projection(ws, last, m, feats, converters))?;
    let res = ExperimentResults {
        config_hash: ws.config.hash(),
        models: results,
        similarity,
    };
    t.stage("report", || write_reports(ws, out, &res, Some(&points), absolute))?;
    Ok(res)
}

fn available_converters(ws: &Workspace, out: &mut Outputs) -> Result<Vec<EmotionConverter>> {
    let mut v = Vec::new();
    for &e in &ws.config.converter.emotions {
        if let Ok(mut c) = p::load_converters(ws, out, &[e]) {
            v.append(&mut c);
        }
    }
    Ok(v)
}

/// Evaluates the encoders already trained for every configured plan.
pub fn evaluate(ws: &Workspace, absolute: bool) -> Result<(RunRecord, ExperimentResults)> {
    run(ws, "evaluate", |out, t| {
        let m = t.stage("corpus", || p::load_corpus(ws))?;
        let feats = t.stage("features", || p::require_features(ws, &m))?;
        let mut models = Vec::new();
        for plan in ws.config.plans() {
            let path = ws.model_path(&plan);
            if !path.is_file() {
                bail!("no encoder for plan {plan} at {}: run train-sv first", path.display());
            }
            out.reuse(path.clone());
            models.push((plan, p::load_encoder(ws, &path)?));
        }
        let convs = available_converters(ws, out)?;
        evaluate_models(ws, out, t, &m, &feats, &models, &convs, absolute)
    })
}

/// Every stage end to end, reusing artifacts already present.
pub fn run_experiment(ws: &Workspace, absolute: bool) -> Result<(RunRecord, ExperimentResults)> {
    ws.config.validate_plans()?;
    run(ws, "run-experiment", |out, t| {
        let m = t.stage("corpus", || p::ensure_corpus(ws, out))?;
        let mut feats = t.stage("features", || p::extract_features(ws, &m))?;
        let monitor = baseline_encoder(ws, out, t, &m, &feats)?;
        let convs = t.stage("train-converter", || {
            p::ensure_converters(ws, out, &m, &feats, &monitor, &ws.config.converter.emotions)
        })?;
        let models = train_plans(ws, out, t, &m, &mut feats, &ws.config.plans(), &convs)?;
        evaluate_models(ws, out, t, &m, &feats, &models, &convs, absolute)
    })
}

/// Converts one WAV file with the trained converter for `emotion`.
pub fn convert(ws: &Workspace, input: &Path, emotion: Emotion, output: &Path) -> Result<()> {
    let mut out = Outputs::new(&ws.root);
    let convs = p::load_converters(ws, &mut out, &[emotion])?;
    let w = Waveform::read_wav(input)?;
    let conv = convs.convert(&w, emotion)?;
    let tmp = output.with_extension("wav.tmp");
    conv.write_wav(&tmp)?;
    let bytes = std::fs::read(&tmp)?;
    std::fs::remove_file(&tmp)?;
    write_atomic(output, &bytes)
}

/// Renders the stored results as text.
pub fn report(ws: &Workspace, absolute: bool) -> Result<String> {
    load_results(ws)?.render_all(absolute)
}
