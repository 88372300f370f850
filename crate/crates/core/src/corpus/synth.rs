//! Parametric source-filter toy speakers with emotion transforms.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Manifest, ManifestRecord, Split, MANIFEST_FILE};
use crate::dsp::mcep::log_mel_to_mcep;
use crate::dsp::mel::{hz_to_mel, MelFilterbank, DEFAULT_FRAME_MS, DEFAULT_HOP_MS, N_MELS};
use crate::dsp::pitch::{F0_MAX_HZ, F0_MIN_HZ};
use crate::dsp::{synthesize, F0Contour, McepSequence, Waveform, DEFAULT_SAMPLE_RATE};
use crate::emotion::Emotion;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// Training-partition utterance counts per emotion of the reference corpus.
const TABLE1_COUNTS: [(Emotion, f64); 5] = [
    (Emotion::Neutral, 118_948.0),
    (Emotion::Calm, 3_487.0),
    (Emotion::Angry, 751.0),
    (Emotion::Happy, 1_344.0),
    (Emotion::Sad, 7_598.0),
];

const BASE_LEVEL: f64 = 0.45;
/// Per-utterance recording gain spread, ±3 dB in log amplitude.
const GAIN_JITTER: f64 = 0.345;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpeakerSpec {
    pub speaker_id: String,
    pub gender: Gender,
    pub base_f0_hz: f64,
    /// Three resonance frequencies, strictly increasing.
    pub formants_hz: [f64; 3],
    /// Standard deviation of the slow log-F0 wander.
    pub f0_jitter: f64,
    /// Overall loudness multiplier.
    pub loudness: f64,
}

impl SyntheticSpeakerSpec {
    pub fn sample(speaker_id: impl Into<String>, rng: &mut SeededRng) -> Self {
        let gender = if rng.uniform() < 0.5 { Gender::Male } else { Gender::Female };
        let (f0_lo, f0_hi, formant_scale) = match gender {
            Gender::Male => (90.0, 150.0, 1.0),
            Gender::Female => (170.0, 260.0, 1.17),
        };
        let base_f0_hz = rng.uniform_range(f0_lo, f0_hi);
        let tract = rng.uniform_range(0.88, 1.1) * formant_scale;
        let f1 = 520.0 * tract * rng.uniform_range(0.93, 1.07);
        let f2 = 1480.0 * tract * rng.uniform_range(0.93, 1.07);
        let f3 = 2500.0 * tract * rng.uniform_range(0.95, 1.05);
        Self {
            speaker_id: speaker_id.into(),
            gender,
            base_f0_hz,
            formants_hz: [f1, f2, f3],
            f0_jitter: rng.uniform_range(0.01, 0.03),
            loudness: rng.uniform_range(0.85, 1.15),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b, c] = self.formants_hz;
        if !(a > 0.0 && a < b && b < c) {
            return Err(Error::Config(format!(
                "{}: formants must be strictly increasing, got {:?}",
                self.speaker_id, self.formants_hz
            )));
        }
        if !(90.0..=260.0).contains(&self.base_f0_hz) {
            return Err(Error::Config(format!(
                "{}: base F0 {} Hz outside [90, 260]",
                self.speaker_id, self.base_f0_hz
            )));
        }
        if self.f0_jitter < 0.0 || self.loudness <= 0.0 {
            return Err(Error::Config(format!("{}: invalid jitter or loudness", self.speaker_id)));
        }
        Ok(())
    }
}

/// Prosodic and spectral modification that turns neutral speech into an
/// emotion. High-arousal emotions raise pitch, widen its range, add energy
/// and speed up; low-arousal ones do the opposite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionTransform {
    pub emotion: Emotion,
    pub f0_shift_factor: f64,
    pub f0_range_scale: f64,
    pub energy_scale: f64,
    pub rate_scale: f64,
}

impl EmotionTransform {
    pub fn for_emotion(emotion: Emotion) -> Self {
        let (f0_shift_factor, f0_range_scale, energy_scale, rate_scale) = match emotion {
            Emotion::Neutral => (1.0, 1.0, 1.0, 1.0),
            Emotion::Angry => (1.3, 1.5, 1.4, 1.15),
            Emotion::Happy => (1.2, 1.4, 1.3, 1.1),
            Emotion::Sad => (0.88, 0.6, 0.7, 0.85),
            Emotion::Calm => (0.93, 0.75, 0.8, 0.9),
        };
        Self {
            emotion,
            f0_shift_factor,
            f0_range_scale,
            energy_scale,
            rate_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.f0_shift_factor, self.f0_range_scale, self.energy_scale, self.rate_scale];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("{} transform factors must be > 0", self.emotion)));
        }
        Ok(())
    }

    /// Change of spectral slope in log power per kHz; louder speech is
    /// brighter.
    fn tilt_change(&self) -> f64 {
        0.5 * self.energy_scale.ln()
    }
}

/// Fractions proportional to the reference training partition.
pub fn table1_mix() -> BTreeMap<Emotion, f64> {
    let total: f64 = TABLE1_COUNTS.iter().map(|(_, c)| c).sum();
    TABLE1_COUNTS.iter().map(|&(e, c)| (e, c / total)).collect()
}

/// Integer counts summing to `total` with the given proportions; leftover
/// units go to the largest fractional parts (ties broken by emotion order).
pub fn largest_remainder(total: usize, weights: &BTreeMap<Emotion, f64>) -> BTreeMap<Emotion, usize> {
    let sum: f64 = weights.values().sum();
    let mut out = BTreeMap::new();
    let mut rem = Vec::new();
    let mut used = 0;
    for (&e, &w) in weights {
        let exact = total as f64 * w / sum;
        let floor = exact.floor() as usize;
        used += floor;
        out.insert(e, floor);
        rem.push((exact - floor as f64, e));
    }
    rem.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, e) in rem.into_iter().take(total.saturating_sub(used)) {
        *out.get_mut(&e).expect("present") += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EmotionMix {
    /// The same counts for every speaker.
    PerSpeaker(BTreeMap<Emotion, usize>),
    /// Corpus-wide proportions over `speakers × utterances_per_speaker`
    /// utterances, realized exactly and dealt round-robin to speakers.
    Proportional {
        utterances_per_speaker: usize,
        fractions: BTreeMap<Emotion, f64>,
    },
}

impl Default for EmotionMix {
    fn default() -> Self {
        EmotionMix::Proportional {
            utterances_per_speaker: 60,
            fractions: table1_mix(),
        }
    }
}

impl EmotionMix {
    /// Per-speaker emotion lists, in a fixed order.
    fn assign(&self, speakers: usize) -> Vec<Vec<Emotion>> {
        match self {
            EmotionMix::PerSpeaker(counts) => {
                let list: Vec<Emotion> = counts
                    .iter()
                    .flat_map(|(&e, &n)| std::iter::repeat(e).take(n))
                    .collect();
                vec![list; speakers]
            }
            EmotionMix::Proportional {
                utterances_per_speaker,
                fractions,
            } => {
                let counts = largest_remainder(speakers * utterances_per_speaker, fractions);
                let mut out = vec![Vec::new(); speakers];
                let mut next = 0;
                for (&e, &n) in &counts {
                    for _ in 0..n {
                        out[next % speakers].push(e);
                        next += 1;
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    pub num_speakers: usize,
    /// Extra speakers tagged as media speech.
    pub media_speakers: usize,
    pub mix: EmotionMix,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            num_speakers: 24,
            media_speakers: 0,
            mix: EmotionMix::default(),
            min_duration_s: 1.0,
            max_duration_s: 2.0,
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_speakers < 2 {
            return Err(Error::SplitInfeasible(format!(
                "need at least 2 speakers, got {}",
                self.num_speakers
            )));
        }
        if !(self.min_duration_s >= 0.5 && self.min_duration_s <= self.max_duration_s) {
            return Err(Error::Config("durations must satisfy 0.5 ≤ min ≤ max".into()));
        }
        if let EmotionMix::Proportional { fractions, .. } = &self.mix {
            if fractions.values().any(|f| !(*f >= 0.0)) || fractions.values().sum::<f64>() <= 0.0 {
                return Err(Error::Config("mix fractions must be ≥ 0 with a positive sum".into()));
            }
        }
        Ok(())
    }
}

/// Frame-level plan of one utterance before synthesis.
struct UtterancePlan {
    log_mel: Tensor,
    f0: Vec<f64>,
    gain: f64,
}

fn band_mels() -> Vec<f64> {
    let fb = MelFilterbank::new(N_MELS, 512, DEFAULT_SAMPLE_RATE);
    fb.centers_hz().iter().map(|&f| hz_to_mel(f)).collect()
}

/// Syllable-like voiced runs separated by short unvoiced gaps.
fn syllables(frames: usize, rate: f64, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut t = 5.min(frames / 4);
    let end = frames.saturating_sub(5);
    while t < end {
        let len = (rng.uniform_range(12.0, 26.0) / rate).round() as usize;
        let stop = (t + len.max(4)).min(end);
        out.push((t, stop));
        t = stop + (rng.uniform_range(3.0, 9.0) / rate).round().max(2.0) as usize;
    }
    out
}

fn plan_utterance(
    spk: &SyntheticSpeakerSpec,
    tr: &EmotionTransform,
    duration_s: f64,
    mels: &[f64],
    rng: &mut SeededRng,
) -> UtterancePlan {
    let frames = ((duration_s * 1000.0 / DEFAULT_HOP_MS) / tr.rate_scale).round().max(40.0) as usize;
    let sylls = syllables(frames, tr.rate_scale, rng);

    // log-F0: declination, one accent per stressed syllable, slow wander
    let base = (spk.base_f0_hz * tr.f0_shift_factor).ln();
    let mut accent = vec![0.0; frames];
    for &(a, b) in &sylls {
        if rng.uniform() < 0.6 {
            let amp = rng.uniform_range(0.04, 0.14);
            let c = (a + b) as f64 / 2.0;
            let w = (b - a) as f64 / 2.0;
            for (t, v) in accent.iter_mut().enumerate() {
                *v += amp * (-((t as f64 - c) / w).powi(2)).exp();
            }
        }
    }
    let mut wander = 0.0;
    let mut log_f0 = Vec::with_capacity(frames);
    for (t, a) in accent.iter().enumerate() {
        wander = 0.9 * wander + spk.f0_jitter * rng.normal() * 0.44;
        let decl = 0.08 * (1.0 - 2.0 * t as f64 / frames as f64);
        log_f0.push(base + tr.f0_range_scale * (decl + a + wander));
    }

    let mut voiced = vec![false; frames];
    let mut vowel = vec![[0.0; 3]; frames];
    let mut envelope = vec![-4.0; frames];
    for &(a, b) in &sylls {
        let shape = [rng.uniform_range(-1.0, 1.0), rng.uniform_range(-1.0, 1.0), rng.uniform_range(-1.0, 1.0)];
        for t in a..b {
            voiced[t] = true;
            vowel[t] = shape;
            let x = (t - a) as f64 / (b - a) as f64;
            envelope[t] = 2.0 * (std::f64::consts::PI * x).sin().sqrt();
        }
    }

    let tilt = -0.55 + tr.tilt_change();
    let widths = [110.0, 150.0, 190.0];
    let amps = [3.0, 2.4, 1.6];
    let mut log_mel = Tensor::zeros(&[frames, N_MELS]);
    for t in 0..frames {
        let row = log_mel.row_mut(t);
        for (b, v) in row.iter_mut().enumerate() {
            let khz = crate::dsp::mel::mel_to_hz(mels[b]) / 1000.0;
            *v = if voiced[t] {
                let mut s = envelope[t] + tilt * khz;
                for k in 0..3 {
                    let f = spk.formants_hz[k] * (1.0 + 0.08 * vowel[t][k]);
                    let d = (mels[b] - hz_to_mel(f)) / widths[k];
                    s += amps[k] * (-d * d).exp();
                }
                s
            } else {
                // weak fricative noise centred near 5 kHz
                let d = (khz - 5.0) / 1.5;
                envelope[t] - 1.0 + 1.2 * (-d * d).exp()
            };
        }
    }
    let f0 = log_f0
        .iter()
        .zip(&voiced)
        .map(|(&l, &v)| if v { l.exp().clamp(F0_MIN_HZ, F0_MAX_HZ) } else { 0.0 })
        .collect();
    UtterancePlan {
        log_mel,
        f0,
        gain: BASE_LEVEL * tr.energy_scale * spk.loudness * rng.uniform_range(-GAIN_JITTER, GAIN_JITTER).exp(),
    }
}

/// Renders one utterance of `spk` in `emotion`, seeded by `rng`.
pub fn synthesize_utterance(
    spk: &SyntheticSpeakerSpec,
    emotion: Emotion,
    duration_s: f64,
    rng: &mut SeededRng,
) -> Result<Waveform> {
    let tr = EmotionTransform::for_emotion(emotion);
    let plan = plan_utterance(spk, &tr, duration_s, &band_mels(), rng);
    let mcep = McepSequence {
        coeffs: log_mel_to_mcep(&plan.log_mel),
        frame_ms: DEFAULT_FRAME_MS,
        hop_ms: DEFAULT_HOP_MS,
    };
    let f0 = F0Contour::from_f0(plan.f0, DEFAULT_HOP_MS)?;
    Ok(synthesize(&mcep, &f0)?.scaled(plan.gain / crate::dsp::synth::OUTPUT_PEAK))
}

fn speaker_ids(spec: &CorpusSpec) -> Vec<(String, Split)> {
    let mut ids: Vec<(String, Split)> = (0..spec.num_speakers)
        .map(|i| (format!("spk{i:03}"), Split::Train))
        .collect();
    ids.extend((0..spec.media_speakers).map(|i| (format!("media{i:02}"), Split::Media)));
    ids
}

/// Generates the corpus under `out_dir` (WAVs in `wav/<speaker>/` plus
/// `manifest.jsonl`). All speakers start in the training split.
pub fn gen_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<(Manifest, Vec<SyntheticSpeakerSpec>)> {
    spec.validate()?;
    let root = SeededRng::new(spec.seed);
    let ids = speaker_ids(spec);
    let speakers: Vec<SyntheticSpeakerSpec> = ids
        .iter()
        .map(|(id, _)| SyntheticSpeakerSpec::sample(id.clone(), &mut root.fork(&format!("speaker/{id}"))))
        .collect();
    let mut emotions = spec.mix.assign(spec.num_speakers);
    // media speakers follow the first speaker's mix
    let media_mix = emotions.first().cloned().unwrap_or_default();
    emotions.extend(std::iter::repeat(media_mix).take(spec.media_speakers));

    let mut jobs = Vec::new();
    for ((spk, (_, split)), emos) in speakers.iter().zip(&ids).zip(&emotions) {
        let mut per: BTreeMap<Emotion, usize> = BTreeMap::new();
        for &e in emos {
            let k = per.entry(e).or_default();
            let uid = format!("{}_{}_{:03}", spk.speaker_id, e.as_str(), *k);
            *k += 1;
            jobs.push((spk, *split, e, uid));
        }
    }
    for spk in &speakers {
        std::fs::create_dir_all(out_dir.join("wav").join(&spk.speaker_id))?;
    }
    let records = jobs
        .par_iter()
        .map(|(spk, split, e, uid)| {
            let mut rng = root.fork(&format!("utt/{uid}"));
            let dur = rng.uniform_range(spec.min_duration_s, spec.max_duration_s);
            let w = synthesize_utterance(spk, *e, dur, &mut rng)?;
            let rel = Path::new("wav").join(&spk.speaker_id).join(format!("{uid}.wav"));
            w.write_wav(&out_dir.join(&rel))?;
            Ok(ManifestRecord {
                utterance_id: uid.clone(),
                speaker_id: spk.speaker_id.clone(),
                emotion: *e,
                path: rel,
                split: *split,
                synthetic: false,
                source_utterance_id: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest::new(out_dir, records);
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    let specs = serde_json::to_vec_pretty(&speakers)?;
    std::fs::write(out_dir.join("speakers.json"), specs)?;
    Ok((manifest, speakers))
}
