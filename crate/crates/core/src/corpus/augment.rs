//! Per-speaker augmentation plans such as `50n+10a+10h`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Manifest, ManifestRecord, Split};
use crate::converter::UtteranceConverter;
use crate::emotion::Emotion;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Training-set recipe applied to every training speaker.
///
/// Grammar: `+`-separated terms. `<N>n` keeps N real neutral utterances,
/// `alln` keeps all of them, `real` passes authentic emotional utterances
/// through, and `all` is `alln+real`. `<k>a`, `<k>h`, `<k>s`, `<k>c` add k
/// synthetic angry, happy, sad or calm utterances converted from the
/// speaker's kept neutral pool. `baseline` is `alln`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AugmentationPlan {
    /// `None` keeps every neutral utterance.
    pub n_neutral: Option<usize>,
    pub include_authentic: bool,
    pub synthetic: BTreeMap<Emotion, usize>,
}

impl AugmentationPlan {
    pub fn baseline() -> Self {
        Self {
            n_neutral: None,
            include_authentic: false,
            synthetic: BTreeMap::new(),
        }
    }

    pub fn synthetic_total(&self) -> usize {
        self.synthetic.values().sum()
    }

    pub fn is_baseline(&self) -> bool {
        *self == Self::baseline()
    }

    /// Human-readable form, e.g. "50 neutral + 10 angry + 10 happy".
    pub fn describe(&self) -> String {
        let mut parts = vec![match self.n_neutral {
            Some(n) => format!("{n} neutral"),
            None => "all neutral".to_string(),
        }];
        if self.include_authentic {
            parts.push("authentic emotional".into());
        }
        for (e, k) in &self.synthetic {
            parts.push(format!("{k} {e}"));
        }
        parts.join(" + ")
    }
}

fn emotion_code(e: Emotion) -> char {
    match e {
        Emotion::Neutral => 'n',
        Emotion::Angry => 'a',
        Emotion::Happy => 'h',
        Emotion::Sad => 's',
        Emotion::Calm => 'c',
    }
}

impl fmt::Display for AugmentationPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_baseline() {
            return f.write_str("baseline");
        }
        let mut terms = vec![];
        match (self.n_neutral, self.include_authentic) {
            (None, true) => terms.push("all".to_string()),
            (None, false) => terms.push("alln".to_string()),
            (Some(n), real) => {
                terms.push(format!("{n}n"));
                if real {
                    terms.push("real".into());
                }
            }
        }
        for (e, k) in &self.synthetic {
            terms.push(format!("{k}{}", emotion_code(*e)));
        }
        f.write_str(&terms.join("+"))
    }
}

impl FromStr for AugmentationPlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("augmentation plan {s:?}: {msg}"));
        let s_trim = s.trim();
        if s_trim == "baseline" {
            return Ok(Self::baseline());
        }
        let mut neutral: Option<Option<usize>> = None;
        let mut real = false;
        let mut synthetic = BTreeMap::new();
        for term in s_trim.split('+').map(str::trim) {
            match term {
                "all" | "alln" => {
                    if neutral.replace(None).is_some() {
                        return Err(bad("more than one neutral term"));
                    }
                    real |= term == "all";
                }
                "real" => real = true,
                _ => {
                    let split = term
                        .find(|c: char| !c.is_ascii_digit())
                        .ok_or_else(|| bad("term without an emotion code"))?;
                    let (num, code) = term.split_at(split);
                    let k: usize = num.parse().map_err(|_| bad("expected a count"))?;
                    let e = match code {
                        "n" => Emotion::Neutral,
                        "a" => Emotion::Angry,
                        "h" => Emotion::Happy,
                        "s" => Emotion::Sad,
                        "c" => Emotion::Calm,
                        _ => return Err(Error::InvalidEmotion(code.to_string())),
                    };
                    if e == Emotion::Neutral {
                        if neutral.replace(Some(k)).is_some() {
                            return Err(bad("more than one neutral term"));
                        }
                    } else if synthetic.insert(e, k).is_some() {
                        return Err(bad("emotion listed twice"));
                    }
                }
            }
        }
        let n_neutral = neutral.ok_or_else(|| bad("missing neutral term (e.g. 50n or alln)"))?;
        synthetic.retain(|_, k| *k > 0);
        Ok(Self {
            n_neutral,
            include_authentic: real,
            synthetic,
        })
    }
}

impl TryFrom<String> for AugmentationPlan {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AugmentationPlan> for String {
    fn from(p: AugmentationPlan) -> String {
        p.to_string()
    }
}

struct SynthJob<'a> {
    source: &'a ManifestRecord,
    target: Emotion,
    utterance_id: String,
}

/// Replaces the training split with the plan's per-speaker selection,
/// converting neutral sources into synthetic emotional utterances written
/// under `out_dir`. Other splits are copied unchanged.
pub fn build_augmented_set(
    manifest: &Manifest,
    plan: &AugmentationPlan,
    converter: &(dyn UtteranceConverter + Sync),
    out_dir: &Path,
    seed: u64,
) -> Result<Manifest> {
    let root = SeededRng::new(seed).fork("augment");
    let train = manifest.by_speaker(|r| r.split == Split::Train);
    let mut kept: Vec<ManifestRecord> = Vec::new();
    let mut jobs: Vec<SynthJob> = Vec::new();
    for (spk, recs) in &train {
        let mut neutral: Vec<&ManifestRecord> = recs.iter().copied().filter(|r| r.emotion == Emotion::Neutral && !r.synthetic).collect();
        neutral.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
        let mut rng = root.fork(spk);
        rng.shuffle(&mut neutral);
        if let Some(n) = plan.n_neutral {
            if neutral.len() < n {
                return Err(Error::NotEnoughNeutral(format!(
                    "speaker {spk} has {} neutral utterances, plan needs {n}",
                    neutral.len()
                )));
            }
            neutral.truncate(n);
        }
        if plan.synthetic_total() > 0 && neutral.is_empty() {
            return Err(Error::NotEnoughNeutral(format!("speaker {spk} has no neutral sources")));
        }
        let mut selected: Vec<&ManifestRecord> = neutral.clone();
        if plan.include_authentic {
            selected.extend(recs.iter().copied().filter(|r| r.emotion.is_emotional() && !r.synthetic));
        }
        selected.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
        kept.extend(selected.into_iter().cloned());
        for (&target, &k) in &plan.synthetic {
            let mut srng = rng.fork(target.as_str());
            let mut pool: Vec<&ManifestRecord> = Vec::new();
            for j in 0..k {
                if pool.is_empty() {
                    pool = neutral.clone();
                    srng.shuffle(&mut pool);
                    pool.reverse();
                }
                let source = pool.pop().expect("refilled");
                jobs.push(SynthJob {
                    source,
                    target,
                    utterance_id: format!("{spk}_syn_{}_{j:03}", target.as_str()),
                });
            }
        }
    }
    let synth: Vec<ManifestRecord> = jobs
        .par_iter()
        .map(|job| {
            let w = manifest.read_audio(job.source)?;
            let out = converter.convert(&w, job.target)?;
            let rel = Path::new("wav").join(&job.source.speaker_id).join(format!("{}.wav", job.utterance_id));
            let abs = out_dir.join(&rel);
            if let Some(parent) = abs.parent() {
                std::fs::create_dir_all(parent)?;
            }
            out.write_wav(&abs)?;
            Ok(ManifestRecord {
                utterance_id: job.utterance_id.clone(),
                speaker_id: job.source.speaker_id.clone(),
                emotion: job.target,
                path: abs,
                split: Split::Train,
                synthetic: true,
                source_utterance_id: Some(job.source.utterance_id.clone()),
            })
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<ManifestRecord> = kept
        .into_iter()
        .map(|mut r| {
            if r.path.is_relative() {
                r.path = manifest.resolve(&r);
            }
            r
        })
        .collect();
    records.extend(synth);
    for r in manifest.records.iter().filter(|r| r.split != Split::Train) {
        let mut r = r.clone();
        if r.path.is_relative() {
            r.path = manifest.resolve(&r);
        }
        records.push(r);
    }
    let out = Manifest::new(out_dir, records);
    out.validate()?;
    Ok(out)
}
