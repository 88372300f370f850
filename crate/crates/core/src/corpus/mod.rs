//! Synthetic toy-speaker corpora, JSONL manifests, speaker-disjoint splits
//! and augmentation-plan assembly.

pub mod augment;
pub mod split;
pub mod synth;

pub use augment::{build_augmented_set, AugmentationPlan};
pub use split::{split_speakers, validation_count};
pub use synth::{
    gen_corpus, largest_remainder, table1_mix, CorpusSpec, EmotionMix, EmotionTransform, Gender,
    SyntheticSpeakerSpec,
};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::emotion::Emotion;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Eval,
    /// Broadcast-style speech from speakers outside every other split.
    Media,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Eval => "eval",
            Split::Media => "media",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "eval" => Ok(Split::Eval),
            "media" => Ok(Split::Media),
            other => Err(Error::Format(format!("unknown split {other:?}"))),
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub utterance_id: String,
    pub speaker_id: String,
    pub emotion: Emotion,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub split: Split,
    #[serde(default, skip_serializing_if = "is_false")]
    pub synthetic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_utterance_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    /// Directory relative paths are resolved against.
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn new(root: impl Into<PathBuf>, records: Vec<ManifestRecord>) -> Self {
        Self {
            root: root.into(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn resolve(&self, r: &ManifestRecord) -> PathBuf {
        if r.path.is_absolute() {
            r.path.clone()
        } else {
            self.root.join(&r.path)
        }
    }

    pub fn read_audio(&self, r: &ManifestRecord) -> Result<Waveform> {
        let p = self.resolve(r);
        if !p.exists() {
            return Err(Error::MissingAudio(p));
        }
        Waveform::read_wav(&p)
    }

    pub fn speakers(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.speaker_id.as_str()).collect()
    }

    pub fn speakers_in(&self, split: Split) -> BTreeSet<&str> {
        self.in_split(split).map(|r| r.speaker_id.as_str()).collect()
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Records grouped by speaker, in speaker-id order.
    pub fn by_speaker<'a>(
        &'a self,
        filter: impl Fn(&ManifestRecord) -> bool,
    ) -> BTreeMap<&'a str, Vec<&'a ManifestRecord>> {
        let mut m: BTreeMap<&str, Vec<&ManifestRecord>> = BTreeMap::new();
        for r in self.records.iter().filter(|r| filter(r)) {
            m.entry(r.speaker_id.as_str()).or_default().push(r);
        }
        m
    }

    pub fn count(&self, emotion: Emotion) -> usize {
        self.records.iter().filter(|r| r.emotion == emotion).count()
    }

    /// Checks id uniqueness and speaker-disjointness of the splits.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.utterance_id.as_str()) {
                return Err(Error::DuplicateUtterance(r.utterance_id.clone()));
            }
        }
        let mut owner: BTreeMap<&str, Split> = BTreeMap::new();
        for r in &self.records {
            // validation speakers belong to the training pool
            let pool = match r.split {
                Split::Validation => Split::Train,
                s => s,
            };
            if let Some(prev) = owner.insert(r.speaker_id.as_str(), pool) {
                if prev != pool {
                    return Err(Error::SplitInfeasible(format!(
                        "speaker {} appears in both {prev} and {pool}",
                        r.speaker_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        buf
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    /// Parses records without touching audio files.
    pub fn parse_jsonl<R: BufRead>(reader: R, root: impl Into<PathBuf>) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(parse_record(&line, i + 1)?);
        }
        Ok(Self::new(root, records))
    }
}

fn parse_record(line: &str, lineno: usize) -> Result<ManifestRecord> {
    let v: serde_json::Value = serde_json::from_str(line)
        .map_err(|e| Error::Format(format!("manifest line {lineno}: {e}")))?;
    // report bad labels as such rather than as a generic schema error
    if let Some(e) = v.get("emotion") {
        let label = e
            .as_str()
            .ok_or_else(|| Error::InvalidEmotion(e.to_string()))?;
        label.parse::<Emotion>()?;
    }
    serde_json::from_value(v).map_err(|e| Error::Format(format!("manifest line {lineno}: {e}")))
}

/// Reads a manifest, validates its schema and invariants, and checks that
/// every referenced audio file exists.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let f = std::fs::File::open(path)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let m = Manifest::parse_jsonl(std::io::BufReader::new(f), root)?;
    m.validate()?;
    for r in &m.records {
        let p = m.resolve(r);
        if !p.is_file() {
            return Err(Error::MissingAudio(p));
        }
    }
    Ok(m)
}
