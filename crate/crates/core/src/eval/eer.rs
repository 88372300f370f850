//! Equal error rate, FAR calibration and per-emotion breakdowns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::emotion::Emotion;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub profile_speaker: String,
    pub utterance_speaker: String,
    pub emotion: Emotion,
    pub score: f64,
    pub is_target: bool,
}

impl Trial {
    pub fn new(profile: &str, utterance: &str, emotion: Emotion, score: f64) -> Self {
        Self {
            profile_speaker: profile.to_string(),
            utterance_speaker: utterance.to_string(),
            emotion,
            score,
            is_target: profile == utterance,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialScoreSet {
    pub trials: Vec<Trial>,
}

impl TrialScoreSet {
    pub fn split(&self) -> (Vec<f64>, Vec<f64>) {
        split_scores(self.trials.iter())
    }

    pub fn filtered(&self, keep: impl Fn(&Trial) -> bool) -> TrialScoreSet {
        TrialScoreSet {
            trials: self.trials.iter().filter(|t| keep(t)).cloned().collect(),
        }
    }
}

fn split_scores<'a>(it: impl Iterator<Item = &'a Trial>) -> (Vec<f64>, Vec<f64>) {
    let (mut t, mut i) = (Vec::new(), Vec::new());
    for tr in it {
        if tr.is_target {
            t.push(tr.score);
        } else {
            i.push(tr.score);
        }
    }
    (t, i)
}

/// `(eer, threshold)` by linear interpolation where FAR and FRR cross.
///
/// Thresholds are every distinct score plus `+∞`; at threshold `t`,
/// FAR = impostors `≥ t` and FRR = targets `< t`.
pub fn eer_from_scores(targets: &[f64], impostors: &[f64]) -> Result<(f64, f64)> {
    if targets.is_empty() || impostors.is_empty() {
        return Err(Error::DegenerateTrials(format!(
            "{} targets, {} impostors",
            targets.len(),
            impostors.len()
        )));
    }
    if targets.iter().chain(impostors).any(|s| !s.is_finite()) {
        return Err(Error::DegenerateTrials("non-finite score".into()));
    }
    let mut all: Vec<(f64, bool)> = targets
        .iter()
        .map(|&s| (s, true))
        .chain(impostors.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (nt, ni) = (targets.len() as f64, impostors.len() as f64);
    // walk thresholds in increasing order; counts of scores strictly below
    let (mut tar_below, mut imp_below) = (0usize, 0usize);
    let mut prev: Option<(f64, f64, f64)> = None; // (threshold, far, frr)
    let mut idx = 0;
    loop {
        let thr = if idx < all.len() { all[idx].0 } else { f64::INFINITY };
        let far = (ni - imp_below as f64) / ni;
        let frr = tar_below as f64 / nt;
        if frr >= far {
            let (t0, far0, frr0) = prev.expect("FRR < FAR at the lowest threshold");
            let d0 = far0 - frr0;
            let d1 = far - frr;
            let alpha = d0 / (d0 - d1);
            let eer = far0 + alpha * (far - far0);
            let t = if thr.is_finite() { t0 + alpha * (thr - t0) } else { t0 };
            return Ok((eer, t));
        }
        prev = Some((thr, far, frr));
        if idx >= all.len() {
            unreachable!("FRR reaches 1 at the +∞ sentinel");
        }
        while idx < all.len() && all[idx].0 == thr {
            if all[idx].1 {
                tar_below += 1;
            } else {
                imp_below += 1;
            }
            idx += 1;
        }
    }
}

pub fn compute_eer(set: &TrialScoreSet) -> Result<(f64, f64)> {
    let (t, i) = set.split();
    eer_from_scores(&t, &i)
}

/// Fraction of impostor scores at or above `threshold`.
pub fn far_at_threshold(impostors: &[f64], threshold: f64) -> Result<f64> {
    if impostors.is_empty() {
        return Err(Error::DegenerateTrials("no impostor trials".into()));
    }
    Ok(impostors.iter().filter(|&&s| s >= threshold).count() as f64 / impostors.len() as f64)
}

/// Smallest observed score whose FAR on `impostors` is at most `target_far`
/// (or just above the largest score when none qualifies).
pub fn calibrate_threshold(impostors: &[f64], target_far: f64) -> Result<f64> {
    if impostors.is_empty() {
        return Err(Error::DegenerateTrials("no impostor trials".into()));
    }
    let mut s = impostors.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    for (i, &v) in s.iter().enumerate() {
        if i > 0 && s[i - 1] == v {
            continue;
        }
        if (n - i) as f64 / n as f64 <= target_far {
            return Ok(v);
        }
    }
    let top = s[n - 1];
    Ok(top + top.abs().max(1.0) * 1e-9)
}

/// Report cells in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Overall,
    Neutral,
    Emotional,
    Happy,
    Angry,
    Sad,
    Calm,
}

impl Cell {
    pub const ALL: [Cell; 7] = [
        Cell::Overall,
        Cell::Neutral,
        Cell::Emotional,
        Cell::Happy,
        Cell::Angry,
        Cell::Sad,
        Cell::Calm,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Cell::Overall => "Overall",
            Cell::Neutral => "Neutral",
            Cell::Emotional => "Emotional",
            Cell::Happy => "Happy",
            Cell::Angry => "Angry",
            Cell::Sad => "Sad",
            Cell::Calm => "Calm",
        }
    }

    fn emotion(self) -> Option<Emotion> {
        match self {
            Cell::Neutral => Some(Emotion::Neutral),
            Cell::Happy => Some(Emotion::Happy),
            Cell::Angry => Some(Emotion::Angry),
            Cell::Sad => Some(Emotion::Sad),
            Cell::Calm => Some(Emotion::Calm),
            _ => None,
        }
    }

    fn admits(self, e: Emotion) -> bool {
        match self {
            Cell::Overall => true,
            Cell::Emotional => e.is_emotional(),
            c => c.emotion() == Some(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EerReport {
    pub overall_eer: f64,
    pub eer_threshold: f64,
    /// Per test-utterance emotion; labels without targets are absent.
    pub per_emotion_eer: BTreeMap<Emotion, f64>,
    /// Pooled over calm, angry, happy and sad.
    pub emotional_eer: Option<f64>,
    /// `emotional_eer − neutral_eer`.
    pub neutral_vs_emotional_gap: Option<f64>,
}

impl EerReport {
    pub fn cell(&self, c: Cell) -> Option<f64> {
        match c {
            Cell::Overall => Some(self.overall_eer),
            Cell::Emotional => self.emotional_eer,
            other => other.emotion().and_then(|e| self.per_emotion_eer.get(&e).copied()),
        }
    }
}

fn subset_eer(set: &TrialScoreSet, cell: Cell) -> Option<f64> {
    let (t, i) = split_scores(set.trials.iter().filter(|tr| cell.admits(tr.emotion)));
    eer_from_scores(&t, &i).ok().map(|r| r.0)
}

pub fn per_emotion_breakdown(set: &TrialScoreSet) -> Result<EerReport> {
    let (overall_eer, eer_threshold) = compute_eer(set)?;
    let mut per_emotion_eer = BTreeMap::new();
    for e in Emotion::ALL {
        let cell = Cell::ALL
            .into_iter()
            .find(|c| c.emotion() == Some(e))
            .expect("every emotion has a cell");
        if let Some(v) = subset_eer(set, cell) {
            per_emotion_eer.insert(e, v);
        }
    }
    let emotional_eer = subset_eer(set, Cell::Emotional);
    let neutral_vs_emotional_gap = match (emotional_eer, per_emotion_eer.get(&Emotion::Neutral)) {
        (Some(e), Some(n)) => Some(e - n),
        _ => None,
    };
    Ok(EerReport {
        overall_eer,
        eer_threshold,
        per_emotion_eer,
        emotional_eer,
        neutral_vs_emotional_gap,
    })
}
