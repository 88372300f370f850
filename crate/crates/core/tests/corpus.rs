use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use evsv_core::converter::UtteranceConverter;
use evsv_core::corpus::{
    build_augmented_set, gen_corpus, largest_remainder, load_manifest, split_speakers, table1_mix, AugmentationPlan,
    CorpusSpec, EmotionMix, Manifest, ManifestRecord, Split, MANIFEST_FILE,
};
use evsv_core::dsp::{estimate_f0, Waveform};
use evsv_core::{Emotion, Error, Result};
use proptest::prelude::*;

/// Stand-in converter: attenuates the source.
struct Quieter;

impl UtteranceConverter for Quieter {
    fn convert(&self, w: &Waveform, _target: Emotion) -> Result<Waveform> {
        Ok(w.scaled(0.5))
    }
}

fn mix(pairs: &[(Emotion, usize)]) -> EmotionMix {
    EmotionMix::PerSpeaker(pairs.iter().copied().collect())
}

fn small_spec(seed: u64) -> CorpusSpec {
    CorpusSpec {
        num_speakers: 3,
        mix: mix(&[(Emotion::Neutral, 3), (Emotion::Angry, 2)]),
        min_duration_s: 0.6,
        max_duration_s: 0.8,
        seed,
        ..CorpusSpec::default()
    }
}

fn tree_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn default_mix_of_1000_has_900_neutral() {
    let c = largest_remainder(1000, &table1_mix());
    assert_eq!(c[&Emotion::Neutral], 900);
    assert_eq!(c[&Emotion::Calm], 26);
    assert_eq!(c[&Emotion::Angry], 6);
    assert_eq!(c[&Emotion::Happy], 10);
    assert_eq!(c[&Emotion::Sad], 58);
}

#[test]
fn proportional_mix_is_realized_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        num_speakers: 4,
        mix: EmotionMix::Proportional {
            utterances_per_speaker: 5,
            fractions: table1_mix(),
        },
        min_duration_s: 0.6,
        max_duration_s: 0.6,
        ..CorpusSpec::default()
    };
    let (m, _) = gen_corpus(&spec, dir.path()).unwrap();
    let want = largest_remainder(20, &table1_mix());
    for (e, n) in want {
        assert_eq!(m.count(e), n, "{e}");
    }
}

#[test]
fn same_seed_gives_byte_identical_corpus() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    gen_corpus(&small_spec(11), a.path()).unwrap();
    gen_corpus(&small_spec(11), b.path()).unwrap();
    let (ta, tb) = (tree_bytes(a.path()), tree_bytes(b.path()));
    assert_eq!(ta.len(), 3 * 5 + 2);
    assert_eq!(ta, tb);

    let c = tempfile::tempdir().unwrap();
    gen_corpus(&small_spec(12), c.path()).unwrap();
    assert_ne!(ta, tree_bytes(c.path()));
}

#[test]
fn angry_median_f0_exceeds_neutral_per_speaker() {
    let dir = tempfile::tempdir().unwrap();
    let (m, _) = gen_corpus(&small_spec(5), dir.path()).unwrap();
    for (spk, recs) in m.by_speaker(|_| true) {
        let median = |e: Emotion| {
            let mut v: Vec<f64> = recs
                .iter()
                .filter(|r| r.emotion == e)
                .map(|r| estimate_f0(&m.read_audio(r).unwrap()).unwrap().median_voiced().unwrap())
                .collect();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        assert!(median(Emotion::Angry) > median(Emotion::Neutral), "{spk}");
    }
}

#[test]
fn one_speaker_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        num_speakers: 1,
        ..small_spec(0)
    };
    let e = gen_corpus(&spec, dir.path()).unwrap_err();
    assert!(e.to_string().starts_with("split infeasible"), "{e}");
}

/// Records without audio: enough for split logic.
fn reference_manifest(speakers: usize, media: usize) -> Manifest {
    let mut recs = Vec::new();
    for s in 0..speakers + media {
        let (spk, split) = if s < speakers {
            (format!("s{s:03}"), Split::Train)
        } else {
            (format!("m{s:03}"), Split::Media)
        };
        for k in 0..2 {
            recs.push(ManifestRecord {
                utterance_id: format!("{spk}_{k}"),
                speaker_id: spk.clone(),
                emotion: Emotion::Neutral,
                path: format!("{spk}_{k}.wav").into(),
                split,
                synthetic: false,
                source_utterance_id: None,
            });
        }
    }
    Manifest::new("/nonexistent", recs)
}

#[test]
fn hundred_pool_speakers_give_five_validation() {
    // 125 speakers at 20% eval leave a pool of 100
    let m = split_speakers(&reference_manifest(125, 0), 0.2, 0.05, 3).unwrap();
    assert_eq!(m.speakers_in(Split::Eval).len(), 25);
    assert_eq!(m.speakers_in(Split::Validation).len(), 5);
    assert_eq!(m.speakers_in(Split::Train).len(), 95);
}

#[test]
fn split_is_speaker_disjoint_and_deterministic() {
    let src = reference_manifest(30, 2);
    let a = split_speakers(&src, 0.3, 0.05, 9).unwrap();
    let b = split_speakers(&src, 0.3, 0.05, 9).unwrap();
    assert_eq!(a, b);
    let train = a.speakers_in(Split::Train);
    let eval = a.speakers_in(Split::Eval);
    assert!(train.is_disjoint(&eval));
    assert!(a.speakers_in(Split::Validation).is_disjoint(&eval));
    assert_eq!(a.speakers_in(Split::Media).len(), 2);
    let c = split_speakers(&src, 0.3, 0.05, 10).unwrap();
    assert_ne!(a.speakers_in(Split::Eval), c.speakers_in(Split::Eval));
}

#[test]
fn too_few_speakers_to_split() {
    let e = split_speakers(&reference_manifest(3, 0), 0.3, 0.05, 0).unwrap_err();
    assert!(matches!(e, Error::SplitInfeasible(_)), "{e}");
}

fn write_manifest(dir: &Path, lines: &[String]) -> PathBuf {
    let p = dir.join(MANIFEST_FILE);
    std::fs::write(&p, lines.join("\n")).unwrap();
    p
}

fn row(id: &str, spk: &str, emotion: &str, path: &str) -> String {
    format!(r#"{{"utterance_id":"{id}","speaker_id":"{spk}","emotion":"{emotion}","path":"{path}","split":"train"}}"#)
}

fn touch_wav(dir: &Path, name: &str) {
    Waveform::new(vec![0.0; 1600], 16_000).unwrap().write_wav(&dir.join(name)).unwrap();
}

#[test]
fn load_manifest_accepts_angry_row() {
    let dir = tempfile::tempdir().unwrap();
    touch_wav(dir.path(), "a.wav");
    let p = write_manifest(dir.path(), &[row("u1", "s1", "angry", "a.wav")]);
    let m = load_manifest(&p).unwrap();
    assert_eq!(m.records[0].emotion, Emotion::Angry);
}

#[test]
fn load_manifest_rejects_duplicate_ids() {
    let dir = tempfile::tempdir().unwrap();
    touch_wav(dir.path(), "a.wav");
    let p = write_manifest(dir.path(), &[row("u1", "s1", "neutral", "a.wav"), row("u1", "s1", "sad", "a.wav")]);
    let e = load_manifest(&p).unwrap_err();
    assert!(e.to_string().starts_with("duplicate utterance id"), "{e}");
}

#[test]
fn load_manifest_rejects_missing_audio() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_manifest(dir.path(), &[row("u1", "s1", "neutral", "nope.wav")]);
    let e = load_manifest(&p).unwrap_err();
    assert!(e.to_string().starts_with("missing audio"), "{e}");
}

#[test]
fn load_manifest_rejects_unknown_emotion() {
    let dir = tempfile::tempdir().unwrap();
    touch_wav(dir.path(), "a.wav");
    let p = write_manifest(dir.path(), &[row("u1", "s1", "bored", "a.wav")]);
    let e = load_manifest(&p).unwrap_err();
    assert!(e.to_string().starts_with("invalid emotion"), "{e}");
}

#[test]
fn plan_grammar() {
    let p: AugmentationPlan = "50n+10a+10h".parse().unwrap();
    assert_eq!(p.n_neutral, Some(50));
    assert!(!p.include_authentic);
    assert_eq!(p.synthetic_total(), 20);
    assert_eq!(p.to_string(), "50n+10a+10h");
    assert_eq!(p.describe(), "50 neutral + 10 angry + 10 happy");
    assert_eq!("alln".parse::<AugmentationPlan>().unwrap(), AugmentationPlan::baseline());
    assert_eq!("baseline".parse::<AugmentationPlan>().unwrap().to_string(), "baseline");
    let all: AugmentationPlan = "all+3s".parse().unwrap();
    assert!(all.include_authentic && all.n_neutral.is_none());
    for bad in ["", "10a", "5n+6n", "5n+2a+3a", "5n+2x", "n"] {
        assert!(bad.parse::<AugmentationPlan>().is_err(), "{bad:?}");
    }
}

/// Generated corpus with every speaker in training, plus one eval speaker.
fn augment_fixture(dir: &Path, neutral: usize) -> Manifest {
    let spec = CorpusSpec {
        num_speakers: 3,
        mix: mix(&[(Emotion::Neutral, neutral), (Emotion::Angry, 1)]),
        min_duration_s: 0.5,
        max_duration_s: 0.5,
        seed: 2,
        ..CorpusSpec::default()
    };
    let (mut m, _) = gen_corpus(&spec, dir).unwrap();
    for r in &mut m.records {
        r.split = if r.speaker_id == "spk002" { Split::Eval } else { Split::Train };
    }
    m
}

#[test]
fn fifty_neutral_ten_angry_ten_happy_per_speaker() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let m = augment_fixture(src.path(), 52);
    let plan: AugmentationPlan = "50n+10a+10h".parse().unwrap();
    let aug = build_augmented_set(&m, &plan, &Quieter, out.path(), 4).unwrap();
    for spk in ["spk000", "spk001"] {
        let recs: Vec<_> = aug.records.iter().filter(|r| r.speaker_id == spk).collect();
        assert_eq!(recs.len(), 70, "{spk}");
        assert_eq!(recs.iter().filter(|r| r.synthetic).count(), 20);
        assert_eq!(recs.iter().filter(|r| r.emotion == Emotion::Angry).count(), 10);
        for r in recs.iter().filter(|r| r.synthetic) {
            let src_id = r.source_utterance_id.as_deref().unwrap();
            let source = m.records.iter().find(|s| s.utterance_id == src_id).unwrap();
            assert_eq!(source.speaker_id, r.speaker_id);
            assert_eq!(source.emotion, Emotion::Neutral);
            assert!(aug.resolve(r).is_file());
        }
    }
    // the eval split is copied unchanged
    assert_eq!(aug.in_split(Split::Eval).count(), m.in_split(Split::Eval).count());
}

#[test]
fn sources_are_drawn_without_replacement_until_exhausted() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let m = augment_fixture(src.path(), 3);
    let plan: AugmentationPlan = "3n+7a".parse().unwrap();
    let aug = build_augmented_set(&m, &plan, &Quieter, out.path(), 4).unwrap();
    let mut uses: BTreeMap<&str, usize> = BTreeMap::new();
    for r in aug.records.iter().filter(|r| r.synthetic && r.speaker_id == "spk000") {
        *uses.entry(r.source_utterance_id.as_deref().unwrap()).or_default() += 1;
    }
    let counts: Vec<usize> = uses.values().copied().collect();
    assert_eq!(counts.len(), 3);
    assert!(counts.iter().all(|&c| c == 2 || c == 3), "{counts:?}");
    assert_eq!(counts.iter().sum::<usize>(), 7);
}

#[test]
fn plan_without_synthetic_keeps_records() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let m = augment_fixture(src.path(), 4);
    let aug = build_augmented_set(&m, &"all".parse().unwrap(), &Quieter, out.path(), 4).unwrap();
    let strip = |m: &Manifest| {
        let mut v: Vec<(String, String, Emotion, Split, PathBuf)> = m
            .records
            .iter()
            .map(|r| (r.utterance_id.clone(), r.speaker_id.clone(), r.emotion, r.split, m.resolve(r)))
            .collect();
        v.sort();
        v
    };
    assert_eq!(strip(&aug), strip(&m));
    assert!(tree_bytes(out.path()).is_empty());
}

#[test]
fn plan_needing_more_neutral_than_available() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let m = augment_fixture(src.path(), 2);
    let e = build_augmented_set(&m, &"5n+1a".parse().unwrap(), &Quieter, out.path(), 4).unwrap_err();
    assert!(e.to_string().starts_with("not enough neutral utterances for plan"), "{e}");
}

#[test]
fn augmentation_is_deterministic() {
    let src = tempfile::tempdir().unwrap();
    let m = augment_fixture(src.path(), 4);
    let plan: AugmentationPlan = "3n+2a+1h".parse().unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = build_augmented_set(&m, &plan, &Quieter, a.path(), 8).unwrap();
    let mb = build_augmented_set(&m, &plan, &Quieter, b.path(), 8).unwrap();
    let ids = |m: &Manifest| {
        m.records
            .iter()
            .map(|r| (r.utterance_id.clone(), r.source_utterance_id.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(ids(&ma), ids(&mb));
    assert_eq!(tree_bytes(a.path()), tree_bytes(b.path()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn largest_remainder_is_exact(total in 0usize..5000, w in prop::collection::vec(0.0f64..1.0, 5)) {
        prop_assume!(w.iter().sum::<f64>() > 1e-6);
        let weights: BTreeMap<Emotion, f64> = Emotion::ALL.into_iter().zip(w.iter().copied()).collect();
        let c = largest_remainder(total, &weights);
        prop_assert_eq!(c.values().sum::<usize>(), total);
        let sum: f64 = w.iter().sum();
        for (e, &n) in &c {
            let ideal = total as f64 * weights[e] / sum;
            prop_assert!((n as f64 - ideal).abs() < 1.0);
        }
    }

    #[test]
    fn splits_partition_speakers(n in 4usize..80, eval in 0.05f64..0.5, val in 0.0f64..0.2, seed in any::<u64>()) {
        let src = reference_manifest(n, 1);
        match split_speakers(&src, eval, val, seed) {
            Ok(m) => {
                let tr = m.speakers_in(Split::Train);
                let va = m.speakers_in(Split::Validation);
                let ev = m.speakers_in(Split::Eval);
                prop_assert!(tr.is_disjoint(&ev) && va.is_disjoint(&ev) && tr.is_disjoint(&va));
                prop_assert_eq!(tr.len() + va.len() + ev.len(), n);
                prop_assert!(!tr.is_empty() && !ev.is_empty());
                prop_assert_eq!(m.speakers_in(Split::Media).len(), 1);
            }
            Err(e) => prop_assert!(matches!(e, Error::SplitInfeasible(_))),
        }
    }

    #[test]
    fn plan_display_round_trips(n in prop::option::of(0usize..200), real in any::<bool>(),
                                k in prop::collection::vec(0usize..30, 4)) {
        let synthetic = [Emotion::Angry, Emotion::Happy, Emotion::Sad, Emotion::Calm]
            .into_iter()
            .zip(k)
            .filter(|(_, k)| *k > 0)
            .collect();
        let p = AugmentationPlan { n_neutral: n, include_authentic: real, synthetic };
        prop_assert_eq!(p.to_string().parse::<AugmentationPlan>().unwrap(), p);
    }
}
