//! Seeded inputs shared by the criterion benches.

use evsv_core::dsp::Waveform;
use evsv_core::eval::{Trial, TrialScoreSet};
use evsv_core::{Emotion, SeededRng, Tensor};

/// Harmonic tone at `f0` Hz with a slow vibrato, 16 kHz.
pub fn voiced_tone(f0: f64, secs: f64) -> Waveform {
    let sr = 16_000.0;
    let n = (secs * sr) as usize;
    let mut phase = 0.0;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            phase += 2.0 * std::f64::consts::PI * f0 * (1.0 + 0.03 * (2.0 * std::f64::consts::PI * 3.0 * t).sin()) / sr;
            (1..=8).map(|k| (k as f64 * phase).sin() / k as f64).sum::<f64>() * 0.2
        })
        .collect();
    Waveform::new(samples, 16_000).expect("valid tone")
}

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = SeededRng::new(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.normal()).collect()).expect("shape")
}

/// `n` trials, a tenth of them targets, with shifted target scores.
pub fn trial_set(n: usize, seed: u64) -> TrialScoreSet {
    let mut rng = SeededRng::new(seed);
    let trials = (0..n)
        .map(|i| {
            let target = i % 10 == 0;
            let score = (rng.normal() * 0.2 + if target { 0.6 } else { 0.2 }).clamp(-1.0, 1.0);
            let emotion = Emotion::ALL[i % Emotion::ALL.len()];
            Trial::new("a", if target { "a" } else { "b" }, emotion, score)
        })
        .collect();
    TrialScoreSet { trials }
}
