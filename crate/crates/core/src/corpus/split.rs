//! Speaker-level train / validation / eval assignment.

use super::{Manifest, Split};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Fewest validation speakers that still yield impostor trials.
pub const MIN_VALIDATION_SPEAKERS: usize = 2;
/// Fewest speakers the encoder can be trained on.
pub const MIN_TRAIN_SPEAKERS: usize = 2;

/// Validation speakers carved out of a training pool of `pool` speakers.
pub fn validation_count(pool: usize, fraction: f64) -> usize {
    if fraction <= 0.0 {
        return 0;
    }
    ((pool as f64 * fraction).round() as usize).max(MIN_VALIDATION_SPEAKERS)
}

/// Reassigns every non-media speaker to exactly one split. Media speakers
/// keep their tag.
pub fn split_speakers(
    manifest: &Manifest,
    eval_fraction: f64,
    validation_fraction: f64,
    seed: u64,
) -> Result<Manifest> {
    if !(0.0..1.0).contains(&eval_fraction) || !(0.0..1.0).contains(&validation_fraction) {
        return Err(Error::Config("split fractions must lie in [0, 1)".into()));
    }
    let mut speakers: Vec<String> = manifest
        .records
        .iter()
        .filter(|r| r.split != Split::Media)
        .map(|r| r.speaker_id.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = speakers.len();
    let n_eval = ((n as f64 * eval_fraction).round() as usize).max(1);
    let pool = n.saturating_sub(n_eval);
    let n_val = validation_count(pool, validation_fraction);
    if n_eval >= n || pool < n_val + MIN_TRAIN_SPEAKERS {
        return Err(Error::SplitInfeasible(format!(
            "{n} speakers cannot fill {n_eval} eval, {n_val} validation and {MIN_TRAIN_SPEAKERS}+ train speakers"
        )));
    }
    SeededRng::new(seed).fork("split").shuffle(&mut speakers);
    let assign = |id: &str| {
        let pos = speakers.iter().position(|s| s == id).expect("listed");
        if pos < n_eval {
            Split::Eval
        } else if pos < n_eval + n_val {
            Split::Validation
        } else {
            Split::Train
        }
    };
    let mut out = manifest.clone();
    for r in &mut out.records {
        if r.split != Split::Media {
            r.split = assign(&r.speaker_id);
        }
    }
    out.validate()?;
    Ok(out)
}
