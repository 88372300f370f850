//! Per-utterance feature extraction backed by the EVSF cache.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use evsv_core::converter::analyze_for_conversion;
use evsv_core::corpus::{Manifest, ManifestRecord};
use evsv_core::dsp::cache::{decode, encode};
use evsv_core::dsp::{mel_spectrogram, F0Contour, Waveform};
use evsv_core::Tensor;

pub const CACHE_ENV: &str = "EVSV_CACHE_DIR";
/// Bumped whenever extraction changes, so stale caches are never reused.
const FEATURE_VERSION: &str = "evsv-features-1";

#[derive(Debug, Clone)]
pub struct UttFeatures {
    /// `T × 40` log-mel.
    pub mel: Tensor,
    /// `T' × 24` mel-cepstra.
    pub mcep: Tensor,
    /// F0 aligned to the mel-cepstral frames.
    pub f0: F0Contour,
}

pub type FeatureMap = BTreeMap<String, Arc<UttFeatures>>;

/// `$EVSV_CACHE_DIR` when set, otherwise `default`.
pub fn cache_dir(default: &Path) -> PathBuf {
    match std::env::var_os(CACHE_ENV) {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => default.to_path_buf(),
    }
}

fn cache_key(wav_bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(FEATURE_VERSION.as_bytes());
    h.update(wav_bytes);
    h.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect()
}

fn roundtrip(t: &Tensor) -> (Vec<u8>, Tensor) {
    let bytes = encode(t);
    let back = decode(&bytes).expect("freshly encoded");
    (bytes, back)
}

fn compute(w: &Waveform) -> Result<[Tensor; 3]> {
    let mel = mel_spectrogram(w)?.frames;
    let (m, f0) = analyze_for_conversion(w)?;
    let f0t = Tensor::from_vec(&[f0.len(), 1], f0.f0_hz.clone())?;
    Ok([mel, m.coeffs, f0t])
}

fn from_tensors(mel: Tensor, mcep: Tensor, f0: Tensor) -> Result<UttFeatures> {
    let f0 = F0Contour::from_f0(f0.into_data(), evsv_core::dsp::mel::DEFAULT_HOP_MS)?;
    Ok(UttFeatures { mel, mcep, f0 })
}

const KINDS: [&str; 3] = ["mel", "mcep", "f0"];

fn paths(dir: &Path, key: &str) -> [PathBuf; 3] {
    KINDS.map(|k| dir.join(format!("{key}.{k}.evsf")))
}

/// Loads one utterance's features from the cache, computing and storing
/// them on a miss. Values always pass through the f32 cache encoding, so
/// hits and misses agree bit for bit.
pub fn load_or_extract(path: &Path, dir: &Path) -> Result<UttFeatures> {
    let bytes = std::fs::read(path).with_context(|| format!("missing audio: {}", path.display()))?;
    let key = cache_key(&bytes);
    let files = paths(dir, &key);
    if files.iter().all(|p| p.is_file()) {
        let t = files
            .iter()
            .map(|p| Ok(decode(&std::fs::read(p)?)?))
            .collect::<Result<Vec<_>>>()?;
        let [mel, mcep, f0]: [Tensor; 3] = t.try_into().expect("three tensors");
        return from_tensors(mel, mcep, f0);
    }
    let w = Waveform::read_wav(path)?;
    let computed = compute(&w).with_context(|| format!("extracting {}", path.display()))?;
    let mut out = Vec::with_capacity(3);
    for (t, p) in computed.iter().zip(&files) {
        let (enc, back) = roundtrip(t);
        crate::record::write_atomic(p, &enc)?;
        out.push(back);
    }
    let [mel, mcep, f0]: [Tensor; 3] = out.try_into().expect("three tensors");
    from_tensors(mel, mcep, f0)
}

/// True when every record already has cached features.
pub fn is_cached(manifest: &Manifest, dir: &Path) -> Result<bool> {
    for r in &manifest.records {
        let bytes = std::fs::read(manifest.resolve(r))?;
        if !paths(dir, &cache_key(&bytes)).iter().all(|p| p.is_file()) {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn extract_all<'a>(
    manifest: &Manifest,
    records: impl IntoIterator<Item = &'a ManifestRecord>,
    dir: &Path,
) -> Result<FeatureMap> {
    std::fs::create_dir_all(dir)?;
    let recs: Vec<&ManifestRecord> = records.into_iter().collect();
    let feats = recs
        .par_iter()
        .map(|r| load_or_extract(&manifest.resolve(r), dir).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    Ok(recs
        .into_iter()
        .map(|r| r.utterance_id.clone())
        .zip(feats)
        .collect())
}
