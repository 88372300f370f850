//! Two-dimensional PCA projection of embeddings for plotting.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::rng::SeededRng;
use crate::tensor::{dot, l2_norm};

const PROJECTION_SEED: u64 = 2;
const MAX_SWEEPS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

fn orthonormalize(a: &mut [f64], b: &mut [f64]) {
    let na = l2_norm(a).max(1e-300);
    a.iter_mut().for_each(|v| *v /= na);
    let p = dot(a, b);
    b.iter_mut().zip(a.iter()).for_each(|(bv, av)| *bv -= p * av);
    let nb = l2_norm(b);
    if nb > 1e-300 {
        b.iter_mut().for_each(|v| *v /= nb);
    }
}

fn sym_mul(c: &[f64], d: usize, x: &[f64]) -> Vec<f64> {
    (0..d).map(|i| dot(&c[i * d..(i + 1) * d], x)).collect()
}

/// Flips `v` so its first clearly nonzero entry is positive.
fn fix_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-9) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Top-two principal axes of the covariance `c` (`d × d`) by seeded
/// two-vector subspace iteration followed by a 2×2 Rayleigh–Ritz rotation.
fn top_two_axes(c: &[f64], d: usize) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let mut rng = SeededRng::new(PROJECTION_SEED);
    let mut a: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let mut b: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    orthonormalize(&mut a, &mut b);
    for _ in 0..MAX_SWEEPS {
        let mut na = sym_mul(c, d, &a);
        let mut nb = sym_mul(c, d, &b);
        orthonormalize(&mut na, &mut nb);
        let delta = (1.0 - dot(&na, &a).abs()).max(1.0 - dot(&nb, &b).abs());
        a = na;
        b = nb;
        if delta < 1e-15 {
            break;
        }
    }
    let (ca, cb) = (sym_mul(c, d, &a), sym_mul(c, d, &b));
    let (p, q, r) = (dot(&a, &ca), dot(&a, &cb), dot(&b, &cb));
    let theta = 0.5 * (2.0 * q).atan2(p - r);
    let (cs, sn) = (theta.cos(), theta.sin());
    let mut u: Vec<f64> = a.iter().zip(&b).map(|(x, y)| cs * x + sn * y).collect();
    let mut v: Vec<f64> = a.iter().zip(&b).map(|(x, y)| -sn * x + cs * y).collect();
    let lu = dot(&u, &sym_mul(c, d, &u));
    let lv = dot(&v, &sym_mul(c, d, &v));
    if lv > lu {
        std::mem::swap(&mut u, &mut v);
    }
    fix_sign(&mut u);
    fix_sign(&mut v);
    (u, v, lu.max(lv), lu.min(lv))
}

pub fn project_embeddings_2d(vectors: &[Vec<f64>], labels: &[String]) -> Result<Vec<ProjectedPoint>> {
    let n = vectors.len();
    if n < 3 {
        return Err(dim_err(format!("need ≥ 3 vectors to project, got {n}")));
    }
    if labels.len() != n {
        return Err(dim_err("one label per vector"));
    }
    let d = vectors[0].len();
    if d == 0 || vectors.iter().any(|v| v.len() != d) {
        return Err(dim_err("vectors must share a positive dimension"));
    }
    let mut mean = vec![0.0; d];
    for v in vectors {
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x / n as f64);
    }
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = vec![0.0; d * d];
    for v in &centered {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += v[i] * v[j] / n as f64;
            }
        }
    }
    let (u, mut w, l1, l2) = top_two_axes(&cov, if d == 1 { 1 } else { d });
    if d == 1 || l2 <= 1e-12 * l1.max(1e-300) {
        w.iter_mut().for_each(|x| *x = 0.0);
    }
    if l1 <= 0.0 {
        return Ok(labels
            .iter()
            .map(|l| ProjectedPoint {
                x: 0.0,
                y: 0.0,
                label: l.clone(),
            })
            .collect());
    }
    Ok(centered
        .iter()
        .zip(labels)
        .map(|(v, l)| ProjectedPoint {
            x: dot(v, &u),
            y: dot(v, &w),
            label: l.clone(),
        })
        .collect())
}

pub fn write_projection_csv<W: std::io::Write>(w: W, points: &[ProjectedPoint]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for p in points {
        wr.serialize(p)?;
    }
    wr.flush()?;
    Ok(())
}
