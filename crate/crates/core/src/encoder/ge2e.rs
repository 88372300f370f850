//! Generalized end-to-end softmax loss over an `N × M` embedding batch.

use crate::error::{dim_err, Error, Result};
use crate::nn::Parameters;
use crate::tensor::{dot, l2_norm, Tensor};

pub const W_MIN: f64 = 1e-6;

/// Learned scale `w` and offset `b`, stored as one 2-element tensor so the
/// optimizer can treat them like any other parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Ge2eParams {
    pub wb: Tensor,
}

impl Default for Ge2eParams {
    fn default() -> Self {
        Self::new(10.0, -5.0)
    }
}

impl Ge2eParams {
    pub fn new(w: f64, b: f64) -> Self {
        Self {
            wb: Tensor::from_vec(&[2], vec![w, b]).expect("two values"),
        }
    }

    pub fn w(&self) -> f64 {
        self.wb.data()[0]
    }

    pub fn b(&self) -> f64 {
        self.wb.data()[1]
    }

    pub fn clamp(&mut self) {
        let d = self.wb.data_mut();
        d[0] = d[0].max(W_MIN);
    }
}

impl Parameters for Ge2eParams {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        vec![("wb".into(), &self.wb)]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.wb]
    }
}

fn check(emb: &Tensor, n: usize, m: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::TooFewSpeakers(n));
    }
    if m < 2 {
        return Err(dim_err(format!("need ≥ 2 utterances per speaker, got {m}")));
    }
    if emb.rows() != n * m {
        return Err(dim_err(format!(
            "expected {} embeddings for {n}×{m}, got {}",
            n * m,
            emb.rows()
        )));
    }
    Ok(emb.cols())
}

/// Speaker centroids (plain means), `N × d`.
fn centroids(emb: &Tensor, n: usize, m: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let mut c = vec![0.0; d];
            for i in 0..m {
                for (cv, e) in c.iter_mut().zip(emb.row(k * m + i)) {
                    *cv += e / m as f64;
                }
            }
            c
        })
        .collect()
}

/// Own-speaker centroid with utterance `i` left out.
fn loo_centroid(emb: &Tensor, full: &[f64], j: usize, i: usize, m: usize) -> Vec<f64> {
    full.iter()
        .zip(emb.row(j * m + i))
        .map(|(c, e)| (c * m as f64 - e) / (m - 1) as f64)
        .collect()
}

fn cos_parts(u: &[f64], v: &[f64]) -> (f64, f64, f64) {
    let (nu, nv) = (l2_norm(u).max(1e-12), l2_norm(v).max(1e-12));
    (dot(u, v) / (nu * nv), nu, nv)
}

/// Scaled cosine similarities `S[j, i, k] = w·cos(e_ji, c_k) + b`, shape
/// `N × M × N`. Rows of `emb` are ordered speaker-major (`j·M + i`).
pub fn ge2e_similarity(emb: &Tensor, n: usize, m: usize, p: &Ge2eParams) -> Result<Tensor> {
    let d = check(emb, n, m)?;
    let cents = centroids(emb, n, m, d);
    let mut s = Tensor::zeros(&[n, m, n]);
    for j in 0..n {
        for i in 0..m {
            let e = emb.row(j * m + i);
            for k in 0..n {
                let cos = if k == j {
                    cos_parts(e, &loo_centroid(emb, &cents[j], j, i, m)).0
                } else {
                    cos_parts(e, &cents[k]).0
                };
                s.data_mut()[(j * m + i) * n + k] = p.w() * cos + p.b();
            }
        }
    }
    Ok(s)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// `Σ_{j,i} [−S[j,i,j] + log Σ_k exp S[j,i,k]]`.
pub fn ge2e_loss(s: &Tensor) -> f64 {
    let n = s.shape()[0];
    let m = s.shape()[1];
    let mut loss = 0.0;
    for j in 0..n {
        for i in 0..m {
            let row = &s.data()[(j * m + i) * n..(j * m + i + 1) * n];
            loss += -row[j] + log_sum_exp(row);
        }
    }
    loss
}

/// Loss value with gradients for the embeddings and for `[w, b]`.
pub fn ge2e_loss_and_grad(
    emb: &Tensor,
    n: usize,
    m: usize,
    p: &Ge2eParams,
) -> Result<(f64, Tensor, Tensor)> {
    let d = check(emb, n, m)?;
    let cents = centroids(emb, n, m, d);
    let (w, b) = (p.w(), p.b());
    let mut d_emb = Tensor::zeros(&[n * m, d]);
    // gradient flowing into each full centroid
    let mut d_cent = vec![vec![0.0; d]; n];
    let (mut dw, mut db, mut loss) = (0.0, 0.0, 0.0);
    let mut cos = vec![0.0; n];
    let mut sims = vec![0.0; n];
    for j in 0..n {
        for i in 0..m {
            let row = j * m + i;
            let e = emb.row(row).to_vec();
            let own = loo_centroid(emb, &cents[j], j, i, m);
            let parts: Vec<(f64, f64, f64)> = (0..n)
                .map(|k| cos_parts(&e, if k == j { &own } else { &cents[k] }))
                .collect();
            for k in 0..n {
                cos[k] = parts[k].0;
                sims[k] = w * cos[k] + b;
            }
            let lse = log_sum_exp(&sims);
            loss += -sims[j] + lse;
            for k in 0..n {
                let ds = (sims[k] - lse).exp() - if k == j { 1.0 } else { 0.0 };
                dw += ds * cos[k];
                db += ds;
                let dc = w * ds;
                let v: &[f64] = if k == j { &own } else { &cents[k] };
                let (c, nu, nv) = parts[k];
                let de = d_emb.row_mut(row);
                for t in 0..d {
                    de[t] += dc * (v[t] / (nu * nv) - c * e[t] / (nu * nu));
                }
                let gv: Vec<f64> = (0..d)
                    .map(|t| dc * (e[t] / (nu * nv) - c * v[t] / (nv * nv)))
                    .collect();
                if k == j {
                    // own centroid averages the other M−1 utterances
                    for i2 in (0..m).filter(|&i2| i2 != i) {
                        let de = d_emb.row_mut(j * m + i2);
                        for t in 0..d {
                            de[t] += gv[t] / (m - 1) as f64;
                        }
                    }
                } else {
                    for (a, g) in d_cent[k].iter_mut().zip(&gv) {
                        *a += g;
                    }
                }
            }
        }
    }
    for (k, dc) in d_cent.iter().enumerate() {
        for i in 0..m {
            let de = d_emb.row_mut(k * m + i);
            for t in 0..d {
                de[t] += dc[t] / m as f64;
            }
        }
    }
    Ok((loss, d_emb, Tensor::from_vec(&[2], vec![dw, db])?))
}
