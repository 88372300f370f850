use serde::{Deserialize, Serialize};

use super::{init_uniform, Parameters};
use crate::error::{dim_err, Result};
use crate::rng::SeededRng;
use crate::tensor::{gemm, MatRef, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Tanh,
    Sigmoid,
    /// `a ⊙ sigmoid(b)` over the two halves of the pre-activation.
    Gated,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer. `weight` is `pre_out × in` where `pre_out` is the
/// output width, doubled for [`Activation::Gated`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

/// Values kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
    pre: Tensor,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut SeededRng) -> Self {
        let pre_out = if activation == Activation::Gated {
            2 * out_dim
        } else {
            out_dim
        };
        let r = 1.0 / (in_dim as f64).sqrt();
        Self {
            weight: init_uniform(&[pre_out, in_dim], r, rng),
            bias: init_uniform(&[pre_out], r, rng),
            activation,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        let pre_out = if activation == Activation::Gated {
            2 * out_dim
        } else {
            out_dim
        };
        Self {
            weight: Tensor::zeros(&[pre_out, in_dim]),
            bias: Tensor::zeros(&[pre_out]),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    fn pre_out(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        match self.activation {
            Activation::Gated => self.pre_out() / 2,
            _ => self.pre_out(),
        }
    }

    /// Forward on a `B × in` batch.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, DenseCache)> {
        if input.cols() != self.in_dim() {
            return Err(dim_err(format!(
                "dense layer expects {} inputs, got {}",
                self.in_dim(),
                input.cols()
            )));
        }
        let b = input.rows();
        let p = self.pre_out();
        let mut pre = vec![0.0; b * p];
        for row in pre.chunks_exact_mut(p) {
            row.copy_from_slice(self.bias.data());
        }
        gemm(
            MatRef::new(input.data(), b, self.in_dim()),
            MatRef::t(self.weight.data(), p, self.in_dim()),
            1.0,
            &mut pre,
        );
        let pre = Tensor::from_vec(&[b, p], pre)?;
        let out = self.activate(&pre);
        Ok((
            out,
            DenseCache {
                input: input.clone(),
                pre,
            },
        ))
    }

    fn activate(&self, pre: &Tensor) -> Tensor {
        match self.activation {
            Activation::Linear => pre.clone(),
            Activation::Tanh => pre.map(f64::tanh),
            Activation::Sigmoid => pre.map(sigmoid),
            Activation::Gated => {
                let h = self.out_dim();
                let b = pre.rows();
                let mut out = Tensor::zeros(&[b, h]);
                for r in 0..b {
                    let z = pre.row(r);
                    let o = out.row_mut(r);
                    for j in 0..h {
                        o[j] = z[j] * sigmoid(z[h + j]);
                    }
                }
                out
            }
        }
    }

    /// Returns `(d_input, [d_weight, d_bias])`.
    pub fn backward(&self, cache: &DenseCache, d_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let b = cache.input.rows();
        if d_out.rows() != b || d_out.cols() != self.out_dim() {
            return Err(dim_err("dense upstream gradient has wrong shape"));
        }
        let p = self.pre_out();
        let mut d_pre = Tensor::zeros(&[b, p]);
        for r in 0..b {
            let z = cache.pre.row(r);
            let g = d_out.row(r);
            let d = d_pre.row_mut(r);
            match self.activation {
                Activation::Linear => d.copy_from_slice(g),
                Activation::Tanh => {
                    for j in 0..p {
                        let t = z[j].tanh();
                        d[j] = g[j] * (1.0 - t * t);
                    }
                }
                Activation::Sigmoid => {
                    for j in 0..p {
                        let s = sigmoid(z[j]);
                        d[j] = g[j] * s * (1.0 - s);
                    }
                }
                Activation::Gated => {
                    let h = p / 2;
                    for j in 0..h {
                        let s = sigmoid(z[h + j]);
                        d[j] = g[j] * s;
                        d[h + j] = g[j] * z[j] * s * (1.0 - s);
                    }
                }
            }
        }
        let in_dim = self.in_dim();
        let mut d_w = vec![0.0; p * in_dim];
        gemm(
            MatRef::t(d_pre.data(), b, p),
            MatRef::new(cache.input.data(), b, in_dim),
            0.0,
            &mut d_w,
        );
        let d_b = d_pre.col_means().into_iter().map(|m| m * b as f64).collect();
        let mut d_in = vec![0.0; b * in_dim];
        gemm(
            MatRef::new(d_pre.data(), b, p),
            MatRef::new(self.weight.data(), p, in_dim),
            0.0,
            &mut d_in,
        );
        Ok((
            Tensor::from_vec(&[b, in_dim], d_in)?,
            vec![
                Tensor::from_vec(&[p, in_dim], d_w)?,
                Tensor::from_vec(&[p], d_b)?,
            ],
        ))
    }
}

impl Parameters for DenseLayer {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}
