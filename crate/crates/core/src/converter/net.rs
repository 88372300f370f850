//! Windowed per-frame networks used as generators and discriminators.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::nn::{prefixed, Activation, DenseCache, DenseLayer, Parameters};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetShape {
    /// Frames of context on each side of the centre frame.
    pub context: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl Default for NetShape {
    fn default() -> Self {
        Self {
            context: 4,
            hidden: 64,
            layers: 2,
        }
    }
}

/// Stack of dense layers over a `(2·context + 1)`-frame window. Edge frames
/// are replicated at segment boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameNet {
    pub layers: Vec<DenseLayer>,
    pub context: usize,
    pub dim: usize,
}

pub struct FrameNetCache {
    segments: usize,
    len: usize,
    layers: Vec<DenseCache>,
}

impl FrameNet {
    fn build(
        dim: usize,
        shape: NetShape,
        hidden_act: Activation,
        out_dim: usize,
        out_act: Activation,
        rng: &mut SeededRng,
    ) -> Self {
        let mut layers = Vec::with_capacity(shape.layers + 1);
        let mut width = (2 * shape.context + 1) * dim;
        for _ in 0..shape.layers {
            layers.push(DenseLayer::new(width, shape.hidden, hidden_act, rng));
            width = shape.hidden;
        }
        layers.push(DenseLayer::new(width, out_dim, out_act, rng));
        Self {
            layers,
            context: shape.context,
            dim,
        }
    }

    fn window_width(&self) -> usize {
        (2 * self.context + 1) * self.dim
    }

    fn check(&self, x: &Tensor) -> Result<(usize, usize)> {
        let s = x.shape();
        if s.len() != 3 || s[2] != self.dim || s[0] == 0 || s[1] == 0 {
            return Err(dim_err(format!(
                "frame network expects [S, L, {}] input, got {s:?}",
                self.dim
            )));
        }
        Ok((s[0], s[1]))
    }

    fn window(&self, x: &Tensor, segs: usize, len: usize) -> Tensor {
        let (c, d) = (self.context as isize, self.dim);
        let w = self.window_width();
        let mut out = vec![0.0; segs * len * w];
        for s in 0..segs {
            for t in 0..len {
                let row = &mut out[(s * len + t) * w..(s * len + t + 1) * w];
                for (slot, k) in (-c..=c).enumerate() {
                    let src = (t as isize + k).clamp(0, len as isize - 1) as usize;
                    let from = (s * len + src) * d;
                    row[slot * d..(slot + 1) * d].copy_from_slice(&x.data()[from..from + d]);
                }
            }
        }
        Tensor::from_vec(&[segs * len, w], out).expect("window shape")
    }

    fn unwindow(&self, dw: &Tensor, segs: usize, len: usize) -> Tensor {
        let (c, d) = (self.context as isize, self.dim);
        let w = self.window_width();
        let mut dx = vec![0.0; segs * len * d];
        for s in 0..segs {
            for t in 0..len {
                let row = &dw.data()[(s * len + t) * w..(s * len + t + 1) * w];
                for (slot, k) in (-c..=c).enumerate() {
                    let src = (t as isize + k).clamp(0, len as isize - 1) as usize;
                    let to = (s * len + src) * d;
                    for j in 0..d {
                        dx[to + j] += row[slot * d + j];
                    }
                }
            }
        }
        Tensor::from_vec(&[segs, len, d], dx).expect("input shape")
    }

    /// Output `[S·L, out]` for input `[S, L, dim]`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, FrameNetCache)> {
        let (segs, len) = self.check(x)?;
        let mut h = self.window(x, segs, len);
        let mut caches = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (o, c) = l.forward(&h)?;
            caches.push(c);
            h = o;
        }
        Ok((
            h,
            FrameNetCache {
                segments: segs,
                len,
                layers: caches,
            },
        ))
    }

    pub fn backward(&self, cache: &FrameNetCache, d_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let mut d = d_out.clone();
        let mut grads = Vec::with_capacity(self.layers.len());
        for (l, c) in self.layers.iter().zip(&cache.layers).rev() {
            let (di, g) = l.backward(c, &d)?;
            grads.push(g);
            d = di;
        }
        let grads = grads.into_iter().rev().flatten().collect();
        Ok((self.unwindow(&d, cache.segments, cache.len), grads))
    }
}

impl Parameters for FrameNet {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        prefixed("layers", &self.layers)
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.params_mut()
    }
}

/// Residual generator: `G(x)_t = x_t + net(window_t(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub net: FrameNet,
}

impl Generator {
    pub fn new(dim: usize, shape: NetShape, rng: &mut SeededRng) -> Self {
        Self {
            net: FrameNet::build(dim, shape, Activation::Gated, dim, Activation::Linear, rng),
        }
    }

    /// Generator whose residual is exactly `offset` on every frame.
    pub fn constant_offset(dim: usize, shape: NetShape, offset: &[f64]) -> Self {
        let mut g = Self::new(dim, shape, &mut SeededRng::new(0));
        let last = g.net.layers.last_mut().expect("output layer");
        last.weight.fill(0.0);
        last.bias.data_mut().copy_from_slice(offset);
        g
    }

    pub fn identity(dim: usize, shape: NetShape) -> Self {
        Self::constant_offset(dim, shape, &vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.net.dim
    }

    /// Residual only, `[S·L, dim]`.
    pub fn residual(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.net.forward(x)?.0)
    }

    /// Converted frames with the input's `[S, L, dim]` shape.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, FrameNetCache)> {
        let (r, c) = self.net.forward(x)?;
        let mut out = x.clone();
        for (o, v) in out.data_mut().iter_mut().zip(r.data()) {
            *o += v;
        }
        Ok((out, c))
    }

    pub fn backward(&self, cache: &FrameNetCache, d_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let flat = Tensor::from_vec(&[d_out.len() / self.dim(), self.dim()], d_out.data().to_vec())?;
        let (mut dx, grads) = self.net.backward(cache, &flat)?;
        dx.add_assign(d_out);
        Ok((dx, grads))
    }
}

impl Parameters for Generator {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        self.net.named_params()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.net.params_mut()
    }
}

/// Per-frame real/fake probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub net: FrameNet,
}

impl Discriminator {
    pub fn new(dim: usize, shape: NetShape, rng: &mut SeededRng) -> Self {
        Self {
            net: FrameNet::build(dim, shape, Activation::Tanh, 1, Activation::Sigmoid, rng),
        }
    }

    /// Probabilities `[S·L, 1]`, each in `(0, 1)`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, FrameNetCache)> {
        self.net.forward(x)
    }

    pub fn backward(&self, cache: &FrameNetCache, d_prob: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        self.net.backward(cache, d_prob)
    }
}

impl Parameters for Discriminator {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        self.net.named_params()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.net.params_mut()
    }
}
