//! Batched LSTM over `[T, B, in]` sequences with full BPTT.
//!
//! Gate order in the stacked `4H` dimension is input, forget, cell, output.

use super::{init_uniform, sigmoid, Parameters};
use crate::error::{dim_err, Result};
use crate::rng::SeededRng;
use crate::tensor::{gemm, MatRef, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// `4H × in`.
    pub w_ih: Tensor,
    /// `4H × H`.
    pub w_hh: Tensor,
    /// `4H`.
    pub bias: Tensor,
    pub hidden_size: usize,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    input: Tensor,
    /// Post-activation gates, `[T·B, 4H]`.
    gates: Vec<f64>,
    /// Cell states, `[T·B, H]`.
    cells: Vec<f64>,
    /// Hidden states, `[T·B, H]`.
    hidden: Vec<f64>,
}

impl LstmLayer {
    pub fn new(in_dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let r = 1.0 / (in_dim as f64).sqrt();
        let rh = 1.0 / (hidden as f64).sqrt();
        let mut bias = init_uniform(&[4 * hidden], r, rng);
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        Self {
            w_ih: init_uniform(&[4 * hidden, in_dim], r, rng),
            w_hh: init_uniform(&[4 * hidden, hidden], rh, rng),
            bias,
            hidden_size: hidden,
        }
    }

    pub fn zeros(in_dim: usize, hidden: usize) -> Self {
        Self {
            w_ih: Tensor::zeros(&[4 * hidden, in_dim]),
            w_hh: Tensor::zeros(&[4 * hidden, hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
            hidden_size: hidden,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_ih.shape()[1]
    }

    fn check_input(&self, input: &Tensor) -> Result<(usize, usize)> {
        let s = input.shape();
        if s.len() != 3 || s[2] != self.in_dim() {
            return Err(dim_err(format!(
                "lstm expects [T, B, {}] input, got {s:?}",
                self.in_dim()
            )));
        }
        if s[0] == 0 || s[1] == 0 {
            return Err(dim_err("lstm input has an empty axis"));
        }
        Ok((s[0], s[1]))
    }

    /// Returns hidden states `[T, B, H]`.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, LstmCache)> {
        let (t_len, b) = self.check_input(input)?;
        let h = self.hidden_size;
        let g4 = 4 * h;
        let tb = t_len * b;
        let mut gates = vec![0.0; tb * g4];
        for row in gates.chunks_exact_mut(g4) {
            row.copy_from_slice(self.bias.data());
        }
        gemm(
            MatRef::new(input.data(), tb, self.in_dim()),
            MatRef::t(self.w_ih.data(), g4, self.in_dim()),
            1.0,
            &mut gates,
        );
        let mut cells = vec![0.0; tb * h];
        let mut hidden = vec![0.0; tb * h];
        for t in 0..t_len {
            let z = &mut gates[t * b * g4..(t + 1) * b * g4];
            if t > 0 {
                let prev = &hidden[(t - 1) * b * h..t * b * h];
                gemm(
                    MatRef::new(prev, b, h),
                    MatRef::t(self.w_hh.data(), g4, h),
                    1.0,
                    z,
                );
            }
            for r in 0..b {
                let zr = &mut z[r * g4..(r + 1) * g4];
                let base = (t * b + r) * h;
                for j in 0..h {
                    let i = sigmoid(zr[j]);
                    let f = sigmoid(zr[h + j]);
                    let g = zr[2 * h + j].tanh();
                    let o = sigmoid(zr[3 * h + j]);
                    zr[j] = i;
                    zr[h + j] = f;
                    zr[2 * h + j] = g;
                    zr[3 * h + j] = o;
                    let c_prev = if t > 0 { cells[base - b * h + j] } else { 0.0 };
                    let c = f * c_prev + i * g;
                    cells[base + j] = c;
                    hidden[base + j] = o * c.tanh();
                }
            }
        }
        let out = Tensor::from_vec(&[t_len, b, h], hidden.clone())?;
        Ok((
            out,
            LstmCache {
                input: input.clone(),
                gates,
                cells,
                hidden,
            },
        ))
    }

    /// `d_hidden` is the loss gradient with respect to every output hidden
    /// state, `[T, B, H]`. Returns `(d_input, [d_w_ih, d_w_hh, d_bias])`.
    pub fn backward(&self, cache: &LstmCache, d_hidden: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let (t_len, b) = self.check_input(&cache.input)?;
        let h = self.hidden_size;
        let g4 = 4 * h;
        let tb = t_len * b;
        if d_hidden.shape() != [t_len, b, h] {
            return Err(dim_err(format!(
                "lstm upstream gradient should be [{t_len}, {b}, {h}], got {:?}",
                d_hidden.shape()
            )));
        }
        let mut dz = vec![0.0; tb * g4];
        let mut dh_next = vec![0.0; b * h];
        let mut dc_next = vec![0.0; b * h];
        for t in (0..t_len).rev() {
            for r in 0..b {
                let base = (t * b + r) * h;
                let gr = &cache.gates[(t * b + r) * g4..(t * b + r + 1) * g4];
                let dzr = &mut dz[(t * b + r) * g4..(t * b + r + 1) * g4];
                for j in 0..h {
                    let (i, f, g, o) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                    let c = cache.cells[base + j];
                    let c_prev = if t > 0 { cache.cells[base - b * h + j] } else { 0.0 };
                    let tc = c.tanh();
                    let dh = d_hidden.data()[base + j] + dh_next[r * h + j];
                    let dc = dh * o * (1.0 - tc * tc) + dc_next[r * h + j];
                    dzr[j] = dc * g * i * (1.0 - i);
                    dzr[h + j] = dc * c_prev * f * (1.0 - f);
                    dzr[2 * h + j] = dc * i * (1.0 - g * g);
                    dzr[3 * h + j] = dh * tc * o * (1.0 - o);
                    dc_next[r * h + j] = dc * f;
                }
            }
            gemm(
                MatRef::new(&dz[t * b * g4..(t + 1) * b * g4], b, g4),
                MatRef::new(self.w_hh.data(), g4, h),
                0.0,
                &mut dh_next,
            );
        }
        let in_dim = self.in_dim();
        let mut d_w_ih = vec![0.0; g4 * in_dim];
        gemm(
            MatRef::t(&dz, tb, g4),
            MatRef::new(cache.input.data(), tb, in_dim),
            0.0,
            &mut d_w_ih,
        );
        let mut d_w_hh = vec![0.0; g4 * h];
        if t_len > 1 {
            gemm(
                MatRef::t(&dz[b * g4..], tb - b, g4),
                MatRef::new(&cache.hidden[..(tb - b) * h], tb - b, h),
                0.0,
                &mut d_w_hh,
            );
        }
        let mut d_bias = vec![0.0; g4];
        for row in dz.chunks_exact(g4) {
            for (d, v) in d_bias.iter_mut().zip(row) {
                *d += v;
            }
        }
        let mut d_in = vec![0.0; tb * in_dim];
        gemm(
            MatRef::new(&dz, tb, g4),
            MatRef::new(self.w_ih.data(), g4, in_dim),
            0.0,
            &mut d_in,
        );
        Ok((
            Tensor::from_vec(&[t_len, b, in_dim], d_in)?,
            vec![
                Tensor::from_vec(&[g4, in_dim], d_w_ih)?,
                Tensor::from_vec(&[g4, h], d_w_hh)?,
                Tensor::from_vec(&[g4], d_bias)?,
            ],
        ))
    }
}

impl Parameters for LstmLayer {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("w_ih".into(), &self.w_ih),
            ("w_hh".into(), &self.w_hh),
            ("bias".into(), &self.bias),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.bias]
    }
}
