//! Adversarial, cycle-consistency and identity losses with gradients.

use serde::{Deserialize, Serialize};

use super::net::{Discriminator, Generator};
use super::{CycleGanConfig, CycleGanModel};
use crate::error::{Error, Result};
use crate::nn::Parameters;
use crate::tensor::Tensor;

pub const PROB_CLAMP: f64 = 1e-7;

fn non_empty(t: &Tensor) -> Result<()> {
    if t.is_empty() {
        Err(Error::EmptyBatch)
    } else {
        Ok(())
    }
}

/// Clamped `−mean log p` and its gradient with respect to `p`.
fn neg_log_mean(p: &Tensor) -> (f64, Tensor) {
    let n = p.len() as f64;
    let clamp = |v: f64| v.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let loss = -p.data().iter().map(|&v| clamp(v).ln()).sum::<f64>() / n;
    let grad = p.map(|v| if v == clamp(v) { -1.0 / (v * n) } else { 0.0 });
    (loss, grad)
}

/// Clamped `−mean log(1 − p)` and its gradient.
fn neg_log_one_minus_mean(p: &Tensor) -> (f64, Tensor) {
    let n = p.len() as f64;
    let clamp = |v: f64| v.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let loss = -p.data().iter().map(|&v| (1.0 - clamp(v)).ln()).sum::<f64>() / n;
    let grad = p.map(|v| if v == clamp(v) { 1.0 / ((1.0 - v) * n) } else { 0.0 });
    (loss, grad)
}

/// `(d_loss, g_loss)` from discriminator probabilities.
pub fn adversarial_from_probs(p_real: &Tensor, p_fake: &Tensor) -> Result<(f64, f64)> {
    non_empty(p_real)?;
    non_empty(p_fake)?;
    let (r, _) = neg_log_mean(p_real);
    let (f, _) = neg_log_one_minus_mean(p_fake);
    let (g, _) = neg_log_mean(p_fake);
    Ok((r + f, g))
}

/// `d_loss = −E log D(real) − E log(1 − D(fake))`, `g_loss = −E log D(fake)`.
pub fn adversarial_loss(d: &Discriminator, real: &Tensor, fake: &Tensor) -> Result<(f64, f64)> {
    non_empty(real)?;
    non_empty(fake)?;
    adversarial_from_probs(&d.forward(real)?.0, &d.forward(fake)?.0)
}

/// Mean absolute difference and its gradient with respect to `a`.
pub fn l1_mean(a: &Tensor, b: &Tensor) -> (f64, Tensor) {
    let n = a.len() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(a.shape());
    for ((g, x), y) in grad.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
        let diff = x - y;
        loss += diff.abs() / n;
        *g = if diff > 0.0 {
            1.0 / n
        } else if diff < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    }
    (loss, grad)
}

pub fn cycle_loss(g_xy: &Generator, g_yx: &Generator, x: &Tensor, y: &Tensor) -> Result<f64> {
    non_empty(x)?;
    non_empty(y)?;
    let fwd = g_yx.forward(&g_xy.forward(x)?.0)?.0;
    let bwd = g_xy.forward(&g_yx.forward(y)?.0)?.0;
    Ok(l1_mean(&fwd, x).0 + l1_mean(&bwd, y).0)
}

pub fn identity_loss(g_xy: &Generator, g_yx: &Generator, x: &Tensor, y: &Tensor) -> Result<f64> {
    non_empty(x)?;
    non_empty(y)?;
    Ok(l1_mean(&g_yx.forward(x)?.0, x).0 + l1_mean(&g_xy.forward(y)?.0, y).0)
}

/// Identity-loss weight at a given iteration.
pub fn lambda_id(iter: usize, config: &CycleGanConfig) -> f64 {
    if iter < config.id_cutoff_iters {
        config.lambda_id
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// `−E log D_Y(G_XY(x))`.
    pub g_adv_fwd: f64,
    /// `−E log D_X(G_YX(y))`.
    pub g_adv_bwd: f64,
    pub cycle: f64,
    pub identity: f64,
    pub lambda_cy: f64,
    pub lambda_id: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// Weighted sum of already-computed components.
    pub fn combine(
        g_adv_fwd: f64,
        g_adv_bwd: f64,
        cycle: f64,
        identity: f64,
        iter: usize,
        config: &CycleGanConfig,
    ) -> Self {
        let lid = lambda_id(iter, config);
        Self {
            g_adv_fwd,
            g_adv_bwd,
            cycle,
            identity,
            lambda_cy: config.lambda_cy,
            lambda_id: lid,
            total: g_adv_fwd + g_adv_bwd + config.lambda_cy * cycle + lid * identity,
        }
    }
}

/// Generator objective with its breakdown.
pub fn total_loss(
    model: &CycleGanModel,
    x: &Tensor,
    y: &Tensor,
    iter: usize,
    config: &CycleGanConfig,
) -> Result<LossBreakdown> {
    Ok(generator_grads(model, x, y, iter, config, false)?.0)
}

/// Generator objective and, when `with_grads`, gradients for
/// `[g_xy blocks.., g_yx blocks..]`.
pub fn generator_grads(
    model: &CycleGanModel,
    x: &Tensor,
    y: &Tensor,
    iter: usize,
    config: &CycleGanConfig,
    with_grads: bool,
) -> Result<(LossBreakdown, Vec<Tensor>)> {
    non_empty(x)?;
    non_empty(y)?;
    let (gxy, gyx) = (&model.g_xy, &model.g_yx);
    let (fake_y, c_fy) = gxy.forward(x)?;
    let (fake_x, c_fx) = gyx.forward(y)?;

    let (p_fy, c_dy) = model.d_y.forward(&fake_y)?;
    let (adv_f, dp_fy) = neg_log_mean(&p_fy);
    let (p_fx, c_dx) = model.d_x.forward(&fake_x)?;
    let (adv_b, dp_fx) = neg_log_mean(&p_fx);

    let (rec_x, c_rx) = gyx.forward(&fake_y)?;
    let (cyc_x, d_rx) = l1_mean(&rec_x, x);
    let (rec_y, c_ry) = gxy.forward(&fake_x)?;
    let (cyc_y, d_ry) = l1_mean(&rec_y, y);

    let (id_x, c_ix) = gyx.forward(x)?;
    let (idl_x, d_ix) = l1_mean(&id_x, x);
    let (id_y, c_iy) = gxy.forward(y)?;
    let (idl_y, d_iy) = l1_mean(&id_y, y);

    let br = LossBreakdown::combine(adv_f, adv_b, cyc_x + cyc_y, idl_x + idl_y, iter, config);
    if !with_grads {
        return Ok((br, Vec::new()));
    }
    let scaled = |t: &Tensor, k: f64| {
        let mut t = t.clone();
        t.scale(k);
        t
    };
    let mut g_xy = gxy.zero_grads();
    let mut g_yx = gyx.zero_grads();
    let acc = |dst: &mut Vec<Tensor>, src: Vec<Tensor>| {
        for (d, s) in dst.iter_mut().zip(&src) {
            d.add_assign(s);
        }
    };

    // gradient reaching fake_y and fake_x
    let mut d_fake_y = model.d_y.backward(&c_dy, &dp_fy)?.0;
    let mut d_fake_x = model.d_x.backward(&c_dx, &dp_fx)?.0;

    let (d, g) = gyx.backward(&c_rx, &scaled(&d_rx, config.lambda_cy))?;
    d_fake_y.add_assign(&d);
    acc(&mut g_yx, g);
    let (d, g) = gxy.backward(&c_ry, &scaled(&d_ry, config.lambda_cy))?;
    d_fake_x.add_assign(&d);
    acc(&mut g_xy, g);

    if br.lambda_id != 0.0 {
        acc(&mut g_yx, gyx.backward(&c_ix, &scaled(&d_ix, br.lambda_id))?.1);
        acc(&mut g_xy, gxy.backward(&c_iy, &scaled(&d_iy, br.lambda_id))?.1);
    }
    acc(&mut g_xy, gxy.backward(&c_fy, &d_fake_y)?.1);
    acc(&mut g_yx, gyx.backward(&c_fx, &d_fake_x)?.1);
    g_xy.extend(g_yx);
    Ok((br, g_xy))
}

/// Discriminator objective `d_loss(D_Y) + d_loss(D_X)` and gradients for
/// `[d_x blocks.., d_y blocks..]`.
pub fn discriminator_grads(
    model: &CycleGanModel,
    x: &Tensor,
    y: &Tensor,
) -> Result<(f64, Vec<Tensor>)> {
    non_empty(x)?;
    non_empty(y)?;
    let fake_y = model.g_xy.forward(x)?.0;
    let fake_x = model.g_yx.forward(y)?.0;
    let mut loss = 0.0;
    let mut grads = Vec::new();
    for (d, real, fake) in [(&model.d_x, x, &fake_x), (&model.d_y, y, &fake_y)] {
        let (pr, cr) = d.forward(real)?;
        let (pf, cf) = d.forward(fake)?;
        let (lr, dr) = neg_log_mean(&pr);
        let (lf, df) = neg_log_one_minus_mean(&pf);
        loss += lr + lf;
        let mut g = d.backward(&cr, &dr)?.1;
        for (a, b) in g.iter_mut().zip(d.backward(&cf, &df)?.1) {
            a.add_assign(&b);
        }
        grads.extend(g);
    }
    Ok((loss, grads))
}
