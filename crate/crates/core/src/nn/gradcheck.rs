//! Central finite-difference gradient checking.

use super::Parameters;
use crate::tensor::Tensor;

/// Largest relative error between `analytic` and central differences of `f`
/// over every parameter element of `model`.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`, so gradients that are
/// both essentially zero compare as absolute differences.
pub fn max_relative_error<P, F>(model: &P, f: F, analytic: &[Tensor], eps: f64) -> f64
where
    P: Parameters + Clone,
    F: Fn(&P) -> f64,
{
    let mut probe = model.clone();
    let n_blocks = probe.params_mut().len();
    assert_eq!(n_blocks, analytic.len(), "one gradient per parameter block");
    let mut worst = 0.0f64;
    for (b, grad) in analytic.iter().enumerate() {
        for i in 0..grad.len() {
            let orig = probe.params_mut()[b].data()[i];
            probe.params_mut()[b].data_mut()[i] = orig + eps;
            let plus = f(&probe);
            probe.params_mut()[b].data_mut()[i] = orig - eps;
            let minus = f(&probe);
            probe.params_mut()[b].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.data()[i];
            let denom = a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    worst
}

/// Checks a function that returns both its value and analytic gradients.
pub fn grad_check<P, F>(model: &P, f: F, eps: f64) -> f64
where
    P: Parameters + Clone,
    F: Fn(&P) -> (f64, Vec<Tensor>),
{
    let (_, grads) = f(model);
    max_relative_error(model, |p| f(p).0, &grads, eps)
}
