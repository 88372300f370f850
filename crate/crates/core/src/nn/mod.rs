//! Small differentiable building blocks with hand-written backward passes.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod gradcheck;
pub mod lstm;

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use dense::{sigmoid, Activation, DenseCache, DenseLayer};
pub use gradcheck::{grad_check, max_relative_error};
pub use lstm::{LstmCache, LstmLayer};

use crate::error::{dim_err, Result};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// Uniform `(-r, r)` initialization.
pub fn init_uniform(shape: &[usize], r: f64, rng: &mut SeededRng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform_range(-r, r)).collect();
    Tensor::from_vec(shape, data).expect("shape product matches")
}

/// A model with an ordered list of named parameter tensors. Gradients are
/// always passed as a `Vec<Tensor>` in the same order.
pub trait Parameters {
    fn named_params(&self) -> Vec<(String, &Tensor)>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn params(&self) -> Vec<&Tensor> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    fn zero_grads(&self) -> Vec<Tensor> {
        self.params().iter().map(|t| Tensor::zeros(t.shape())).collect()
    }

    /// Copies parameter values from `blocks` (as produced by
    /// [`named_params`](Self::named_params)), checking names and shapes.
    fn load_params(&mut self, blocks: &[(String, Tensor)]) -> Result<()> {
        let names: Vec<String> = self.named_params().into_iter().map(|(n, _)| n).collect();
        if names.len() != blocks.len() {
            return Err(dim_err(format!(
                "model has {} parameter blocks, checkpoint has {}",
                names.len(),
                blocks.len()
            )));
        }
        for ((name, dst), (bname, src)) in names.iter().zip(self.params_mut()).zip(blocks) {
            if name != bname || dst.shape() != src.shape() {
                return Err(dim_err(format!(
                    "parameter {name} {:?} does not match block {bname} {:?}",
                    dst.shape(),
                    src.shape()
                )));
            }
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }
}

impl Parameters for Tensor {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        vec![("value".into(), self)]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![self]
    }
}

impl<P: Parameters> Parameters for Vec<P> {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        self.iter()
            .enumerate()
            .flat_map(|(i, p)| {
                p.named_params()
                    .into_iter()
                    .map(move |(n, t)| (format!("{i}.{n}"), t))
            })
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.iter_mut().flat_map(|p| p.params_mut()).collect()
    }
}

/// Prefixes every name with `prefix.`.
pub fn prefixed<'a>(prefix: &str, p: &'a impl Parameters) -> Vec<(String, &'a Tensor)> {
    p.named_params()
        .into_iter()
        .map(|(n, t)| (format!("{prefix}.{n}"), t))
        .collect()
}
