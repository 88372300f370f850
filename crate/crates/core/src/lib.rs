//! Emotional voice conversion as data augmentation for speaker verification.

pub mod converter;
pub mod corpus;
pub mod dsp;
pub mod emotion;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use emotion::Emotion;
pub use error::{Error, Result};
pub use rng::SeededRng;
pub use tensor::Tensor;
