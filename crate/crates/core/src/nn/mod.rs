//! Dense neural-network stack: layers, exact backpropagation, Adam.

mod adam;
pub mod checkpoint;
mod layer;
mod matrix;
mod network;

pub use adam::{adam_step, AdamState};
pub use layer::{BatchNorm, Dense, Layer, LayerSpec, LeakyRelu, DEFAULT_LEAKY_SLOPE};
pub use matrix::Matrix;
pub use network::{DenseNetwork, Gradients, Mode, Tape};
