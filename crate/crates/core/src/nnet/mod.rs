//! Just enough of a neural-network engine to run and train the interpolators:
//! tensors, 2-D convolution over an explicit tap table with replicate
//! padding, ReLU, addition, a reverse-mode tape and the Adam optimizer.
//!
//! Spatial activations are stored pixel-major as `[height, width, channels]`
//! and convolution weights as `[kh, kw, in_channels, out_channels]`, so the
//! innermost loops run over contiguous output channels.

mod adam;
mod conv;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use conv::{conv2d, conv2d_backward, ConvGrads, ConvSpec};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{Real, Tensor};
