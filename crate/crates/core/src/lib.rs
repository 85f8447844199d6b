//! Learned lossless image compression through interpolation.
//!
//! An RGB image is converted to YCoCg-R and split into a pyramid of
//! even/odd subbands. The coarsest subband is stored with fixed-length codes;
//! every other subband is range coded under discretized Gaussian mixtures
//! whose parameters three small convolutional interpolators predict from the
//! subbands already decoded at the same scale.

pub mod codec;
pub mod coder;
pub mod colorspace;
pub mod error;
pub mod imageio;
pub mod interpolator;
pub mod nnet;
pub mod plane;
pub mod probmodel;
pub mod pyramid;
pub mod trainer;

pub use codec::{decode, encode, estimate_bits, Model, RateEstimate};
pub use error::{Error, Result};
pub use interpolator::{IcnnConfig, IcnnWeights};
pub use plane::Plane;
