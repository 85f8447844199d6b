//! The three interpolator networks and their weight files.
//!
//! Each interpolator predicts the mixture parameters of one subband from the
//! subbands already decoded at the same scale, and is made of four separate
//! heads producing the mixture logits, means, log-scales and cross-channel
//! coefficients. A head is a first layer of one convolution per context
//! subband (outputs summed, then ReLU) followed by 1x1 convolutions with ReLU
//! between them and none after the last.
//!
//! The first-layer windows cover the context pixels nearest to the target on
//! the full-resolution grid. Offsets are relative to the target's own
//! `(u, v)` index, read in the context subband's index space:
//!
//! | target | context | kernel | rows        | cols        |
//! |--------|---------|--------|-------------|-------------|
//! | x11    | x00     | 4x4    | u-1 ..= u+2 | v-1 ..= v+2 |
//! | x01    | x00     | 3x4    | u-1 ..= u+1 | v-1 ..= v+2 |
//! | x01    | x11     | 4x3    | u-2 ..= u+1 | v-1 ..= v+1 |
//! | x10    | x00     | 4x3    | u-1 ..= u+2 | v-1 ..= v+1 |
//! | x10    | x11     | 3x4    | u-1 ..= u+1 | v-2 ..= v+1 |
//! | x10    | x01     | 4x4    | u-1 ..= u+2 | v-2 ..= v+1 |
//!
//! Networks work on values scaled by [`VALUE_SCALE`] around per-channel
//! centres; [`RawParams`] outputs are mapped back to symbol units.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nnet::{conv2d, ConvSpec, Real, Tape, Tensor, Var};
use crate::plane::{Plane, CHANNELS};
use crate::probmodel::RawParams;
use crate::pyramid::{self, Subband};

/// Network inputs are `(value - centre) / VALUE_SCALE`; mean outputs are
/// mapped back with the same affine map and log-scale outputs are offset by
/// `ln(VALUE_SCALE)`.
pub const VALUE_SCALE: f64 = 64.0;
/// Per-channel centres for Y, Co, Cg.
pub const CHANNEL_CENTRES: [f64; 3] = [128.0, 0.0, 0.0];
/// Coefficient outputs are multiplied by this before use.
pub const ALPHA_SCALE: f64 = 1.0 / 64.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IcnnConfig {
    pub channels: usize,
    pub layers: usize,
    pub mixtures: usize,
    pub scales: usize,
    pub share_across_scales: bool,
    /// One `(a, b, c)` triple per mixture instead of one per pixel.
    #[serde(default)]
    pub alpha_per_mixture: bool,
}

impl Default for IcnnConfig {
    fn default() -> Self {
        Self {
            channels: 88,
            layers: 3,
            mixtures: 3,
            scales: 5,
            share_across_scales: true,
            alpha_per_mixture: false,
        }
    }
}

impl std::fmt::Display for IcnnConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "C={} L={} K={} S={} shared={} alpha_per_mixture={}",
            self.channels,
            self.layers,
            self.mixtures,
            self.scales,
            self.share_across_scales,
            self.alpha_per_mixture
        )
    }
}

impl IcnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 2 {
            return Err(Error::Argument(format!("need at least 2 layers, got {}", self.layers)));
        }
        if self.channels < 1 || self.mixtures < 1 || self.scales < 1 {
            return Err(Error::Argument(format!("invalid configuration {self}")));
        }
        Ok(())
    }

    /// Number of distinct interpolator sets (1 when shared across scales).
    pub fn weight_sets(&self) -> usize {
        if self.share_across_scales {
            1
        } else {
            self.scales
        }
    }

    pub fn head_outputs(&self, head: HeadKind) -> usize {
        match head {
            HeadKind::Alpha if !self.alpha_per_mixture => 3,
            _ => CHANNELS * self.mixtures,
        }
    }
}

/// Context subbands an interpolator can read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ContextBand {
    X00,
    X11,
    X01,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeadKind {
    Pi,
    Mu,
    Sigma,
    Alpha,
}

impl HeadKind {
    pub const ALL: [HeadKind; 4] = [HeadKind::Pi, HeadKind::Mu, HeadKind::Sigma, HeadKind::Alpha];
}

/// First-layer geometry of one context branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TapGeometry {
    pub context: ContextBand,
    pub kernel: (usize, usize),
    pub origin: (isize, isize),
}

const fn tap(context: ContextBand, kernel: (usize, usize), origin: (isize, isize)) -> TapGeometry {
    TapGeometry {
        context,
        kernel,
        origin,
    }
}

/// Context branches of the interpolator for `target`, in input order.
pub fn geometry(target: Subband) -> &'static [TapGeometry] {
    use ContextBand::*;
    const G11: [TapGeometry; 1] = [tap(X00, (4, 4), (-1, -1))];
    const G01: [TapGeometry; 2] = [tap(X00, (3, 4), (-1, -1)), tap(X11, (4, 3), (-2, -1))];
    const G10: [TapGeometry; 3] = [
        tap(X00, (4, 3), (-1, -1)),
        tap(X11, (3, 4), (-1, -2)),
        tap(X01, (4, 4), (-1, -2)),
    ];
    match target {
        Subband::X11 => &G11,
        Subband::X01 => &G01,
        Subband::X10 => &G10,
    }
}

/// A convolution with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<T> {
    pub spec: ConvSpec,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Head<T> {
    pub kind: HeadKind,
    pub branches: Vec<ConvLayer<T>>,
    pub layers: Vec<ConvLayer<T>>,
}

impl<T> Head<T> {
    pub fn convs(&self) -> impl Iterator<Item = &ConvLayer<T>> {
        self.branches.iter().chain(&self.layers)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interpolator<T> {
    pub target: Subband,
    pub heads: Vec<Head<T>>,
}

/// All learned tensors. `sets[s][t]` is the interpolator for target
/// `Subband::ORDER[t]` in weight set `s`; there is a single set when weights
/// are shared across scales.
#[derive(Clone, Debug, PartialEq)]
pub struct IcnnWeights<T = f32> {
    config: IcnnConfig,
    sets: Vec<Vec<Interpolator<T>>>,
}

fn head_specs(config: &IcnnConfig, target: Subband, kind: HeadKind) -> Result<(Vec<ConvSpec>, Vec<ConvSpec>)> {
    let c = config.channels;
    let branches = geometry(target)
        .iter()
        .map(|g| ConvSpec::window(CHANNELS, c, g.kernel, g.origin))
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(config.layers - 1);
    for _ in 0..config.layers - 2 {
        layers.push(ConvSpec::pointwise(c, c)?);
    }
    layers.push(ConvSpec::pointwise(c, config.head_outputs(kind))?);
    Ok((branches, layers))
}

/// Exact number of learned scalars.
pub fn count_params(config: &IcnnConfig) -> usize {
    let per_set: usize = Subband::ORDER
        .iter()
        .flat_map(|&t| HeadKind::ALL.iter().map(move |&h| (t, h)))
        .map(|(t, h)| {
            let (b, l) = head_specs(config, t, h).expect("valid config");
            b.iter().chain(&l).map(ConvSpec::num_params).sum::<usize>()
        })
        .sum();
    per_set * config.weight_sets()
}

/// Multiply-accumulates per target pixel of one interpolator (all heads).
fn macs_per_target_pixel(config: &IcnnConfig, target: Subband) -> usize {
    HeadKind::ALL
        .iter()
        .map(|&h| {
            let (b, l) = head_specs(config, target, h).expect("valid config");
            b.iter().chain(&l).map(ConvSpec::macs_per_position).sum::<usize>()
        })
        .sum()
}

/// Network multiply-accumulates over all scales divided by the image pixel
/// count, in thousands (KMAC/pixel). Bias additions are not counted.
pub fn count_macs(config: &IcnnConfig, height: usize, width: usize) -> f64 {
    let shapes = pyramid::scale_shapes((height, width), config.scales);
    let mut total = 0usize;
    for parent in &shapes[..config.scales] {
        for t in Subband::ORDER {
            let (h, w) = t.shape_in(*parent);
            total += h * w * macs_per_target_pixel(config, t);
        }
    }
    total as f64 / (height * width) as f64 / 1000.0
}

/// Scales a YCoCg-R plane into a `[h, w, 3]` network input.
pub fn context_tensor<T: Real>(plane: &Plane) -> Tensor<T> {
    let (h, w) = plane.shape();
    let n = h * w;
    let mut data = vec![T::zero(); n * CHANNELS];
    for c in 0..CHANNELS {
        let centre = CHANNEL_CENTRES[c];
        for (i, &v) in plane.channel(c).iter().enumerate() {
            data[i * CHANNELS + c] = T::from_f64_lossy((v as f64 - centre) / VALUE_SCALE);
        }
    }
    Tensor::from_vec(&[h, w, CHANNELS], data).expect("shape matches")
}

/// Maps head outputs from network units to symbol units.
pub fn to_symbol_units<T: Real>(config: &IcnnConfig, net: [Tensor<T>; 4]) -> RawParams<T> {
    let k = config.mixtures;
    let [pi, mut mu, mut sigma, mut alpha] = net;
    let scale = T::from_f64_lossy(VALUE_SCALE);
    let n_mu = mu.shape()[2];
    for (i, m) in mu.data_mut().iter_mut().enumerate() {
        let centre = T::from_f64_lossy(CHANNEL_CENTRES[(i % n_mu) / k]);
        *m = centre + scale * *m;
    }
    let log_scale = T::from_f64_lossy(VALUE_SCALE.ln());
    for s in sigma.data_mut() {
        *s = *s + log_scale;
    }
    let a = T::from_f64_lossy(ALPHA_SCALE);
    for x in alpha.data_mut() {
        *x = *x * a;
    }
    RawParams {
        mixtures: k,
        pi,
        mu,
        sigma,
        alpha,
    }
}

impl<T: Real> IcnnWeights<T> {
    /// He-uniform weights (bound `sqrt(6 / fan_in)`), zero biases. Values
    /// are drawn in single precision so every element type sees the same
    /// network for a given seed.
    pub fn build(config: &IcnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut make = |spec: ConvSpec| -> ConvLayer<T> {
            let fan_in = (spec.taps.len() * spec.in_channels) as f32;
            let bound = (6.0 / fan_in).sqrt();
            let shape = spec.weight_shape();
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| T::from_f64_lossy(rng.gen_range(-bound..bound) as f64))
                .collect();
            ConvLayer {
                weight: Tensor::from_vec(&shape, data).expect("shape"),
                bias: Tensor::zeros(&[spec.out_channels]),
                spec,
            }
        };
        let mut sets = Vec::with_capacity(config.weight_sets());
        for _ in 0..config.weight_sets() {
            let mut set = Vec::with_capacity(3);
            for target in Subband::ORDER {
                let mut heads = Vec::with_capacity(4);
                for kind in HeadKind::ALL {
                    let (b, l) = head_specs(config, target, kind)?;
                    heads.push(Head {
                        kind,
                        branches: b.into_iter().map(&mut make).collect(),
                        layers: l.into_iter().map(&mut make).collect(),
                    });
                }
                set.push(Interpolator { target, heads });
            }
            sets.push(set);
        }
        Ok(Self {
            config: config.clone(),
            sets,
        })
    }

    pub fn config(&self) -> &IcnnConfig {
        &self.config
    }

    pub fn sets(&self) -> &[Vec<Interpolator<T>>] {
        &self.sets
    }

    /// Every convolution in canonical order: set, target (x11, x01, x10),
    /// head (pi, mu, sigma, alpha), first-layer branches, then 1x1 layers.
    pub fn convs(&self) -> impl Iterator<Item = &ConvLayer<T>> {
        self.sets
            .iter()
            .flatten()
            .flat_map(|i| i.heads.iter())
            .flat_map(|h| h.convs())
    }

    pub fn convs_mut(&mut self) -> impl Iterator<Item = &mut ConvLayer<T>> {
        self.sets
            .iter_mut()
            .flatten()
            .flat_map(|i| i.heads.iter_mut())
            .flat_map(|h| h.branches.iter_mut().chain(h.layers.iter_mut()))
    }

    /// Parameter tensors in canonical order (each weight, then its bias).
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        self.convs().flat_map(|c| [&c.weight, &c.bias]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.convs_mut()
            .flat_map(|c| [&mut c.weight, &mut c.bias])
            .collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.convs().map(|c| c.weight.len() + c.bias.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.convs().all(|c| c.weight.all_finite() && c.bias.all_finite())
    }

    pub fn cast<U: Real>(&self) -> IcnnWeights<U> {
        IcnnWeights {
            config: self.config.clone(),
            sets: self
                .sets
                .iter()
                .map(|set| {
                    set.iter()
                        .map(|i| Interpolator {
                            target: i.target,
                            heads: i
                                .heads
                                .iter()
                                .map(|h| {
                                    let cast = |c: &ConvLayer<T>| ConvLayer {
                                        spec: c.spec.clone(),
                                        weight: c.weight.cast(),
                                        bias: c.bias.cast(),
                                    };
                                    Head {
                                        kind: h.kind,
                                        branches: h.branches.iter().map(cast).collect(),
                                        layers: h.layers.iter().map(cast).collect(),
                                    }
                                })
                                .collect(),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    fn set_index(&self, scale: usize) -> Result<usize> {
        if scale == 0 {
            return Err(Error::Argument("scales are numbered from 1".into()));
        }
        if self.config.share_across_scales {
            Ok(0)
        } else if scale <= self.config.scales {
            Ok(scale - 1)
        } else {
            Err(Error::Argument(format!(
                "scale {scale} has no weights; trained for {} scales",
                self.config.scales
            )))
        }
    }

    pub fn interpolator(&self, scale: usize, target: Subband) -> Result<&Interpolator<T>> {
        Ok(&self.sets[self.set_index(scale)?][target.index()])
    }

    /// Head outputs in network units: `[h, w, n]` maps for pi, mu, sigma and
    /// alpha in that order.
    pub fn forward_network(
        &self,
        scale: usize,
        target: Subband,
        context: &[&Tensor<T>],
        out_shape: (usize, usize),
    ) -> Result<[Tensor<T>; 4]> {
        let interp = self.interpolator(scale, target)?;
        check_context(target, context.len())?;
        let mut outs = Vec::with_capacity(4);
        for head in &interp.heads {
            let mut acc: Option<Tensor<T>> = None;
            for (branch, input) in head.branches.iter().zip(context) {
                let y = conv2d(input, &branch.weight, &branch.bias, &branch.spec, out_shape)?;
                acc = Some(match acc {
                    None => y,
                    Some(mut a) => {
                        a.add_assign(&y)?;
                        a
                    }
                });
            }
            let mut h = acc.expect("at least one branch").relu();
            for (i, layer) in head.layers.iter().enumerate() {
                h = conv2d(&h, &layer.weight, &layer.bias, &layer.spec, out_shape)?;
                if i + 1 < head.layers.len() {
                    h = h.relu();
                }
            }
            outs.push(h);
        }
        Ok(outs.try_into().expect("four heads"))
    }

    /// Raw distribution parameters for `target` given its context subbands
    /// (x11: `[x00]`; x01: `[x00, x11]`; x10: `[x00, x11, x01]`).
    pub fn forward(
        &self,
        scale: usize,
        target: Subband,
        context: &[&Tensor<T>],
        out_shape: (usize, usize),
    ) -> Result<RawParams<T>> {
        let net = self.forward_network(scale, target, context, out_shape)?;
        Ok(to_symbol_units(&self.config, net))
    }
}

fn check_context(target: Subband, given: usize) -> Result<()> {
    let expected = geometry(target).len();
    if given != expected {
        return Err(Error::Argument(format!(
            "{} interpolator takes {expected} context subbands, got {given}",
            target.name()
        )));
    }
    Ok(())
}

/// Parameter leaves placed on a tape by [`IcnnWeights::forward_tape`]:
/// canonical convolution index with its weight and bias variables.
pub type TapeParams = Vec<(usize, Var, Var)>;

impl IcnnWeights<f64> {
    /// Same computation as [`IcnnWeights::forward_network`], recorded on a
    /// tape. Parameter leaves for the interpolator used are added to the tape
    /// and returned alongside the four head outputs.
    pub fn forward_tape(
        &self,
        tape: &mut Tape<f64>,
        scale: usize,
        target: Subband,
        context: &[Var],
        out_shape: (usize, usize),
    ) -> Result<(TapeParams, [Var; 4])> {
        check_context(target, context.len())?;
        let set = self.set_index(scale)?;
        let mut index = 0;
        for s in 0..set {
            index += self.sets[s].iter().flat_map(|i| &i.heads).map(|h| h.convs().count()).sum::<usize>();
        }
        for t in &self.sets[set][..target.index()] {
            index += t.heads.iter().map(|h| h.convs().count()).sum::<usize>();
        }
        let interp = &self.sets[set][target.index()];
        let mut params = Vec::new();
        let mut outs = Vec::with_capacity(4);
        for head in &interp.heads {
            let mut leaf = |tape: &mut Tape<f64>, c: &ConvLayer<f64>| {
                let w = tape.leaf(c.weight.clone());
                let b = tape.leaf(c.bias.clone());
                params.push((index, w, b));
                index += 1;
                (w, b)
            };
            let mut acc = None;
            for (branch, &input) in head.branches.iter().zip(context) {
                let (w, b) = leaf(tape, branch);
                let y = tape.conv2d(input, w, b, &branch.spec, out_shape)?;
                acc = Some(match acc {
                    None => y,
                    Some(a) => tape.add(a, y)?,
                });
            }
            let mut h = tape.relu(acc.expect("at least one branch"))?;
            for (i, layer) in head.layers.iter().enumerate() {
                let (w, b) = leaf(tape, layer);
                h = tape.conv2d(h, w, b, &layer.spec, out_shape)?;
                if i + 1 < head.layers.len() {
                    h = tape.relu(h)?;
                }
            }
            outs.push(h);
        }
        Ok((params, outs.try_into().expect("four heads")))
    }
}

const WEIGHTS_MAGIC: &[u8; 4] = b"LLTW";
pub const WEIGHTS_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct WeightsHeader {
    format: String,
    config: IcnnConfig,
    tensors: Vec<Vec<usize>>,
}

fn digest8(bytes: &[u8]) -> [u8; 8] {
    let d = Sha256::digest(bytes);
    let mut out = [0; 8];
    out.copy_from_slice(&d[..8]);
    out
}

impl IcnnWeights<f32> {
    /// Serialized weight file:
    ///
    /// ```text
    /// "LLTW" | version u8 | header length u32 LE | JSON header
    ///        | f32 LE tensor data in canonical order | 8-byte checksum
    /// ```
    ///
    /// The checksum is the first 8 bytes of SHA-256 over everything before it.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = WeightsHeader {
            format: "llicti-weights".into(),
            config: self.config.clone(),
            tensors: self.tensors().iter().map(|t| t.shape().to_vec()).collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(json.len() + 4 * self.num_scalars() + 17);
        out.extend_from_slice(WEIGHTS_MAGIC);
        out.push(WEIGHTS_VERSION);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.tensors() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = digest8(&out);
        out.extend_from_slice(&sum);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |m: &str| Error::Format(format!("weight file: {m}"));
        if bytes.len() < 4 + 1 + 4 + 8 || &bytes[..4] != WEIGHTS_MAGIC {
            return Err(fmt("bad magic or truncated"));
        }
        if bytes[4] != WEIGHTS_VERSION {
            return Err(fmt(&format!(
                "version {} (this build reads {WEIGHTS_VERSION})",
                bytes[4]
            )));
        }
        let (body, sum) = bytes.split_at(bytes.len() - 8);
        if digest8(body) != sum {
            return Err(fmt("checksum mismatch (truncated or corrupted)"));
        }
        let hlen = u32::from_le_bytes(body[5..9].try_into().unwrap()) as usize;
        let json = body.get(9..9 + hlen).ok_or_else(|| fmt("header truncated"))?;
        let header: WeightsHeader =
            serde_json::from_slice(json).map_err(|e| fmt(&format!("header: {e}")))?;
        let mut weights = Self::build(&header.config, 0).map_err(|e| fmt(&e.to_string()))?;
        let shapes: Vec<Vec<usize>> = weights.tensors().iter().map(|t| t.shape().to_vec()).collect();
        if shapes != header.tensors {
            return Err(fmt("tensor list does not match the declared configuration"));
        }
        let mut data = &body[9 + hlen..];
        if data.len() != 4 * weights.num_scalars() {
            return Err(fmt(&format!(
                "{} data bytes, expected {}",
                data.len(),
                4 * weights.num_scalars()
            )));
        }
        for t in weights.tensors_mut() {
            for v in t.data_mut() {
                *v = f32::from_le_bytes(data[..4].try_into().unwrap());
                data = &data[4..];
            }
        }
        if !weights.all_finite() {
            return Err(fmt("non-finite parameter"));
        }
        Ok(weights)
    }

    /// 64-bit identifier of this weight set, written into bitstreams.
    pub fn checksum(&self) -> u64 {
        let bytes = self.to_bytes();
        u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap())
    }
}

pub fn save_weights(weights: &IcnnWeights<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&weights.to_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<IcnnWeights<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    IcnnWeights::from_bytes(&bytes)
}

/// Loads a weight file and checks that it was built for `expected`.
pub fn load_weights_for(path: impl AsRef<Path>, expected: &IcnnConfig) -> Result<IcnnWeights<f32>> {
    let weights = load_weights(path)?;
    if weights.config() != expected {
        return Err(Error::Format(format!(
            "weight file configuration [{}] differs from expected [{expected}]",
            weights.config()
        )));
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::ColorSpace;

    fn tiny() -> IcnnConfig {
        IcnnConfig {
            channels: 1,
            layers: 2,
            mixtures: 1,
            scales: 5,
            share_across_scales: true,
            alpha_per_mixture: false,
        }
    }

    #[test]
    fn geometry_matches_kernel_table() {
        let sizes = |t| geometry(t).iter().map(|g| (g.context, g.kernel)).collect::<Vec<_>>();
        use ContextBand::*;
        assert_eq!(sizes(Subband::X11), vec![(X00, (4, 4))]);
        assert_eq!(sizes(Subband::X01), vec![(X00, (3, 4)), (X11, (4, 3))]);
        assert_eq!(sizes(Subband::X10), vec![(X00, (4, 3)), (X11, (3, 4)), (X01, (4, 4))]);
    }

    /// Every tap window must be centred on the target's full-grid position:
    /// the mean full-grid row/col of the taps equals the target's.
    #[test]
    fn tap_windows_are_centred() {
        let parity = |b: ContextBand| match b {
            ContextBand::X00 => (0.0, 0.0),
            ContextBand::X11 => (1.0, 1.0),
            ContextBand::X01 => (0.0, 1.0),
        };
        for (target, tp) in [(Subband::X11, (1.0, 1.0)), (Subband::X01, (0.0, 1.0)), (Subband::X10, (1.0, 0.0))] {
            for g in geometry(target) {
                let (pr, pc) = parity(g.context);
                let mean_r = g.origin.0 as f64 + (g.kernel.0 as f64 - 1.0) / 2.0;
                let mean_c = g.origin.1 as f64 + (g.kernel.1 as f64 - 1.0) / 2.0;
                assert_eq!(2.0 * mean_r + pr, tp.0, "{target:?} {g:?}");
                assert_eq!(2.0 * mean_c + pc, tp.1, "{target:?} {g:?}");
            }
        }
    }

    #[test]
    fn tiny_parameter_count_by_hand() {
        // Branch tensors (3 inputs x taps x 1 out, + 1 bias) per head:
        //   x11: 48+1 = 49; x01: 36+1 + 36+1 = 74; x10: 36+1 + 36+1 + 48+1 = 123
        // Final 1x1 per head: 1*3 + 3 = 6 for each of the 4 heads.
        // Total: 4 * (49 + 74 + 123) + 3 * 4 * 6 = 984 + 72 = 1056.
        assert_eq!(count_params(&tiny()), 1056);
        let w = IcnnWeights::<f32>::build(&tiny(), 1).unwrap();
        assert_eq!(w.num_scalars(), 1056);
    }

    #[test]
    fn default_and_experiment_12_counts() {
        let d = count_params(&IcnnConfig::default());
        assert!((186_000..=190_000).contains(&d), "{d}");
        assert_eq!(IcnnWeights::<f32>::build(&IcnnConfig::default(), 0).unwrap().num_scalars(), d);
        let e12 = count_params(&IcnnConfig {
            channels: 24,
            ..IcnnConfig::default()
        });
        assert!((e12 as f64 - 34_000.0).abs() <= 3_400.0, "{e12}");
    }

    #[test]
    fn mac_counts() {
        let m = count_macs(&IcnnConfig::default(), 576, 768);
        assert!((60.0..=70.0).contains(&m), "{m}");

        // C=1, L=2, K=1 on 32x32. Per target pixel (4 heads, 3 outputs each):
        //   x11: 4*(48 + 3) = 204; x01: 4*(72 + 3) = 300; x10: 4*(120 + 3) = 492.
        // Each subband at scale i has (32/2^i)^2 pixels: 256+64+16+4+1 = 341.
        // Total 341 * 996 = 339_636 MACs over 1024 pixels.
        let tiny_macs = count_macs(&tiny(), 32, 32);
        assert!((tiny_macs - 339_636.0 / 1024.0 / 1000.0).abs() < 1e-12);

        let base = IcnnConfig { layers: 4, ..IcnnConfig::default() };
        let wide = IcnnConfig { channels: 176, ..base.clone() };
        let hidden_share = |c: &IcnnConfig| {
            let with = count_macs(c, 64, 64);
            let without = count_macs(&IcnnConfig { layers: 3, ..c.clone() }, 64, 64);
            with - without
        };
        let ratio = hidden_share(&wide) / hidden_share(&base);
        assert!((ratio - 4.0).abs() < 1e-9);
    }

    #[test]
    fn build_is_deterministic() {
        let a = IcnnWeights::<f32>::build(&tiny(), 42).unwrap();
        let b = IcnnWeights::<f32>::build(&tiny(), 42).unwrap();
        let c = IcnnWeights::<f32>::build(&tiny(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(IcnnWeights::<f64>::build(&tiny(), 42).unwrap().cast::<f32>(), a);
        assert!(IcnnWeights::<f32>::build(&IcnnConfig { layers: 1, ..tiny() }, 0).is_err());
    }

    fn zero_weights(config: &IcnnConfig) -> IcnnWeights<f32> {
        let mut w = IcnnWeights::<f32>::build(config, 0).unwrap();
        for (i, t) in w.tensors_mut().into_iter().enumerate() {
            let v = if t.shape().len() == 1 { 0.01 * (i % 7) as f32 } else { 0.0 };
            t.data_mut().iter_mut().for_each(|x| *x = v);
        }
        w
    }

    #[test]
    fn zero_weights_output_biases() {
        let cfg = IcnnConfig { channels: 4, mixtures: 2, ..IcnnConfig::default() };
        let w = zero_weights(&cfg);
        let ctx = Tensor::<f32>::full(&[3, 3, 3], 0.7);
        let out = w.forward_network(1, Subband::X10, &[&ctx, &ctx, &ctx], (2, 3)).unwrap();
        for (head, t) in w.interpolator(1, Subband::X10).unwrap().heads.iter().zip(&out) {
            let bias = head.layers.last().unwrap().bias.data();
            for px in t.data().chunks(bias.len()) {
                assert_eq!(px, bias);
            }
        }
    }

    #[test]
    fn single_pixel_affine_chain() {
        // C=1, L=2, K=1: out = b2 + w2 * relu(b1 + k * sum(w1)) for constant
        // context value k on every channel.
        let w = IcnnWeights::<f64>::build(&tiny(), 5).unwrap();
        let k = 0.3;
        let ctx = Tensor::<f64>::full(&[2, 2, 3], k);
        let out = w.forward_network(2, Subband::X11, &[&ctx], (1, 1)).unwrap();
        for (head, t) in w.interpolator(2, Subband::X11).unwrap().heads.iter().zip(&out) {
            let b1 = &head.branches[0];
            let hidden = (b1.bias.data()[0] + k * b1.weight.data().iter().sum::<f64>()).max(0.0);
            let l = &head.layers[0];
            for o in 0..t.len() {
                let expect = l.bias.data()[o] + l.weight.data()[o] * hidden;
                assert!((t.data()[o] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn context_count_is_checked() {
        let w = IcnnWeights::<f32>::build(&tiny(), 0).unwrap();
        let ctx = Tensor::<f32>::zeros(&[2, 2, 3]);
        assert!(matches!(
            w.forward(1, Subband::X10, &[&ctx, &ctx], (2, 2)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn shared_weights_ignore_scale() {
        let w = IcnnWeights::<f32>::build(&IcnnConfig { channels: 6, ..IcnnConfig::default() }, 3).unwrap();
        let mut p = Plane::zeros(5, 4, ColorSpace::YCoCgR);
        for (i, v) in p.channel_mut(0).iter_mut().enumerate() {
            *v = (i * 13 % 256) as i32;
        }
        let ctx = context_tensor::<f32>(&p);
        let a = w.forward(1, Subband::X11, &[&ctx], (4, 3)).unwrap();
        let b = w.forward(5, Subband::X11, &[&ctx], (4, 3)).unwrap();
        assert_eq!(a, b);

        let per_scale = IcnnWeights::<f32>::build(
            &IcnnConfig { channels: 6, share_across_scales: false, ..IcnnConfig::default() },
            3,
        )
        .unwrap();
        assert!(per_scale.forward(6, Subband::X11, &[&ctx], (4, 3)).is_err());
        assert_ne!(
            per_scale.forward(1, Subband::X11, &[&ctx], (4, 3)).unwrap(),
            per_scale.forward(2, Subband::X11, &[&ctx], (4, 3)).unwrap()
        );
    }

    #[test]
    fn tape_forward_matches_direct() {
        let cfg = IcnnConfig { channels: 5, mixtures: 2, ..IcnnConfig::default() };
        let w = IcnnWeights::<f64>::build(&cfg, 8).unwrap();
        let mut p = Plane::zeros(4, 5, ColorSpace::YCoCgR);
        for c in 0..3 {
            for (i, v) in p.channel_mut(c).iter_mut().enumerate() {
                *v = ((i * 31 + c * 7) % 200) as i32 - if c > 0 { 100 } else { 0 };
            }
        }
        let x = context_tensor::<f64>(&p);
        let direct = w.forward_network(3, Subband::X01, &[&x, &x], (4, 2)).unwrap();
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let (params, outs) = w.forward_tape(&mut tape, 3, Subband::X01, &[xv, xv], (4, 2)).unwrap();
        for (d, o) in direct.iter().zip(outs) {
            assert_eq!(d, tape.value(o));
        }
        // Parameter indices line up with the canonical order.
        let convs: Vec<_> = w.convs().collect();
        for (idx, wv, _) in params {
            assert_eq!(&convs[idx].weight, tape.value(wv));
        }
    }

    #[test]
    fn weight_file_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let cfg = IcnnConfig { channels: 3, mixtures: 2, ..IcnnConfig::default() };
        let w = IcnnWeights::<f32>::build(&cfg, 9).unwrap();
        save_weights(&w, &path).unwrap();
        let back = load_weights(&path).unwrap();
        assert_eq!(back, w);
        assert_eq!(back.checksum(), w.checksum());

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(load_weights(&path), Err(Error::Format(_))));

        let mut bumped = bytes.clone();
        bumped[4] = 9;
        assert!(matches!(IcnnWeights::from_bytes(&bumped), Err(Error::Format(_))));

        std::fs::write(&path, &bytes).unwrap();
        let other = IcnnConfig { channels: 4, ..cfg.clone() };
        match load_weights_for(&path, &other) {
            Err(Error::Format(msg)) => {
                assert!(msg.contains("C=3") && msg.contains("C=4"), "{msg}");
            }
            r => panic!("expected format error, got {r:?}"),
        }
        assert!(matches!(load_weights("/nonexistent/w.bin"), Err(Error::Io { .. })));
    }
}
