//! Encode/decode pipeline and bitstream container.
//!
//! Layout (all integers little-endian, see FORMAT.md):
//!
//! ```text
//! "LLTI" | version u8 | model u8 | S u8 | reserved u8 | height u32 | width u32
//!        | weights checksum u64 | S x (x11, x01, x10 pixel counts as u32)
//!        | fixed length u32 | coded length u32
//!        | fixed segment: coarsest subband as 8-bit RGB, raster order
//!        | coded segment: one range-coded stream, scales S..1, subbands
//!          x11, x01, x10, and inside a subband all Y, then Co, then Cg
//! ```

use rayon::prelude::*;

use crate::coder::{BitSink, BitSource, RangeDecoder, RangeEncoder};
use crate::colorspace::{ColorSpace, SymbolSupport};
use crate::error::{Error, Result};
use crate::interpolator::{context_tensor, IcnnWeights};
use crate::nnet::Tensor;
use crate::plane::{Plane, CHANNELS};
use crate::probmodel::{self, activate, fill_quantized_cdf, flat_cdf, CdfScratch, DistParams};
use crate::pyramid::{self, build_pyramid, scale_shapes, Subband};

pub const MAGIC: &[u8; 4] = b"LLTI";
pub const VERSION: u8 = 1;
/// Largest supported scale count.
pub const MAX_SCALES: usize = 16;

/// Pixels whose coding tables are built together before being coded.
const TABLE_BATCH: usize = 8192;
const TABLE_CHUNK: usize = 256;

/// Probability model driving the coder.
#[derive(Clone, Copy, Debug)]
pub enum Model<'a> {
    /// Uniform distribution over each channel's support.
    Flat { scales: usize },
    Learned(&'a IcnnWeights<f32>),
}

impl Model<'_> {
    pub fn scales(&self) -> usize {
        match self {
            Model::Flat { scales } => *scales,
            Model::Learned(w) => w.config().scales,
        }
    }

    fn kind(&self) -> u8 {
        match self {
            Model::Flat { .. } => 0,
            Model::Learned(_) => 1,
        }
    }

    fn checksum(&self) -> u64 {
        match self {
            Model::Flat { .. } => 0,
            Model::Learned(w) => w.checksum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitstreamHeader {
    pub version: u8,
    pub model_kind: u8,
    pub scales: usize,
    pub height: usize,
    pub width: usize,
    pub weights_checksum: u64,
    /// Pixel counts of x11, x01, x10, index 0 being scale 1.
    pub counts: Vec<[u32; 3]>,
    pub fixed_len: u32,
    pub coded_len: u32,
}

impl BitstreamHeader {
    pub fn byte_len(scales: usize) -> usize {
        4 + 4 + 4 + 4 + 8 + 12 * scales + 8
    }

    fn for_image(height: usize, width: usize, model: &Model) -> Result<Self> {
        let scales = model.scales();
        if scales == 0 || scales > MAX_SCALES {
            return Err(Error::Argument(format!("scale count {scales} outside 1..={MAX_SCALES}")));
        }
        let (h32, w32) = (u32::try_from(height), u32::try_from(width));
        if h32.is_err() || w32.is_err() || height.saturating_mul(width) > (u32::MAX / 4) as usize {
            return Err(Error::Capacity(format!("{height}x{width} image is too large")));
        }
        Ok(Self {
            version: VERSION,
            model_kind: model.kind(),
            scales,
            height,
            width,
            weights_checksum: model.checksum(),
            counts: expected_counts(height, width, scales),
            fixed_len: fixed_bytes(height, width, scales) as u32,
            coded_len: 0,
        })
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[self.version, self.model_kind, self.scales as u8, 0]);
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&self.weights_checksum.to_le_bytes());
        for c in &self.counts {
            for n in c {
                out.extend_from_slice(&n.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.fixed_len.to_le_bytes());
        out.extend_from_slice(&self.coded_len.to_le_bytes());
    }

    /// Parses and validates a header, returning it with its length in bytes.
    pub fn read(bytes: &[u8]) -> Result<(Self, usize)> {
        let fmt = |m: String| Error::Format(m);
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(fmt("not an LLTI bitstream (bad magic)".into()));
        }
        if bytes[4] != VERSION {
            return Err(fmt(format!("bitstream version {} (this build reads {VERSION})", bytes[4])));
        }
        let model_kind = bytes[5];
        if model_kind > 1 {
            return Err(fmt(format!("unknown model kind {model_kind}")));
        }
        let scales = bytes[6] as usize;
        if scales == 0 || scales > MAX_SCALES {
            return Err(fmt(format!("scale count {scales} outside 1..={MAX_SCALES}")));
        }
        let len = Self::byte_len(scales);
        if bytes.len() < len {
            return Err(Error::Corruption("header truncated".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let height = u32_at(8) as usize;
        let width = u32_at(12) as usize;
        let weights_checksum = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let counts: Vec<[u32; 3]> = (0..scales)
            .map(|s| [0, 1, 2].map(|b| u32_at(24 + 12 * s + 4 * b)))
            .collect();
        let fixed_len = u32_at(24 + 12 * scales);
        let coded_len = u32_at(28 + 12 * scales);
        if height == 0 || width == 0 || height.saturating_mul(width) > (u32::MAX / 4) as usize {
            return Err(fmt(format!("invalid image size {height}x{width}")));
        }
        if counts != expected_counts(height, width, scales)
            || fixed_len as usize != fixed_bytes(height, width, scales)
        {
            return Err(fmt("segment sizes do not match the image size".into()));
        }
        Ok((
            Self {
                version: VERSION,
                model_kind,
                scales,
                height,
                width,
                weights_checksum,
                counts,
                fixed_len,
                coded_len,
            },
            len,
        ))
    }
}

fn expected_counts(height: usize, width: usize, scales: usize) -> Vec<[u32; 3]> {
    scale_shapes((height, width), scales)[..scales]
        .iter()
        .map(|&parent| {
            Subband::ORDER.map(|b| {
                let (h, w) = b.shape_in(parent);
                (h * w) as u32
            })
        })
        .collect()
}

fn fixed_bytes(height: usize, width: usize, scales: usize) -> usize {
    let (h, w) = scale_shapes((height, width), scales)[scales];
    h * w * CHANNELS
}

/// Model cross-entropy of an image, in bits.
#[derive(Clone, Debug, PartialEq)]
pub struct RateEstimate {
    pub height: usize,
    pub width: usize,
    pub header_bits: f64,
    /// Fixed-length bits of the coarsest subband.
    pub fixed_bits: f64,
    /// `bits[i][b][c]`: scale `i + 1`, subband `Subband::ORDER[b]`, channel `c`,
    /// under the distributions the coding tables realize.
    pub bits: Vec<[[f64; 3]; 3]>,
    /// Total coded-subband bits under the raw mixtures with the training
    /// floor [`probmodel::P_MIN`] instead of the table floor `2^-16`.
    pub mixture_bits: f64,
}

impl RateEstimate {
    pub fn scales(&self) -> usize {
        self.bits.len()
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Modelled bits of scale `scale` (1-based).
    pub fn scale_bits(&self, scale: usize) -> f64 {
        self.bits[scale - 1].iter().flatten().sum()
    }

    /// Modelled bits over all scales, excluding header and fixed segment.
    pub fn coded_bits(&self) -> f64 {
        (1..=self.scales()).map(|s| self.scale_bits(s)).sum()
    }

    pub fn total_bits(&self) -> f64 {
        self.header_bits + self.fixed_bits + self.coded_bits()
    }

    pub fn total_bytes(&self) -> f64 {
        self.total_bits() / 8.0
    }

    /// Bits per original pixel for scale `scale`.
    pub fn scale_bpp(&self, scale: usize) -> f64 {
        self.scale_bits(scale) / self.pixels() as f64
    }

    pub fn fixed_bpp(&self) -> f64 {
        self.fixed_bits / self.pixels() as f64
    }

    pub fn bpp(&self) -> f64 {
        self.total_bits() / self.pixels() as f64
    }

    pub fn bpsp(&self) -> f64 {
        self.bpp() / CHANNELS as f64
    }
}

enum Mode<'a, 'b> {
    Encode(&'a mut RangeEncoder),
    Decode(&'a mut RangeDecoder<'b>),
    Estimate(&'a mut [f64; 3], &'a mut f64),
}

fn check_image(image: &Plane) -> Result<()> {
    if image.space() != ColorSpace::Rgb {
        return Err(Error::Argument("codec input must be an RGB plane".into()));
    }
    if image.is_empty() {
        return Err(Error::Argument(format!(
            "empty image {}x{}",
            image.height(),
            image.width()
        )));
    }
    Ok(())
}

/// Context planes the interpolator for `target` reads.
fn contexts<'p>(target: Subband, x00: &'p Plane, x11: &'p Plane, x01: &'p Plane) -> Vec<&'p Plane> {
    match target {
        Subband::X11 => vec![x00],
        Subband::X01 => vec![x00, x11],
        Subband::X10 => vec![x00, x11, x01],
    }
}

fn distribution(
    weights: &IcnnWeights<f32>,
    scale: usize,
    target: Subband,
    context: &[&Plane],
    shape: (usize, usize),
) -> Result<DistParams> {
    let tensors: Vec<Tensor<f32>> = context.iter().map(|p| context_tensor(p)).collect();
    let refs: Vec<&Tensor<f32>> = tensors.iter().collect();
    activate(&weights.forward(scale, target, &refs, shape)?)
}

/// Builds the coding tables for `pixels` of channel `c` in parallel.
fn build_tables(
    dist: &DistParams,
    c: usize,
    support: SymbolSupport,
    pixels: std::ops::Range<usize>,
) -> Result<Vec<u32>> {
    let stride = support.len() + 1;
    let mut tables = vec![0u32; pixels.len() * stride];
    tables
        .par_chunks_mut(TABLE_CHUNK * stride)
        .enumerate()
        .try_for_each(|(chunk, out)| {
            let mut scratch = CdfScratch::default();
            let first = pixels.start + chunk * TABLE_CHUNK;
            for (i, cum) in out.chunks_exact_mut(stride).enumerate() {
                fill_quantized_cdf(&dist.mixture(first + i, c), support, &mut scratch, cum)?;
            }
            Ok::<_, Error>(())
        })?;
    Ok(tables)
}

fn code_symbol(mode: &mut Mode, cum: &[u32], value: &mut i32, support: SymbolSupport) -> Result<()> {
    match mode {
        Mode::Encode(enc) => enc.encode_cum(cum, (*value - support.lo) as usize),
        Mode::Decode(dec) => {
            *value = dec.decode_cum(cum)? as i32 + support.lo;
            Ok(())
        }
        Mode::Estimate(..) => unreachable!("estimation does not use tables"),
    }
}

/// Codes (or decodes, or measures) one subband. `target` holds the true
/// values when encoding or estimating and is overwritten when decoding.
fn code_subband(
    model: &Model,
    scale: usize,
    band: Subband,
    context: &[&Plane],
    target: &mut Plane,
    mode: &mut Mode,
) -> Result<()> {
    let n = target.pixels();
    if n == 0 {
        return Ok(());
    }
    let supports = ColorSpace::YCoCgR.supports();
    match model {
        Model::Flat { .. } => {
            for (c, &support) in supports.iter().enumerate() {
                if let Mode::Estimate(bits, mixture) = mode {
                    let b = n as f64 * (support.len() as f64).log2();
                    bits[c] += b;
                    **mixture += b;
                    continue;
                }
                let table = flat_cdf(support)?;
                for v in target.channel_mut(c) {
                    code_symbol(mode, table.cum(), v, support)?;
                }
            }
        }
        Model::Learned(weights) => {
            let mut dist = distribution(weights, scale, band, context, target.shape())?;
            for (c, &support) in supports.iter().enumerate() {
                if c == 1 {
                    dist.condition_on_first(target.channel(0))?;
                } else if c == 2 {
                    dist.condition_on_second(target.channel(1))?;
                }
                if let Mode::Estimate(bits, mixture) = mode {
                    let values = target.channel(c);
                    let per_pixel: Vec<(f64, f64)> = (0..n)
                        .into_par_iter()
                        .map(|p| {
                            let m = dist.mixture(p, c);
                            Ok((
                                probmodel::table_bits(values[p], &m, support)?,
                                probmodel::bits(values[p], &m, support)?,
                            ))
                        })
                        .collect::<Result<_>>()?;
                    bits[c] += per_pixel.iter().map(|b| b.0).sum::<f64>();
                    **mixture += per_pixel.iter().map(|b| b.1).sum::<f64>();
                    continue;
                }
                let stride = support.len() + 1;
                let mut start = 0;
                while start < n {
                    let end = (start + TABLE_BATCH).min(n);
                    let tables = build_tables(&dist, c, support, start..end)?;
                    let values = &mut target.channel_mut(c)[start..end];
                    for (v, cum) in values.iter_mut().zip(tables.chunks_exact(stride)) {
                        code_symbol(mode, cum, v, support)?;
                    }
                    start = end;
                }
            }
        }
    }
    Ok(())
}

/// Walks the pyramid in coding order for an encoder or estimator.
fn walk_encoder(image: &Plane, model: &Model, mut visit: impl FnMut(usize, Subband, &[&Plane], &mut Plane) -> Result<()>) -> Result<pyramid::Pyramid> {
    let ycc = image.to_ycocgr()?;
    let pyr = build_pyramid(&ycc, model.scales())?;
    for scale in (1..=pyr.scales()).rev() {
        let level = pyr.level(scale);
        for band in Subband::ORDER {
            let ctx = contexts(band, &level.x00, &level.x11, &level.x01);
            let mut target = level.band(band).clone();
            visit(scale, band, &ctx, &mut target)?;
        }
    }
    Ok(pyr)
}

pub fn encode(image: &Plane, model: &Model) -> Result<Vec<u8>> {
    check_image(image)?;
    let mut header = BitstreamHeader::for_image(image.height(), image.width(), model)?;
    let mut enc = RangeEncoder::new();
    let pyr = walk_encoder(image, model, |scale, band, ctx, target| {
        code_subband(model, scale, band, ctx, target, &mut Mode::Encode(&mut enc))
    })?;
    let any_symbols = header.counts.iter().flatten().any(|&n| n > 0);
    let coded = if any_symbols { enc.finish() } else { Vec::new() };

    let coarsest = pyr.coarsest().to_rgb()?;
    let mut fixed = BitSink::new();
    write_raster_rgb(&coarsest, &mut fixed)?;
    let fixed = fixed.finish();
    debug_assert_eq!(fixed.len(), header.fixed_len as usize);

    header.coded_len = u32::try_from(coded.len())
        .map_err(|_| Error::Capacity("coded segment exceeds 4 GiB".into()))?;
    let mut out = Vec::with_capacity(BitstreamHeader::byte_len(header.scales) + fixed.len() + coded.len());
    header.write(&mut out);
    out.extend_from_slice(&fixed);
    out.extend_from_slice(&coded);
    Ok(out)
}

fn write_raster_rgb(plane: &Plane, sink: &mut BitSink) -> Result<()> {
    for u in 0..plane.height() {
        for v in 0..plane.width() {
            for c in 0..CHANNELS {
                sink.write_fixed(plane.get(c, u, v) as u32, 8)?;
            }
        }
    }
    Ok(())
}

fn read_raster_rgb(shape: (usize, usize), source: &mut BitSource) -> Result<Plane> {
    let mut plane = Plane::zeros(shape.0, shape.1, ColorSpace::Rgb);
    for u in 0..shape.0 {
        for v in 0..shape.1 {
            for c in 0..CHANNELS {
                plane.set(c, u, v, source.read_fixed(8)? as i32);
            }
        }
    }
    Ok(plane)
}

/// Reads the header of a bitstream without decoding it.
pub fn read_header(bytes: &[u8]) -> Result<BitstreamHeader> {
    BitstreamHeader::read(bytes).map(|(h, _)| h)
}

pub fn decode(bytes: &[u8], model: &Model) -> Result<Plane> {
    let (header, header_len) = BitstreamHeader::read(bytes)?;
    if header.model_kind != model.kind() {
        let name = |k: u8| if k == 0 { "flat" } else { "learned" };
        return Err(Error::Format(format!(
            "stream was coded with the {} model, decoder has the {} model",
            name(header.model_kind),
            name(model.kind())
        )));
    }
    if let Model::Learned(w) = model {
        if header.scales != w.config().scales || header.weights_checksum != w.checksum() {
            return Err(Error::Format(format!(
                "weights checksum {:016x} does not match the stream's {:016x}",
                w.checksum(),
                header.weights_checksum
            )));
        }
    }
    let model = match model {
        Model::Flat { .. } => Model::Flat { scales: header.scales },
        m => *m,
    };
    let expected = header_len + header.fixed_len as usize + header.coded_len as usize;
    if bytes.len() != expected {
        return Err(Error::Corruption(format!(
            "stream is {} bytes, header declares {expected}",
            bytes.len()
        )));
    }
    let shapes = scale_shapes((header.height, header.width), header.scales);
    let fixed = &bytes[header_len..header_len + header.fixed_len as usize];
    let coded = &bytes[header_len + header.fixed_len as usize..];
    let mut current = read_raster_rgb(shapes[header.scales], &mut BitSource::new(fixed))?.to_ycocgr()?;

    let any_symbols = header.counts.iter().flatten().any(|&n| n > 0);
    let mut dec = if any_symbols {
        Some(RangeDecoder::new(coded)?)
    } else if !coded.is_empty() {
        return Err(Error::Corruption("unexpected coded segment".into()));
    } else {
        None
    };
    for scale in (1..=header.scales).rev() {
        let parent = shapes[scale - 1];
        let mut bands: Vec<Plane> = Subband::ORDER
            .iter()
            .map(|b| {
                let (h, w) = b.shape_in(parent);
                Plane::zeros(h, w, ColorSpace::YCoCgR)
            })
            .collect();
        for band in Subband::ORDER {
            let (done, rest) = bands.split_at_mut(band.index());
            let target = &mut rest[0];
            if target.pixels() == 0 {
                continue;
            }
            let dec = dec.as_mut().expect("symbols present");
            let ctx: Vec<&Plane> = match band {
                Subband::X11 => vec![&current],
                Subband::X01 => vec![&current, &done[0]],
                Subband::X10 => vec![&current, &done[0], &done[1]],
            };
            code_subband(&model, scale, band, &ctx, target, &mut Mode::Decode(dec))?;
        }
        let [x11, x01, x10]: [Plane; 3] = bands.try_into().expect("three bands");
        current = pyramid::merge(&current, &x01, &x10, &x11)?;
    }
    if let Some(dec) = dec {
        dec.finish()?;
    }
    current.to_rgb()
}

/// Model cross-entropy of `image`, with header and fixed-length bits.
///
/// Subband bits are measured under the distributions the coder uses (see
/// [`probmodel::table_bits`]); no tables are built and nothing is coded.
pub fn estimate_bits(image: &Plane, model: &Model) -> Result<RateEstimate> {
    check_image(image)?;
    let header = BitstreamHeader::for_image(image.height(), image.width(), model)?;
    let mut bits = vec![[[0.0; 3]; 3]; header.scales];
    let mut mixture_bits = 0.0;
    walk_encoder(image, model, |scale, band, ctx, target| {
        code_subband(
            model,
            scale,
            band,
            ctx,
            target,
            &mut Mode::Estimate(&mut bits[scale - 1][band.index()], &mut mixture_bits),
        )
    })?;
    Ok(RateEstimate {
        height: image.height(),
        width: image.width(),
        header_bits: 8.0 * BitstreamHeader::byte_len(header.scales) as f64,
        fixed_bits: 8.0 * header.fixed_len as f64,
        bits,
        mixture_bits,
    })
}
