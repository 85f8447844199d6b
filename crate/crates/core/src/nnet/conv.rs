use rayon::prelude::*;

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Convolution geometry: one `(row, col)` offset per kernel tap, expressed in
/// the input plane's index space relative to the output position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub taps: Vec<(isize, isize)>,
}

impl ConvSpec {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        taps: Vec<(isize, isize)>,
    ) -> Result<Self> {
        if taps.len() != kernel.0 * kernel.1 {
            return Err(Error::Argument(format!(
                "{} tap offsets for a {}x{} kernel",
                taps.len(),
                kernel.0,
                kernel.1
            )));
        }
        if taps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument(
                "tap offsets must be strictly increasing in row-major order".into(),
            ));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::Argument("convolution with zero channels".into()));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            taps,
        })
    }

    /// Dense `kh x kw` window whose top-left tap sits at `origin`.
    pub fn window(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        origin: (isize, isize),
    ) -> Result<Self> {
        let mut taps = Vec::with_capacity(kernel.0 * kernel.1);
        for i in 0..kernel.0 as isize {
            for j in 0..kernel.1 as isize {
                taps.push((origin.0 + i, origin.1 + j));
            }
        }
        Self::new(in_channels, out_channels, kernel, taps)
    }

    /// 1x1 convolution.
    pub fn pointwise(in_channels: usize, out_channels: usize) -> Result<Self> {
        Self::new(in_channels, out_channels, (1, 1), vec![(0, 0)])
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [
            self.kernel.0,
            self.kernel.1,
            self.in_channels,
            self.out_channels,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.taps.len() * self.in_channels * self.out_channels + self.out_channels
    }

    /// Multiply-accumulates per output position.
    pub fn macs_per_position(&self) -> usize {
        self.taps.len() * self.in_channels * self.out_channels
    }

    fn check(&self, input: &[usize], weights: &[usize], bias: &[usize]) -> Result<()> {
        if input.len() != 3 || input[2] != self.in_channels {
            return Err(Error::Shape(format!(
                "input {input:?}, expected [h, w, {}]",
                self.in_channels
            )));
        }
        if weights != self.weight_shape() {
            return Err(Error::Shape(format!(
                "weights {weights:?}, expected {:?}",
                self.weight_shape()
            )));
        }
        if bias != [self.out_channels] {
            return Err(Error::Shape(format!(
                "bias {bias:?}, expected [{}]",
                self.out_channels
            )));
        }
        Ok(())
    }
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Rows above this many multiply-accumulates are worth spreading across
/// threads.
const PARALLEL_MACS: usize = 1 << 16;

/// `out[u,v,o] = bias[o] + sum_taps sum_in w * input[clamp(u+dr), clamp(v+dc), in]`.
///
/// The sum for each output element starts at the bias and runs over taps in
/// row-major order, then input channels, so results are bit-identical
/// regardless of thread count. An input with no pixels contributes nothing.
pub fn conv2d<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    spec: &ConvSpec,
    out_shape: (usize, usize),
) -> Result<Tensor<T>> {
    spec.check(input.shape(), weights.shape(), bias.shape())?;
    let (hin, win, cin) = (input.shape()[0], input.shape()[1], spec.in_channels);
    let (oh, ow) = out_shape;
    let cout = spec.out_channels;
    let mut out = Tensor::zeros(&[oh, ow, cout]);
    if oh == 0 || ow == 0 {
        return Ok(out);
    }
    let x = input.data();
    let w = weights.data();
    let b = bias.data();
    let empty_input = hin == 0 || win == 0;

    let row_fn = |(u, row): (usize, &mut [T])| {
        for v in 0..ow {
            let acc = &mut row[v * cout..(v + 1) * cout];
            acc.copy_from_slice(b);
            if empty_input {
                continue;
            }
            for (t, &(dr, dc)) in spec.taps.iter().enumerate() {
                let r = clamp_index(u as isize + dr, hin);
                let c = clamp_index(v as isize + dc, win);
                let px = &x[(r * win + c) * cin..(r * win + c + 1) * cin];
                for (i, &xi) in px.iter().enumerate() {
                    let wrow = &w[(t * cin + i) * cout..(t * cin + i + 1) * cout];
                    for (a, &wo) in acc.iter_mut().zip(wrow) {
                        *a = *a + wo * xi;
                    }
                }
            }
        }
    };

    let row_len = ow * cout;
    if ow * spec.macs_per_position() >= PARALLEL_MACS && oh > 1 {
        out.data_mut()
            .par_chunks_mut(row_len)
            .enumerate()
            .for_each(row_fn);
    } else {
        out.data_mut().chunks_mut(row_len).enumerate().for_each(row_fn);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients of [`conv2d`] with respect to its input, weights and bias.
/// Gradient flowing through a clamped tap lands on the edge pixel it read.
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    spec: &ConvSpec,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (hin, win, cin) = (input.shape()[0], input.shape()[1], spec.in_channels);
    let cout = spec.out_channels;
    if grad_out.shape().len() != 3 || grad_out.shape()[2] != cout {
        return Err(Error::Shape(format!(
            "output gradient {:?} for {cout} channels",
            grad_out.shape()
        )));
    }
    let (oh, ow) = (grad_out.shape()[0], grad_out.shape()[1]);
    let mut gx = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(weights.shape());
    let mut gb = Tensor::zeros(&[cout]);
    let x = input.data();
    let w = weights.data();
    let g = grad_out.data();
    for u in 0..oh {
        for v in 0..ow {
            let go = &g[(u * ow + v) * cout..(u * ow + v + 1) * cout];
            for (b, &d) in gb.data_mut().iter_mut().zip(go) {
                *b = *b + d;
            }
            if hin == 0 || win == 0 {
                continue;
            }
            for (t, &(dr, dc)) in spec.taps.iter().enumerate() {
                let r = clamp_index(u as isize + dr, hin);
                let c = clamp_index(v as isize + dc, win);
                let base = (r * win + c) * cin;
                for i in 0..cin {
                    let xi = x[base + i];
                    let off = (t * cin + i) * cout;
                    let wrow = &w[off..off + cout];
                    let gwrow = &mut gw.data_mut()[off..off + cout];
                    let mut s = T::zero();
                    for o in 0..cout {
                        gwrow[o] = gwrow[o] + go[o] * xi;
                        s = s + wrow[o] * go[o];
                    }
                    let gxi = &mut gx.data_mut()[base + i];
                    *gxi = *gxi + s;
                }
            }
        }
    }
    Ok(ConvGrads {
        input: gx,
        weights: gw,
        bias: gb,
    })
}
