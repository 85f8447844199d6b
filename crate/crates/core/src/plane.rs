//! Three-channel integer image planes.

use crate::colorspace::{self, ColorSpace};
use crate::error::{Error, Result};

/// Three-channel integer image stored channel-planar: all of channel 0, then
/// channel 1, then channel 2, each row-major. Zero-sized planes are legal;
/// they occur as subbands of images with a dimension of one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plane {
    height: usize,
    width: usize,
    space: ColorSpace,
    data: Vec<i32>,
}

pub const CHANNELS: usize = 3;

impl Plane {
    pub fn zeros(height: usize, width: usize, space: ColorSpace) -> Self {
        Self {
            height,
            width,
            space,
            data: vec![0; height * width * CHANNELS],
        }
    }

    /// Builds a plane from channel-planar data, validating length and ranges.
    pub fn from_planar(
        height: usize,
        width: usize,
        space: ColorSpace,
        data: Vec<i32>,
    ) -> Result<Self> {
        if data.len() != height * width * CHANNELS {
            return Err(Error::Shape(format!(
                "{} values for a {height}x{width}x3 plane",
                data.len()
            )));
        }
        let plane = Self {
            height,
            width,
            space,
            data,
        };
        plane.validate()?;
        Ok(plane)
    }

    /// Builds an RGB plane from interleaved 8-bit samples (`RGBRGB...`).
    pub fn from_rgb8(height: usize, width: usize, rgb: &[u8]) -> Result<Self> {
        let n = height * width;
        if rgb.len() != n * CHANNELS {
            return Err(Error::Shape(format!(
                "{} bytes for a {height}x{width} RGB image",
                rgb.len()
            )));
        }
        let mut data = vec![0; n * CHANNELS];
        for (i, px) in rgb.chunks_exact(3).enumerate() {
            data[i] = px[0] as i32;
            data[n + i] = px[1] as i32;
            data[2 * n + i] = px[2] as i32;
        }
        Ok(Self {
            height,
            width,
            space: ColorSpace::Rgb,
            data,
        })
    }

    /// Interleaved 8-bit samples of an RGB plane.
    pub fn to_rgb8(&self) -> Result<Vec<u8>> {
        if self.space != ColorSpace::Rgb {
            return Err(Error::Argument("to_rgb8 on a non-RGB plane".into()));
        }
        let n = self.pixels();
        let mut out = Vec::with_capacity(n * CHANNELS);
        for i in 0..n {
            for c in 0..CHANNELS {
                out.push(self.data[c * n + i] as u8);
            }
        }
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        let n = self.pixels();
        for (c, support) in self.space.supports().iter().enumerate() {
            if let Some(v) = self.data[c * n..(c + 1) * n]
                .iter()
                .find(|v| !support.contains(**v))
            {
                return Err(Error::Range(format!(
                    "channel {c} value {v} outside [{}, {}]",
                    support.lo, support.hi
                )));
            }
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.pixels() == 0
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[i32] {
        let n = self.pixels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [i32] {
        let n = self.pixels();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, u: usize, v: usize) -> i32 {
        self.data[(c * self.height + u) * self.width + v]
    }

    #[inline]
    pub fn set(&mut self, c: usize, u: usize, v: usize, value: i32) {
        self.data[(c * self.height + u) * self.width + v] = value;
    }

    /// Converts an RGB plane to YCoCg-R.
    pub fn to_ycocgr(&self) -> Result<Plane> {
        if self.space != ColorSpace::Rgb {
            return Err(Error::Argument("to_ycocgr expects an RGB plane".into()));
        }
        let n = self.pixels();
        let mut out = Plane::zeros(self.height, self.width, ColorSpace::YCoCgR);
        for i in 0..n {
            let (y, co, cg) = colorspace::forward_unchecked(
                self.data[i],
                self.data[n + i],
                self.data[2 * n + i],
            );
            out.data[i] = y;
            out.data[n + i] = co;
            out.data[2 * n + i] = cg;
        }
        Ok(out)
    }

    /// Converts a YCoCg-R plane back to RGB. Fails if any pixel is not the
    /// image of an RGB triple.
    pub fn to_rgb(&self) -> Result<Plane> {
        if self.space != ColorSpace::YCoCgR {
            return Err(Error::Argument("to_rgb expects a YCoCg-R plane".into()));
        }
        let n = self.pixels();
        let mut out = Plane::zeros(self.height, self.width, ColorSpace::Rgb);
        for i in 0..n {
            let (r, g, b) =
                colorspace::inverse_unchecked(self.data[i], self.data[n + i], self.data[2 * n + i]);
            out.data[i] = r;
            out.data[n + i] = g;
            out.data[2 * n + i] = b;
        }
        out.validate()?;
        Ok(out)
    }
}
