//! Reversible integer RGB <-> YCoCg-R transform.
//!
//! The forward transform is the usual lifting sequence
//!
//! ```text
//! co = r - b
//! t  = b + (co >> 1)
//! cg = g - t
//! y  = t + (cg >> 1)
//! ```
//!
//! where `>> 1` is an arithmetic shift, i.e. floor division by two. Because
//! each lifting step only adds a function of the other value, running the
//! steps backwards recovers the input exactly.

use crate::error::{Error, Result};

/// Discrete support of one channel's symbols, inclusive on both ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SymbolSupport {
    pub lo: i32,
    pub hi: i32,
}

impl SymbolSupport {
    pub const fn new(lo: i32, hi: i32) -> Self {
        Self { lo, hi }
    }

    /// Number of symbols in the alphabet.
    pub const fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub const fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub const fn contains(&self, x: i32) -> bool {
        x >= self.lo && x <= self.hi
    }
}

pub const RGB_SUPPORT: SymbolSupport = SymbolSupport::new(0, 255);
pub const LUMA_SUPPORT: SymbolSupport = SymbolSupport::new(0, 255);
pub const CHROMA_SUPPORT: SymbolSupport = SymbolSupport::new(-255, 255);

/// Colour space of a three-channel [`Plane`](crate::plane::Plane).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Rgb,
    YCoCgR,
}

impl ColorSpace {
    /// Per-channel value ranges, in channel order.
    pub const fn supports(self) -> [SymbolSupport; 3] {
        match self {
            ColorSpace::Rgb => [RGB_SUPPORT; 3],
            ColorSpace::YCoCgR => [LUMA_SUPPORT, CHROMA_SUPPORT, CHROMA_SUPPORT],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RgbPixel {
    pub r: i32,
    pub g: i32,
    pub b: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct YccPixel {
    pub y: i32,
    pub co: i32,
    pub cg: i32,
}

impl RgbPixel {
    pub const fn new(r: i32, g: i32, b: i32) -> Self {
        Self { r, g, b }
    }
}

impl YccPixel {
    pub const fn new(y: i32, co: i32, cg: i32) -> Self {
        Self { y, co, cg }
    }
}

fn check(name: &str, value: i32, support: SymbolSupport) -> Result<()> {
    if support.contains(value) {
        Ok(())
    } else {
        Err(Error::Range(format!(
            "{name}={value} outside [{}, {}]",
            support.lo, support.hi
        )))
    }
}

/// Forward lifting; assumes in-range input.
#[inline]
pub(crate) fn forward_unchecked(r: i32, g: i32, b: i32) -> (i32, i32, i32) {
    let co = r - b;
    let t = b + (co >> 1);
    let cg = g - t;
    let y = t + (cg >> 1);
    (y, co, cg)
}

/// Inverse lifting; assumes in-range input.
#[inline]
pub(crate) fn inverse_unchecked(y: i32, co: i32, cg: i32) -> (i32, i32, i32) {
    let t = y - (cg >> 1);
    let g = cg + t;
    let b = t - (co >> 1);
    let r = b + co;
    (r, g, b)
}

pub fn rgb_to_ycocgr(p: RgbPixel) -> Result<YccPixel> {
    check("r", p.r, RGB_SUPPORT)?;
    check("g", p.g, RGB_SUPPORT)?;
    check("b", p.b, RGB_SUPPORT)?;
    let (y, co, cg) = forward_unchecked(p.r, p.g, p.b);
    Ok(YccPixel { y, co, cg })
}

/// Inverse transform. Values inside the declared YCoCg-R ranges that are not
/// the image of any RGB triple are rejected with a range error, since the
/// lifting inverse would produce components outside `[0, 255]`.
pub fn ycocgr_to_rgb(p: YccPixel) -> Result<RgbPixel> {
    check("y", p.y, LUMA_SUPPORT)?;
    check("co", p.co, CHROMA_SUPPORT)?;
    check("cg", p.cg, CHROMA_SUPPORT)?;
    let (r, g, b) = inverse_unchecked(p.y, p.co, p.cg);
    let out = RgbPixel { r, g, b };
    check("r", r, RGB_SUPPORT)?;
    check("g", g, RGB_SUPPORT)?;
    check("b", b, RGB_SUPPORT)?;
    Ok(out)
}
