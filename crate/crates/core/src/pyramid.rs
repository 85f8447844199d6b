//! Multi-scale even/odd subband pyramid.
//!
//! A plane is split into four subbands by row and column parity:
//! `x00[u,v] = p[2u,2v]`, `x01[u,v] = p[2u,2v+1]`, `x10[u,v] = p[2u+1,2v]` and
//! `x11[u,v] = p[2u+1,2v+1]`. The even subband takes the ceiling share of odd
//! dimensions. Splitting is repeated on `x00` to obtain further scales.

use crate::error::{Error, Result};
use crate::plane::{Plane, CHANNELS};

/// The three subbands that are entropy coded at each scale, in coding order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subband {
    X11,
    X01,
    X10,
}

impl Subband {
    /// Coding order within a scale.
    pub const ORDER: [Subband; 3] = [Subband::X11, Subband::X01, Subband::X10];

    pub const fn index(self) -> usize {
        match self {
            Subband::X11 => 0,
            Subband::X01 => 1,
            Subband::X10 => 2,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Subband::X11 => "x11",
            Subband::X01 => "x01",
            Subband::X10 => "x10",
        }
    }

    /// Shape of this subband for a parent of the given shape.
    pub const fn shape_in(self, parent: (usize, usize)) -> (usize, usize) {
        let (h, w) = parent;
        match self {
            Subband::X11 => (h / 2, w / 2),
            Subband::X01 => (h.div_ceil(2), w / 2),
            Subband::X10 => (h / 2, w.div_ceil(2)),
        }
    }

    /// Parity offsets `(row, col)` of this subband within its parent grid.
    const fn parity(self) -> (usize, usize) {
        match self {
            Subband::X11 => (1, 1),
            Subband::X01 => (0, 1),
            Subband::X10 => (1, 0),
        }
    }
}

/// Shape of the even subband of a parent.
pub const fn even_shape(parent: (usize, usize)) -> (usize, usize) {
    (parent.0.div_ceil(2), parent.1.div_ceil(2))
}

fn decimate(parent: &Plane, row: usize, col: usize, shape: (usize, usize)) -> Plane {
    let (h, w) = shape;
    let mut out = Plane::zeros(h, w, parent.space());
    for c in 0..CHANNELS {
        for u in 0..h {
            for v in 0..w {
                out.set(c, u, v, parent.get(c, 2 * u + row, 2 * v + col));
            }
        }
    }
    out
}

/// The four parity subbands of one plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub x00: Plane,
    pub x01: Plane,
    pub x10: Plane,
    pub x11: Plane,
}

impl Split {
    pub fn get(&self, band: Subband) -> &Plane {
        match band {
            Subband::X11 => &self.x11,
            Subband::X01 => &self.x01,
            Subband::X10 => &self.x10,
        }
    }
}

pub fn split(parent: &Plane) -> Result<Split> {
    if parent.is_empty() {
        return Err(Error::Argument("cannot split an empty plane".into()));
    }
    let shape = parent.shape();
    Ok(Split {
        x00: decimate(parent, 0, 0, even_shape(shape)),
        x01: decimate(parent, 0, 1, Subband::X01.shape_in(shape)),
        x10: decimate(parent, 1, 0, Subband::X10.shape_in(shape)),
        x11: decimate(parent, 1, 1, Subband::X11.shape_in(shape)),
    })
}

/// Infers the parent shape from the even and the diagonal subband and checks
/// that all four shapes agree with it.
pub fn parent_shape(x00: (usize, usize), x01: (usize, usize), x10: (usize, usize), x11: (usize, usize)) -> Result<(usize, usize)> {
    let parent = (x00.0 + x11.0, x00.1 + x11.1);
    let consistent = x00.0 >= x11.0
        && x00.0 - x11.0 <= 1
        && x00.1 >= x11.1
        && x00.1 - x11.1 <= 1
        && x00 == even_shape(parent)
        && x01 == Subband::X01.shape_in(parent)
        && x10 == Subband::X10.shape_in(parent);
    if consistent {
        Ok(parent)
    } else {
        Err(Error::Shape(format!(
            "subband shapes x00={x00:?} x01={x01:?} x10={x10:?} x11={x11:?} do not tile a parent"
        )))
    }
}

pub fn merge(x00: &Plane, x01: &Plane, x10: &Plane, x11: &Plane) -> Result<Plane> {
    let (h, w) = parent_shape(x00.shape(), x01.shape(), x10.shape(), x11.shape())?;
    let space = x00.space();
    if [x01, x10, x11].iter().any(|p| p.space() != space) {
        return Err(Error::Argument("subbands in different colour spaces".into()));
    }
    let mut out = Plane::zeros(h, w, space);
    let mut place = |band: &Plane, row: usize, col: usize| {
        for c in 0..CHANNELS {
            for u in 0..band.height() {
                for v in 0..band.width() {
                    out.set(c, 2 * u + row, 2 * v + col, band.get(c, u, v));
                }
            }
        }
    };
    place(x00, 0, 0);
    for band in Subband::ORDER {
        let (row, col) = band.parity();
        let plane = match band {
            Subband::X11 => x11,
            Subband::X01 => x01,
            Subband::X10 => x10,
        };
        place(plane, row, col);
    }
    Ok(out)
}

/// Subbands of one scale. `x00` is the even subband at this scale, i.e. the
/// context every interpolator of the scale starts from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Level {
    pub x00: Plane,
    pub x11: Plane,
    pub x01: Plane,
    pub x10: Plane,
}

impl Level {
    pub fn band(&self, band: Subband) -> &Plane {
        match band {
            Subband::X11 => &self.x11,
            Subband::X01 => &self.x01,
            Subband::X10 => &self.x10,
        }
    }

    pub fn merge(&self) -> Result<Plane> {
        merge(&self.x00, &self.x01, &self.x10, &self.x11)
    }
}

/// Full pyramid. `levels[0]` is scale 1 (finest), `levels[S-1]` scale S.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pyramid {
    pub levels: Vec<Level>,
}

impl Pyramid {
    pub fn scales(&self) -> usize {
        self.levels.len()
    }

    /// `x00` of the coarsest scale.
    pub fn coarsest(&self) -> &Plane {
        &self.levels[self.levels.len() - 1].x00
    }

    /// Level at scale `i`, 1-based.
    pub fn level(&self, scale: usize) -> &Level {
        &self.levels[scale - 1]
    }

    /// Merges every scale back into the original plane.
    pub fn reconstruct(&self) -> Result<Plane> {
        let mut current = self.coarsest().clone();
        for level in self.levels.iter().rev() {
            current = merge(&current, &level.x01, &level.x10, &level.x11)?;
        }
        Ok(current)
    }
}

pub fn build_pyramid(image: &Plane, scales: usize) -> Result<Pyramid> {
    if scales < 1 {
        return Err(Error::Argument("pyramid needs at least one scale".into()));
    }
    let mut levels = Vec::with_capacity(scales);
    let mut current = image.clone();
    for _ in 0..scales {
        let s = split(&current)?;
        current = s.x00.clone();
        levels.push(Level {
            x00: s.x00,
            x11: s.x11,
            x01: s.x01,
            x10: s.x10,
        });
    }
    Ok(Pyramid { levels })
}

/// Shape of `x00` at every scale, index 0 being the image itself.
pub fn scale_shapes(image: (usize, usize), scales: usize) -> Vec<(usize, usize)> {
    let mut shapes = vec![image];
    for _ in 0..scales {
        let last = *shapes.last().unwrap();
        shapes.push(even_shape(last));
    }
    shapes
}
