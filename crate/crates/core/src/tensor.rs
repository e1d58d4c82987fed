//! Dense channel-major activation volumes.

use std::fmt;

use crate::error::{shape_mismatch, Error, Result};

/// `(channels, height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Shape3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape3 {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.height * self.width
    }
}

impl fmt::Display for Shape3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// A dense `channels × height × width` volume of `f32`, stored channel-major
/// and row-major within each channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    shape: Shape3,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn new(shape: Shape3, data: Vec<f32>) -> Result<Self> {
        if shape.channels == 0 || shape.height == 0 || shape.width == 0 {
            return Err(Error::InvalidLayer(format!(
                "tensor dimensions must be >= 1, got {shape}"
            )));
        }
        if data.len() != shape.len() {
            return Err(shape_mismatch(
                format!("{} values for {shape}", shape.len()),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape3) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape3, value: f32) -> Self {
        assert!(
            shape.channels > 0 && shape.height > 0 && shape.width > 0,
            "tensor dimensions must be >= 1"
        );
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_fn(shape: Shape3, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut t = Self::zeros(shape);
        for c in 0..shape.channels {
            for y in 0..shape.height {
                for x in 0..shape.width {
                    let i = t.index(c, y, x);
                    t.data[i] = f(c, y, x);
                }
            }
        }
        t
    }

    #[inline]
    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.shape.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.shape.width
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        debug_assert!(c < self.shape.channels && y < self.shape.height && x < self.shape.width);
        (c * self.shape.height + y) * self.shape.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f32) {
        let i = self.index(c, y, x);
        self.data[i] = value;
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.shape.plane();
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Translates the spatial content by `(dy, dx)`: `out[c, y, x] = self[c, y - dy, x - dx]`,
    /// zero where the source falls outside.
    pub fn translated(&self, dy: isize, dx: isize) -> Self {
        let (h, w) = (self.height() as isize, self.width() as isize);
        Self::from_fn(self.shape, |c, y, x| {
            let sy = y as isize - dy;
            let sx = x as isize - dx;
            if (0..h).contains(&sy) && (0..w).contains(&sx) {
                self.get(c, sy as usize, sx as usize)
            } else {
                0.0
            }
        })
    }
}
