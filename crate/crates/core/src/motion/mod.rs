//! Receptive-field block motion estimation.
//!
//! The current frame is cut into `s×s` tiles, `s` being the receptive-field
//! stride of the target layer. [`produce_tile_diffs`] runs a subsampled
//! exhaustive search for every tile, and [`consume_tile_diffs`] slides a
//! receptive-field-sized window over the tile grid, summing tile SADs with
//! rolling column updates to pick the best offset per field.
//!
//! An offset `(dy, dx)` displaces the *key-frame* block: the SAD of a tile at
//! `(y, x)` is `Σ |current[y + i, x + j] − key[y + i + dy, x + j + dx]|`.
//! The winning offset therefore points from a current-frame position to where
//! its content sits in the key frame, which is exactly the gather vector the
//! warp needs.

mod consumer;
mod exhaustive;
mod producer;

pub use consumer::consume_tile_diffs;
pub use exhaustive::{exhaustive_bme, exhaustive_bme_on_grid};
pub use producer::produce_tile_diffs;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ReceptiveFieldGeometry;

/// Sentinel `min_sad` for a field that had no valid offset.
pub const NO_MATCH: u64 = u64::MAX;

/// An 8-bit luma plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    height: usize,
    width: usize,
    luma: Vec<u8>,
}

impl Frame {
    pub fn new(height: usize, width: usize, luma: Vec<u8>) -> Result<Self> {
        if luma.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: format!("{} luma samples for {height}x{width}", height * width),
                actual: format!("{}", luma.len()),
            });
        }
        Ok(Self {
            height,
            width,
            luma,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut luma = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                luma.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            luma,
        }
    }

    /// BT.601 luma from interleaved RGB: `(77·R + 150·G + 29·B) >> 8`.
    pub fn from_rgb(height: usize, width: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != height * width * 3 {
            return Err(Error::ShapeMismatch {
                expected: format!("{} RGB bytes", height * width * 3),
                actual: format!("{}", rgb.len()),
            });
        }
        let luma = rgb
            .chunks_exact(3)
            .map(|p| ((77 * p[0] as u32 + 150 * p[1] as u32 + 29 * p[2] as u32) >> 8) as u8)
            .collect();
        Ok(Self {
            height,
            width,
            luma,
        })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn luma(&self) -> &[u8] {
        &self.luma
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> u8 {
        self.luma[y * self.width + x]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// Search window: offsets `−radius, −radius + stride, …, +radius` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchParams {
    pub radius: usize,
    pub stride: usize,
}

impl SearchParams {
    pub fn new(radius: usize, stride: usize) -> Result<Self> {
        let p = Self { radius, stride };
        p.validate()?;
        Ok(p)
    }

    /// Radius three search steps wide with the step equal to the tile side.
    pub fn default_for_tile(tile: usize) -> Self {
        Self {
            radius: 3 * tile,
            stride: tile,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::InvalidSearch("search stride must be >= 1".into()));
        }
        if !self.radius.is_multiple_of(self.stride) {
            return Err(Error::InvalidSearch(format!(
                "radius {} is not a multiple of search stride {}",
                self.radius, self.stride
            )));
        }
        Ok(())
    }

    /// Grid steps per axis, `2·radius / stride`.
    pub fn steps(&self) -> usize {
        2 * self.radius / self.stride
    }

    /// Every searched offset, ordered by the tie-break rule: smallest
    /// Euclidean magnitude first, then `dy`, then `dx`.
    pub fn offsets(&self) -> Vec<(i32, i32)> {
        let r = self.radius as i32;
        let s = self.stride as i32;
        let mut out: Vec<(i32, i32)> = (-r..=r)
            .step_by(s as usize)
            .flat_map(|dy| (-r..=r).step_by(s as usize).map(move |dx| (dy, dx)))
            .collect();
        out.sort_by_key(|&(dy, dx)| (dy * dy + dx * dx, dy, dx));
        out
    }
}

/// Output grid of target-layer coordinates, one receptive field each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub fields_y: usize,
    pub fields_x: usize,
}

impl FieldGrid {
    pub fn from_geometry(geometry: &ReceptiveFieldGeometry, frame_dims: (usize, usize)) -> Self {
        Self {
            fields_y: geometry.field_count(frame_dims.0),
            fields_x: geometry.field_count(frame_dims.1),
        }
    }

    pub fn len(&self) -> usize {
        self.fields_y * self.fields_x
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tile-level SADs for every (tile, offset) pair, offset-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TileDiffTable {
    pub tile: usize,
    pub tiles_y: usize,
    pub tiles_x: usize,
    pub offsets: Vec<(i32, i32)>,
    /// `sad[k * tiles + t]`; zero where `valid` is false.
    pub sad: Vec<u64>,
    pub valid: Vec<bool>,
    /// Absolute-difference additions performed.
    pub ops: u64,
}

impl TileDiffTable {
    pub fn tile_count(&self) -> usize {
        self.tiles_y * self.tiles_x
    }

    #[inline]
    pub fn entry(&self, offset_index: usize, ty: usize, tx: usize) -> (u64, bool) {
        let i = offset_index * self.tile_count() + ty * self.tiles_x + tx;
        (self.sad[i], self.valid[i])
    }
}

/// Per-field motion vectors and block-matching quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionVectorField {
    pub fields_y: usize,
    pub fields_x: usize,
    /// `(dy, dx)` in pixels, row-major over the field grid.
    pub vectors: Vec<(i32, i32)>,
    /// SAD at the chosen vector, or [`NO_MATCH`].
    pub min_sad: Vec<u64>,
    /// `raw_error` divided by `contributing_pixels`.
    pub aggregate_error: f64,
    /// Σ `min_sad` over fields that had at least one valid offset.
    pub raw_error: u64,
    pub contributing_pixels: u64,
    /// Σ √(dy² + dx²).
    pub total_magnitude: f64,
    /// Additions and subtractions performed to build this field.
    pub ops: u64,
}

impl MotionVectorField {
    pub fn zero(grid: FieldGrid) -> Self {
        Self {
            fields_y: grid.fields_y,
            fields_x: grid.fields_x,
            vectors: vec![(0, 0); grid.len()],
            min_sad: vec![0; grid.len()],
            aggregate_error: 0.0,
            raw_error: 0,
            contributing_pixels: 0,
            total_magnitude: 0.0,
            ops: 0,
        }
    }

    pub fn vector(&self, fy: usize, fx: usize) -> (i32, i32) {
        self.vectors[fy * self.fields_x + fx]
    }

    pub fn sad(&self, fy: usize, fx: usize) -> u64 {
        self.min_sad[fy * self.fields_x + fx]
    }

    /// Fills in the aggregate statistics from `vectors`, `min_sad` and the
    /// per-field covered pixel counts.
    pub(crate) fn finish(&mut self, covered_pixels: impl Fn(usize, usize) -> u64) {
        self.raw_error = 0;
        self.contributing_pixels = 0;
        for fy in 0..self.fields_y {
            for fx in 0..self.fields_x {
                let sad = self.sad(fy, fx);
                if sad != NO_MATCH {
                    self.raw_error += sad;
                    self.contributing_pixels += covered_pixels(fy, fx);
                }
            }
        }
        self.aggregate_error = if self.contributing_pixels == 0 {
            0.0
        } else {
            self.raw_error as f64 / self.contributing_pixels as f64
        };
        self.total_magnitude = self
            .vectors
            .iter()
            .map(|&(dy, dx)| ((dy * dy + dx * dx) as f64).sqrt())
            .sum();
    }
}

/// Half-open range of tiles along one axis that field `index` covers.
///
/// A tile belongs to a field when its center lies inside the field's pixel
/// span. Consecutive fields therefore cover tile windows that advance by
/// exactly one tile. The range is clamped to the full tiles of the frame.
pub fn covered_tiles(
    geometry: &ReceptiveFieldGeometry,
    index: usize,
    tiles: usize,
) -> std::ops::Range<usize> {
    let s = geometry.stride as i64;
    let origin = geometry.origin(index) as i64;
    let end = origin + geometry.size as i64;
    // tile t has center t·s + s/2; want origin ≤ center < end
    let first = div_ceil(2 * origin - s, 2 * s);
    let last = div_ceil(2 * end - s, 2 * s);
    let lo = first.clamp(0, tiles as i64) as usize;
    let hi = last.clamp(0, tiles as i64) as usize;
    lo..hi.max(lo)
}

fn div_ceil(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    -((-a).div_euclid(b))
}

/// Full-pipeline motion estimation on the field grid implied by `geometry`.
pub fn rfbme(
    current: &Frame,
    key: &Frame,
    geometry: &ReceptiveFieldGeometry,
    search: &SearchParams,
) -> Result<MotionVectorField> {
    let grid = FieldGrid::from_geometry(geometry, current.dims());
    rfbme_on_grid(current, key, geometry, search, grid)
}

/// [`rfbme`] with an explicit field grid, e.g. the propagated target-layer
/// dims of a network.
pub fn rfbme_on_grid(
    current: &Frame,
    key: &Frame,
    geometry: &ReceptiveFieldGeometry,
    search: &SearchParams,
    grid: FieldGrid,
) -> Result<MotionVectorField> {
    let table = produce_tile_diffs(current, key, geometry.stride, search)?;
    let mut field = consumer::consume_on_grid(&table, geometry, grid)?;
    field.ops += table.ops;
    Ok(field)
}

pub(crate) fn check_frames(current: &Frame, key: &Frame, tile: usize) -> Result<()> {
    if current.dims() != key.dims() {
        return Err(Error::ShapeMismatch {
            expected: format!("key frame {}x{}", key.height, key.width),
            actual: format!("current frame {}x{}", current.height, current.width),
        });
    }
    if tile == 0 {
        return Err(Error::InvalidSearch("tile side must be >= 1".into()));
    }
    if tile > current.height || tile > current.width {
        return Err(Error::FrameTooSmall(format!(
            "tile {tile} larger than frame {}x{}",
            current.height, current.width
        )));
    }
    Ok(())
}
