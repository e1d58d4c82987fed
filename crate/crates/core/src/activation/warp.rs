//! Motion-compensated reconstruction of a stored activation.

use serde::{Deserialize, Serialize};

use super::lanes::lane_decode4;
use super::q88::{div_round_half_even, Q88};
use super::rle::SparseActivation;
use crate::error::{Error, Result};
use crate::motion::MotionVectorField;
use crate::tensor::Tensor3;

/// Per-coordinate gather vectors in activation units, Q8.8.
///
/// `vectors[y * width + x] = (dy, dx)` means output `(y, x)` samples the key
/// activation at `(y + dy, x + dx)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationVectorField {
    pub height: usize,
    pub width: usize,
    pub vectors: Vec<(Q88, Q88)>,
}

impl ActivationVectorField {
    pub fn zero(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            vectors: vec![(Q88::ZERO, Q88::ZERO); height * width],
        }
    }

    pub fn uniform(height: usize, width: usize, dy: Q88, dx: Q88) -> Self {
        Self {
            height,
            width,
            vectors: vec![(dy, dx); height * width],
        }
    }

    pub fn get(&self, y: usize, x: usize) -> (Q88, Q88) {
        self.vectors[y * self.width + x]
    }
}

/// Converts pixel motion vectors to activation units by dividing by the
/// receptive-field stride, rounding to the nearest Q8.8 value.
pub fn scale_vector_field(
    mv: &MotionVectorField,
    rf_stride: usize,
    out_dims: (usize, usize),
) -> Result<ActivationVectorField> {
    if (mv.fields_y, mv.fields_x) != out_dims {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} activation grid", out_dims.0, out_dims.1),
            actual: format!("{}x{} motion fields", mv.fields_y, mv.fields_x),
        });
    }
    if rf_stride == 0 {
        return Err(Error::InvalidSearch(
            "receptive-field stride must be >= 1".into(),
        ));
    }
    let scale = |d: i32| {
        let raw = div_round_half_even(d as i64 * 256, rf_stride as i64);
        Q88(raw.clamp(i16::MIN as i64, i16::MAX as i64) as i16)
    };
    Ok(ActivationVectorField {
        height: out_dims.0,
        width: out_dims.1,
        vectors: mv
            .vectors
            .iter()
            .map(|&(dy, dx)| (scale(dy), scale(dx)))
            .collect(),
    })
}

/// What a neighbor outside the activation reads as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BorderPolicy {
    /// Repeat the nearest edge value.
    #[default]
    ClampToEdge,
    /// Read zero.
    Zero,
}

/// Bilinear blend of a 2×2 neighborhood.
///
/// `neighbors` is `[top_left, top_right, bottom_left, bottom_right]`; `u` is
/// the horizontal and `v` the vertical fraction in 1/256 units. Weights are
/// 16-bit products, the sum is accumulated wide and shifted back by 16 bits
/// once, truncating toward zero.
#[inline]
pub fn interpolate(neighbors: [Q88; 4], u: u16, v: u16) -> Q88 {
    debug_assert!(u < 256 && v < 256);
    let (u, v) = (u as i64, v as i64);
    let weights = [(256 - u) * (256 - v), u * (256 - v), (256 - u) * v, u * v];
    let acc: i64 = neighbors
        .iter()
        .zip(weights)
        .map(|(n, w)| n.0 as i64 * w)
        .sum();
    // weights sum to 2^16, so the quotient stays within the neighbors' range
    Q88((acc / 65536) as i16)
}

fn sample_index(i: i64, extent: usize, border: BorderPolicy) -> Option<usize> {
    if (0..extent as i64).contains(&i) {
        Some(i as usize)
    } else {
        match border {
            BorderPolicy::ClampToEdge => Some(i.clamp(0, extent as i64 - 1) as usize),
            BorderPolicy::Zero => None,
        }
    }
}

/// Warps the stored key activation by `field` with bilinear interpolation.
pub fn warp(
    key_activation: &SparseActivation,
    field: &ActivationVectorField,
    border: BorderPolicy,
) -> Result<Tensor3> {
    let shape = key_activation.shape();
    check_field(key_activation, field)?;
    let (h, w) = (shape.height, shape.width);
    let mut out = Tensor3::zeros(shape);
    for c in 0..shape.channels {
        let dense = key_activation.decode_channel(c);
        let read = |y: Option<usize>, x: Option<usize>| match (y, x) {
            (Some(y), Some(x)) => dense[y * w + x],
            _ => Q88::ZERO,
        };
        for y in 0..h {
            for x in 0..w {
                let (dy, dx) = field.get(y, x);
                let (iy, fv) = Q88::split_position(y, dy);
                let (ix, fu) = Q88::split_position(x, dx);
                let y0 = sample_index(iy, h, border);
                let y1 = sample_index(iy + 1, h, border);
                let x0 = sample_index(ix, w, border);
                let x1 = sample_index(ix + 1, w, border);
                let n = [read(y0, x0), read(y0, x1), read(y1, x0), read(y1, x1)];
                out.set(c, y, x, interpolate(n, fu, fv).to_f32());
            }
        }
    }
    Ok(out)
}

/// [`warp`] that loads every neighborhood through the four sparsity decoder
/// lanes instead of a decoded channel. Much slower; produces identical
/// results.
pub fn warp_with_lanes(
    key_activation: &SparseActivation,
    field: &ActivationVectorField,
    border: BorderPolicy,
) -> Result<Tensor3> {
    let shape = key_activation.shape();
    check_field(key_activation, field)?;
    let (h, w) = (shape.height, shape.width);
    let mut out = Tensor3::zeros(shape);
    for c in 0..shape.channels {
        for y in 0..h {
            for x in 0..w {
                let (dy, dx) = field.get(y, x);
                let (iy, fv) = Q88::split_position(y, dy);
                let (ix, fu) = Q88::split_position(x, dx);
                let ys = [sample_index(iy, h, border), sample_index(iy + 1, h, border)];
                let xs = [sample_index(ix, w, border), sample_index(ix + 1, w, border)];
                let coords = [
                    (ys[0], xs[0]),
                    (ys[0], xs[1]),
                    (ys[1], xs[0]),
                    (ys[1], xs[1]),
                ];
                let loaded = lane_decode4(
                    key_activation,
                    c,
                    coords.map(|(y, x)| (y.unwrap_or(0), x.unwrap_or(0))),
                )?;
                let mut n = [Q88::ZERO; 4];
                for i in 0..4 {
                    if coords[i].0.is_some() && coords[i].1.is_some() {
                        n[i] = loaded[i];
                    }
                }
                out.set(c, y, x, interpolate(n, fu, fv).to_f32());
            }
        }
    }
    Ok(out)
}

fn check_field(key_activation: &SparseActivation, field: &ActivationVectorField) -> Result<()> {
    let shape = key_activation.shape();
    if (field.height, field.width) != (shape.height, shape.width)
        || field.vectors.len() != field.height * field.width
    {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} vector field", shape.height, shape.width),
            actual: format!("{}x{}", field.height, field.width),
        });
    }
    Ok(())
}
