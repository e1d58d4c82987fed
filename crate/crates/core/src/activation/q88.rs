use serde::{Deserialize, Serialize};

use crate::tensor::Tensor3;

/// Signed 16-bit fixed point with 8 fractional bits: `value = raw / 256`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Q88(pub i16);

impl Q88 {
    pub const ZERO: Q88 = Q88(0);
    pub const ONE: Q88 = Q88(256);
    pub const FRAC_BITS: u32 = 8;
    pub const SCALE: f64 = 256.0;

    /// Nearest representable value, ties to even, saturating.
    pub fn from_f64(value: f64) -> Self {
        if value.is_nan() {
            return Q88::ZERO;
        }
        let scaled = (value * Self::SCALE).round_ties_even();
        Q88(scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16)
    }

    pub fn from_f32(value: f32) -> Self {
        Self::from_f64(value as f64)
    }

    pub fn raw(self) -> i16 {
        self.0
    }

    pub fn to_f32(self) -> f32 {
        self.0 as f32 / 256.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Integer part (floor) and fractional bits of a non-saturated position
    /// `base + self`, where `base` is an integer coordinate.
    pub(crate) fn split_position(base: usize, delta: Q88) -> (i64, u16) {
        let pos = ((base as i64) << Self::FRAC_BITS) + delta.0 as i64;
        (pos >> Self::FRAC_BITS, (pos & 0xff) as u16)
    }
}

/// `n / d` rounded to the nearest integer, ties to even. `d > 0`.
pub(crate) fn div_round_half_even(n: i64, d: i64) -> i64 {
    debug_assert!(d > 0);
    let q = n.div_euclid(d);
    let r = n.rem_euclid(d);
    match (2 * r).cmp(&d) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// Rounds every element to the nearest Q8.8 value (ties to even),
/// saturating to `[-128, 128 - 1/256]`.
pub fn quantize(t: &Tensor3) -> Tensor3 {
    t.map(|v| Q88::from_f32(v).to_f32())
}

/// Raw Q8.8 values of a tensor, channel-major.
pub fn to_raw(t: &Tensor3) -> Vec<Q88> {
    t.data().iter().map(|&v| Q88::from_f32(v)).collect()
}
