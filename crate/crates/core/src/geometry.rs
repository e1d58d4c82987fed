//! Receptive-field geometry of a stack of spatial layers.

use serde::{Deserialize, Serialize};

/// Input-pixel footprint of one target-layer activation.
///
/// The field for target coordinate `j` (per axis) spans pixels
/// `[offset + j·stride, offset + j·stride + size)`. `offset` is negative when
/// the stack pads its input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReceptiveFieldGeometry {
    pub size: usize,
    pub stride: usize,
    pub offset: isize,
}

impl ReceptiveFieldGeometry {
    /// A single input pixel.
    pub const IDENTITY: Self = Self {
        size: 1,
        stride: 1,
        offset: 0,
    };

    pub fn new(size: usize, stride: usize, offset: isize) -> Self {
        Self {
            size,
            stride,
            offset,
        }
    }

    /// Composes one more layer with square `kernel`, `stride` and `padding`.
    pub fn then(self, kernel: usize, stride: usize, padding: usize) -> Self {
        let jump = self.stride;
        Self {
            size: self.size + (kernel - 1) * jump,
            stride: jump * stride,
            offset: self.offset - (padding * jump) as isize,
        }
    }

    /// First pixel (possibly negative) covered by field `index` on one axis.
    pub fn origin(&self, index: usize) -> isize {
        self.offset + (index * self.stride) as isize
    }

    /// Number of field positions along an axis of `extent` pixels, assuming
    /// the padding that produced `offset` is applied symmetrically.
    pub fn field_count(&self, extent: usize) -> usize {
        let span = extent as isize - 2 * self.offset - self.size as isize;
        if span < 0 {
            0
        } else {
            span as usize / self.stride + 1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_count_matches_conv_arithmetic() {
        // k3 s1 p1: same size
        let g = ReceptiveFieldGeometry::IDENTITY.then(3, 1, 1);
        assert_eq!(g.field_count(17), 17);
        // k3 s1 p1 then 2x2/2 pool: halves
        let g = g.then(2, 2, 0);
        assert_eq!(g.field_count(16), 8);
        assert_eq!(g.field_count(17), 8);
    }

    #[test]
    fn origin_steps_by_stride() {
        let g = ReceptiveFieldGeometry::new(6, 2, -2);
        assert_eq!(g.origin(0), -2);
        assert_eq!(g.origin(3), 4);
    }
}
