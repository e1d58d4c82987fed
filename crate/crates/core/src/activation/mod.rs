//! Sparse Q8.8 storage of the target activation and its motion-compensated
//! reconstruction.

mod lanes;
mod q88;
mod rle;
mod warp;

pub use lanes::lane_decode4;
pub use q88::{quantize, to_raw, Q88};
pub use rle::{
    rle_decode, rle_encode, rle_encode_raw, RunPair, SparseActivation, GAP_BITS, HEADER_BYTES,
    MAGIC, PAIR_BYTES, VERSION,
};
pub use warp::{
    interpolate, scale_vector_field, warp, warp_with_lanes, ActivationVectorField, BorderPolicy,
};
