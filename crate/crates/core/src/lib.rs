//! Activation motion compensation (AMC) for video CNN inference.
//!
//! Key frames run the whole network and keep a run-length encoded copy of
//! the last spatial layer's output (the *target activation*). Every other
//! frame runs receptive-field block motion estimation against the key frame,
//! warps the stored activation along the resulting vectors, and runs only the
//! layers after the target.
//!
//! The guide under `book/` walks through each stage; its code listings are
//! compiled as doc-tests of this crate.

pub mod activation;
pub mod controller;
pub mod cost;
pub mod error;
pub mod geometry;
pub mod io;
pub mod layer;
pub mod motion;
pub mod network;
pub mod tensor;
pub mod zoo;

pub use error::{Error, Result};
pub use geometry::ReceptiveFieldGeometry;
pub use layer::{LayerKind, LayerSpec};
pub use network::NetworkDescriptor;
pub use tensor::{Shape3, Tensor3};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/motion.md")]
    mod motion {}
    #[doc = include_str!("../../../book/src/activations.md")]
    mod activations {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/cost.md")]
    mod cost {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
