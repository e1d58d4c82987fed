//! File formats: PGM/PPM frames, network descriptors, dense Q8.8 tensors and
//! cost tables.

mod dense;
mod descriptor;
mod pnm;

use std::path::Path;

pub use dense::{read_dense, write_dense, DENSE_HEADER_BYTES, DENSE_MAGIC};
pub use descriptor::{
    load_descriptor, parse_descriptor, save_descriptor, DescriptorFile, LayerEntry,
};
pub use pnm::{read_pnm, write_pgm, Image};

use crate::controller::InputFrame;
use crate::cost::LayerCostOverride;
use crate::error::{Error, Result};

/// Loads a PGM or PPM frame for a network with `channels` input channels.
pub fn load_frame(path: impl AsRef<Path>, channels: usize) -> Result<InputFrame> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let img = read_pnm(std::io::BufReader::new(file))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    img.into_input_frame(channels)
}

/// Reads a cost table: a JSON array of `{layer_index, energy_mj, latency_ms}`.
pub fn load_cost_table(path: impl AsRef<Path>) -> Result<Vec<LayerCostOverride>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
