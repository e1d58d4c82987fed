//! JSON network descriptors with raw little-endian f32 weight files.
//!
//! ```json
//! {"input_shape": [3, 224, 224], "target_layer": 1, "memoization_only": false,
//!  "layers": [{"kind": "conv", "kernel": [3, 3], "stride": 1, "padding": 1,
//!              "in_channels": 3, "out_channels": 64,
//!              "weights": "conv1.w", "bias": "conv1.b"},
//!             {"kind": "relu", "in_channels": 64, "out_channels": 64}]}
//! ```
//!
//! Weight paths are resolved relative to the descriptor. A conv/fc layer
//! without weight files loads fine but can only be used for cost estimates.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layer::{LayerKind, LayerSpec};
use crate::network::NetworkDescriptor;
use crate::tensor::Shape3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorFile {
    pub input_shape: [usize; 3],
    pub target_layer: usize,
    #[serde(default)]
    pub memoization_only: bool,
    pub layers: Vec<LayerEntry>,
}

fn one() -> usize {
    1
}

fn unit_kernel() -> [usize; 2] {
    [1, 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    pub kind: LayerKind,
    #[serde(default = "unit_kernel")]
    pub kernel: [usize; 2],
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<PathBuf>,
}

fn read_f32s(path: &Path, expected: usize) -> Result<Arc<[f32]>> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::InvalidNetwork(format!("{}: {e}", path.display())))?;
    if bytes.len() != expected * 4 {
        return Err(Error::InvalidNetwork(format!(
            "{}: expected {expected} floats ({} bytes), found {} bytes",
            path.display(),
            expected * 4,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

fn write_f32s(path: &Path, values: &[f32]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Builds a network from a parsed descriptor, loading weight files relative
/// to `base_dir`.
pub fn parse_descriptor(file: &DescriptorFile, base_dir: &Path) -> Result<NetworkDescriptor> {
    let [c, h, w] = file.input_shape;
    let mut layers = Vec::with_capacity(file.layers.len());
    for (i, e) in file.layers.iter().enumerate() {
        if !e.kind.has_weights() && (e.weights.is_some() || e.bias.is_some()) {
            return Err(Error::InvalidNetwork(format!(
                "layer {i} ({}) cannot carry weights",
                e.kind.name()
            )));
        }
        let mut layer = LayerSpec {
            kind: e.kind,
            kernel: (e.kernel[0], e.kernel[1]),
            stride: e.stride,
            padding: e.padding,
            in_channels: e.in_channels,
            out_channels: e.out_channels,
            weights: None,
            bias: None,
        };
        if let Some(p) = &e.weights {
            layer.weights = Some(read_f32s(&base_dir.join(p), layer.weight_len())?);
        }
        if let Some(p) = &e.bias {
            layer.bias = Some(read_f32s(&base_dir.join(p), layer.out_channels)?);
        }
        layer
            .validate()
            .map_err(|err| Error::InvalidNetwork(format!("layer {i}: {err}")))?;
        layers.push(layer);
    }
    Ok(
        NetworkDescriptor::new(Shape3::new(c, h, w), layers, file.target_layer)?
            .with_memoization(file.memoization_only),
    )
}

pub fn load_descriptor(path: impl AsRef<Path>) -> Result<NetworkDescriptor> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let file: DescriptorFile = serde_json::from_str(&text)?;
    parse_descriptor(&file, path.parent().unwrap_or(Path::new(".")))
}

/// Writes `net` as `path` plus one weight and one bias file per conv/fc layer
/// next to it, named after the descriptor's file stem.
pub fn save_descriptor(net: &NetworkDescriptor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new("."));
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("net")
        .to_string();
    let mut layers = Vec::with_capacity(net.layers.len());
    for (i, l) in net.layers.iter().enumerate() {
        let mut entry = LayerEntry {
            kind: l.kind,
            kernel: [l.kernel.0, l.kernel.1],
            stride: l.stride,
            padding: l.padding,
            in_channels: l.in_channels,
            out_channels: l.out_channels,
            weights: None,
            bias: None,
        };
        if let Some(w) = &l.weights {
            let name = PathBuf::from(format!("{stem}.{i}.weights.bin"));
            write_f32s(&dir.join(&name), w)?;
            entry.weights = Some(name);
        }
        if let Some(b) = &l.bias {
            let name = PathBuf::from(format!("{stem}.{i}.bias.bin"));
            write_f32s(&dir.join(&name), b)?;
            entry.bias = Some(name);
        }
        layers.push(entry);
    }
    let file = DescriptorFile {
        input_shape: [
            net.input_shape.channels,
            net.input_shape.height,
            net.input_shape.width,
        ],
        target_layer: net.target_layer,
        memoization_only: net.memoization_only,
        layers,
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::vgg16_features;

    fn toy() -> NetworkDescriptor {
        let layers = vec![
            LayerSpec::conv(
                2,
                3,
                3,
                1,
                1,
                (0..54).map(|i| i as f32 * 0.25).collect(),
                vec![1.0, -2.0, 0.5],
            )
            .unwrap(),
            LayerSpec::relu(3),
            LayerSpec::maxpool(3, 2, 2, 0).unwrap(),
        ];
        NetworkDescriptor::new(Shape3::new(2, 8, 8), layers, 1).unwrap()
    }

    #[test]
    fn round_trip_with_weights() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let path = dir.join("toy.json");
        let net = toy().with_memoization(true);
        save_descriptor(&net, &path).unwrap();
        let back = load_descriptor(&path).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn weightless_descriptor_loads_for_costing() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let path = dir.join("vgg.json");
        let net = vgg16_features(562, 1000).unwrap();
        save_descriptor(&net, &path).unwrap();
        assert_eq!(load_descriptor(&path).unwrap(), net);
    }

    #[test]
    fn minimal_relu_entry() {
        let json = r#"{"input_shape":[1,4,4],"target_layer":0,
            "layers":[{"kind":"relu","in_channels":1,"out_channels":1}]}"#;
        let file: DescriptorFile = serde_json::from_str(json).unwrap();
        let net = parse_descriptor(&file, Path::new(".")).unwrap();
        assert_eq!(net.layers[0], LayerSpec::relu(1));
        assert!(!net.memoization_only);
    }

    #[test]
    fn rejects_bad_descriptors() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        std::fs::write(dir.join("short.bin"), [0u8; 8]).unwrap();
        let bad_len = r#"{"input_shape":[1,4,4],"target_layer":0,"layers":[{"kind":"conv",
            "kernel":[3,3],"padding":1,"in_channels":1,"out_channels":1,"weights":"short.bin"}]}"#;
        let file: DescriptorFile = serde_json::from_str(bad_len).unwrap();
        assert!(parse_descriptor(&file, dir).is_err());

        let relu_weights = r#"{"input_shape":[1,4,4],"target_layer":0,"layers":[{"kind":"relu",
            "in_channels":1,"out_channels":1,"weights":"short.bin"}]}"#;
        let file: DescriptorFile = serde_json::from_str(relu_weights).unwrap();
        assert!(parse_descriptor(&file, dir).is_err());

        let bad_target = r#"{"input_shape":[1,4,4],"target_layer":3,"layers":[{"kind":"relu",
            "in_channels":1,"out_channels":1}]}"#;
        let file: DescriptorFile = serde_json::from_str(bad_target).unwrap();
        assert!(parse_descriptor(&file, dir).is_err());
        assert!(serde_json::from_str::<DescriptorFile>(r#"{"input_shape":[1,4,4]}"#).is_err());
    }
}
