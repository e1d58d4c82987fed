//! Network descriptors and prefix/suffix execution.

use crate::error::{shape_mismatch, Error, Result};
use crate::geometry::ReceptiveFieldGeometry;
use crate::layer::LayerSpec;
use crate::tensor::{Shape3, Tensor3};

/// An ordered layer list split at `target_layer`.
///
/// Layers `0..=target_layer` form the prefix that only runs on key frames;
/// the remaining layers form the suffix that runs on every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDescriptor {
    pub layers: Vec<LayerSpec>,
    pub target_layer: usize,
    pub input_shape: Shape3,
    pub memoization_only: bool,
}

impl NetworkDescriptor {
    pub fn new(input_shape: Shape3, layers: Vec<LayerSpec>, target_layer: usize) -> Result<Self> {
        let net = Self {
            layers,
            target_layer,
            input_shape,
            memoization_only: false,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn with_memoization(mut self, memoization_only: bool) -> Self {
        self.memoization_only = memoization_only;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidNetwork("no layers".into()));
        }
        if self.target_layer >= self.layers.len() {
            return Err(Error::InvalidNetwork(format!(
                "target_layer {} out of range for {} layers",
                self.target_layer,
                self.layers.len()
            )));
        }
        if let Some(i) = self.layers[..=self.target_layer]
            .iter()
            .position(|l| !l.kind.is_spatial())
        {
            return Err(Error::InvalidNetwork(format!(
                "layer {i} ({}) precedes the target layer but has no spatial structure",
                self.layers[i].kind.name()
            )));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer
                .validate()
                .map_err(|e| Error::InvalidNetwork(format!("layer {i}: {e}")))?;
            if layer.kernel.0 != layer.kernel.1 && i <= self.target_layer {
                return Err(Error::InvalidNetwork(format!(
                    "layer {i}: prefix kernels must be square"
                )));
            }
        }
        self.layer_shapes()?;
        Ok(())
    }

    /// Output shape of every layer, propagated from `input_shape`.
    pub fn layer_shapes(&self) -> Result<Vec<Shape3>> {
        self.layer_shapes_for(self.input_shape)
    }

    pub fn layer_shapes_for(&self, input: Shape3) -> Result<Vec<Shape3>> {
        let mut shape = input;
        self.layers
            .iter()
            .enumerate()
            .map(|(i, layer)| {
                shape = layer.output_shape(shape).map_err(|e| match e {
                    Error::ShapeMismatch { expected, actual } => Error::ShapeMismatch {
                        expected: format!("layer {i}: {expected}"),
                        actual,
                    },
                    other => other,
                })?;
                Ok(shape)
            })
            .collect()
    }

    pub fn target_shape(&self) -> Result<Shape3> {
        Ok(self.layer_shapes()?[self.target_layer])
    }

    pub fn prefix(&self) -> &[LayerSpec] {
        &self.layers[..=self.target_layer]
    }

    pub fn suffix(&self) -> &[LayerSpec] {
        &self.layers[self.target_layer + 1..]
    }

    /// Runs layers `0..=target_layer` and returns the target activation.
    pub fn run_prefix(&self, frame: &Tensor3) -> Result<Tensor3> {
        if frame.shape() != self.input_shape {
            return Err(shape_mismatch(self.input_shape, frame.shape()));
        }
        run_layers(self.prefix(), frame)
    }

    /// Runs the layers after the target layer on a target activation.
    pub fn run_suffix(&self, target_activation: &Tensor3) -> Result<Tensor3> {
        let expected = self.target_shape()?;
        if target_activation.shape() != expected {
            return Err(shape_mismatch(expected, target_activation.shape()));
        }
        run_layers(self.suffix(), target_activation)
    }

    pub fn forward(&self, frame: &Tensor3) -> Result<Tensor3> {
        if frame.shape() != self.input_shape {
            return Err(shape_mismatch(self.input_shape, frame.shape()));
        }
        run_layers(&self.layers, frame)
    }

    /// Receptive field of `layer_index`'s outputs with respect to input pixels.
    pub fn receptive_field_geometry(&self, layer_index: usize) -> Result<ReceptiveFieldGeometry> {
        if layer_index >= self.layers.len() {
            return Err(Error::InvalidNetwork(format!(
                "layer {layer_index} out of range"
            )));
        }
        self.layers[..=layer_index].iter().enumerate().try_fold(
            ReceptiveFieldGeometry::IDENTITY,
            |g, (i, layer)| {
                if !layer.kind.is_spatial() {
                    return Err(Error::NonSpatialLayer {
                        index: i,
                        kind: layer.kind.name(),
                    });
                }
                Ok(g.then(layer.kernel.0, layer.stride, layer.padding))
            },
        )
    }

    pub fn target_geometry(&self) -> Result<ReceptiveFieldGeometry> {
        self.receptive_field_geometry(self.target_layer)
    }
}

fn run_layers(layers: &[LayerSpec], input: &Tensor3) -> Result<Tensor3> {
    let mut x = input.clone();
    for layer in layers {
        x = layer.forward(&x)?;
    }
    Ok(x)
}
