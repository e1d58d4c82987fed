//! Layer lists of published networks, without weights. Useful for cost
//! estimation and geometry checks.

use crate::error::Result;
use crate::layer::{LayerKind, LayerSpec};
use crate::network::NetworkDescriptor;
use crate::tensor::Shape3;

fn conv3(cin: usize, cout: usize) -> LayerSpec {
    LayerSpec {
        kind: LayerKind::Conv,
        kernel: (3, 3),
        stride: 1,
        padding: 1,
        in_channels: cin,
        out_channels: cout,
        weights: None,
        bias: None,
    }
}

fn pool2(channels: usize) -> LayerSpec {
    LayerSpec {
        kind: LayerKind::MaxPool,
        kernel: (2, 2),
        stride: 2,
        padding: 0,
        in_channels: channels,
        out_channels: channels,
        weights: None,
        bias: None,
    }
}

/// Index of `relu5_3` in [`vgg16_features`].
pub const VGG16_CONV5_3_RELU: usize = 29;

/// The 13 convolutional layers of VGG-16 with their ReLUs and the five
/// max-pools, targeting the output of `conv5_3` (post-ReLU).
pub fn vgg16_features(height: usize, width: usize) -> Result<NetworkDescriptor> {
    let blocks: [&[(usize, usize)]; 5] = [
        &[(3, 64), (64, 64)],
        &[(64, 128), (128, 128)],
        &[(128, 256), (256, 256), (256, 256)],
        &[(256, 512), (512, 512), (512, 512)],
        &[(512, 512), (512, 512), (512, 512)],
    ];
    let mut layers = Vec::new();
    for block in blocks {
        for &(cin, cout) in block {
            layers.push(conv3(cin, cout));
            layers.push(LayerSpec::relu(cout));
        }
        layers.push(pool2(block.last().unwrap().1));
    }
    NetworkDescriptor::new(Shape3::new(3, height, width), layers, VGG16_CONV5_3_RELU)
}
