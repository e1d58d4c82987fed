//! Layer descriptions and their forward passes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};
use crate::tensor::{Shape3, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    MaxPool,
    Relu,
    Fc,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::MaxPool => "maxpool",
            LayerKind::Relu => "relu",
            LayerKind::Fc => "fc",
        }
    }

    /// Whether the layer preserves 2D spatial structure.
    pub fn is_spatial(self) -> bool {
        !matches!(self, LayerKind::Fc)
    }

    pub fn has_weights(self) -> bool {
        matches!(self, LayerKind::Conv | LayerKind::Fc)
    }
}

/// One network layer.
///
/// Weights are laid out out-channel major, then in-channel, kernel row, kernel
/// column. For `fc` layers the kernel spans the whole input extent, so
/// `in_channels × kernel.0 × kernel.1` is the flattened input length.
/// Weights may be absent on a descriptor that is only used for cost
/// estimation; executing such a layer is an error.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub padding: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: Option<Arc<[f32]>>,
    pub bias: Option<Arc<[f32]>>,
}

impl LayerSpec {
    pub fn conv(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        let layer = Self {
            kind: LayerKind::Conv,
            kernel: (kernel, kernel),
            stride,
            padding,
            in_channels,
            out_channels,
            weights: Some(weights.into()),
            bias: Some(bias.into()),
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn maxpool(channels: usize, kernel: usize, stride: usize, padding: usize) -> Result<Self> {
        let layer = Self {
            kind: LayerKind::MaxPool,
            kernel: (kernel, kernel),
            stride,
            padding,
            in_channels: channels,
            out_channels: channels,
            weights: None,
            bias: None,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn relu(channels: usize) -> Self {
        Self {
            kind: LayerKind::Relu,
            kernel: (1, 1),
            stride: 1,
            padding: 0,
            in_channels: channels,
            out_channels: channels,
            weights: None,
            bias: None,
        }
    }

    /// Fully-connected layer over an input of shape `input`.
    pub fn fc(
        input: Shape3,
        out_features: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        let layer = Self {
            kind: LayerKind::Fc,
            kernel: (input.height, input.width),
            stride: 1,
            padding: 0,
            in_channels: input.channels,
            out_channels: out_features,
            weights: Some(weights.into()),
            bias: Some(bias.into()),
        };
        layer.validate()?;
        Ok(layer)
    }

    /// Number of weights a conv/fc layer must carry.
    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel.0 * self.kernel.1
    }

    pub fn validate(&self) -> Result<()> {
        let name = self.kind.name();
        if self.stride == 0 {
            return Err(Error::InvalidLayer(format!("{name}: stride must be >= 1")));
        }
        if self.kernel.0 == 0 || self.kernel.1 == 0 {
            return Err(Error::InvalidLayer(format!("{name}: kernel must be >= 1")));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidLayer(format!(
                "{name}: channel counts must be >= 1"
            )));
        }
        match self.kind {
            LayerKind::Conv | LayerKind::Fc => {
                if let Some(w) = &self.weights {
                    if w.len() != self.weight_len() {
                        return Err(Error::InvalidLayer(format!(
                            "{name}: expected {} weights, got {}",
                            self.weight_len(),
                            w.len()
                        )));
                    }
                }
                if let Some(b) = &self.bias {
                    if b.len() != self.out_channels {
                        return Err(Error::InvalidLayer(format!(
                            "{name}: expected {} bias values, got {}",
                            self.out_channels,
                            b.len()
                        )));
                    }
                }
                if self.kind == LayerKind::Fc && (self.stride != 1 || self.padding != 0) {
                    return Err(Error::InvalidLayer(
                        "fc: stride must be 1 and padding 0".into(),
                    ));
                }
            }
            LayerKind::MaxPool => {
                if self.weights.is_some() || self.bias.is_some() {
                    return Err(Error::InvalidLayer("maxpool carries no weights".into()));
                }
                if self.in_channels != self.out_channels {
                    return Err(Error::InvalidLayer(
                        "maxpool: in/out channels differ".into(),
                    ));
                }
            }
            LayerKind::Relu => {
                if self.weights.is_some() || self.bias.is_some() {
                    return Err(Error::InvalidLayer("relu carries no weights".into()));
                }
                if self.kernel != (1, 1) || self.stride != 1 || self.padding != 0 {
                    return Err(Error::InvalidLayer(
                        "relu: kernel must be 1x1, stride 1, padding 0".into(),
                    ));
                }
                if self.in_channels != self.out_channels {
                    return Err(Error::InvalidLayer("relu: in/out channels differ".into()));
                }
            }
        }
        Ok(())
    }

    /// Shape produced from an input of shape `input`.
    pub fn output_shape(&self, input: Shape3) -> Result<Shape3> {
        match self.kind {
            LayerKind::Fc => {
                let expected = self.in_channels * self.kernel.0 * self.kernel.1;
                if input.len() != expected {
                    return Err(shape_mismatch(
                        format!("fc input of {expected} values"),
                        format!("{input} ({} values)", input.len()),
                    ));
                }
                Ok(Shape3::new(self.out_channels, 1, 1))
            }
            LayerKind::Relu => {
                if input.channels != self.in_channels {
                    return Err(shape_mismatch(
                        format!("{} channels", self.in_channels),
                        format!("{} channels", input.channels),
                    ));
                }
                Ok(input)
            }
            LayerKind::Conv | LayerKind::MaxPool => {
                if input.channels != self.in_channels {
                    return Err(shape_mismatch(
                        format!("{} channels", self.in_channels),
                        format!("{} channels", input.channels),
                    ));
                }
                let h = window_count(input.height, self.kernel.0, self.stride, self.padding);
                let w = window_count(input.width, self.kernel.1, self.stride, self.padding);
                match (h, w) {
                    (Some(h), Some(w)) => Ok(Shape3::new(self.out_channels, h, w)),
                    _ => Err(Error::EmptyOutput {
                        layer: format!(
                            "{} k={:?} s={} p={} on {input}",
                            self.kind.name(),
                            self.kernel,
                            self.stride,
                            self.padding
                        ),
                    }),
                }
            }
        }
    }

    pub fn forward(&self, input: &Tensor3) -> Result<Tensor3> {
        match self.kind {
            LayerKind::Conv => conv_forward(input, self),
            LayerKind::MaxPool => maxpool_forward(input, self),
            LayerKind::Relu => {
                self.output_shape(input.shape())?;
                Ok(relu_forward(input))
            }
            LayerKind::Fc => fc_forward(input, self),
        }
    }

    fn require_params(&self) -> Result<(&[f32], &[f32])> {
        match (&self.weights, &self.bias) {
            (Some(w), Some(b)) => Ok((w, b)),
            _ => Err(Error::InvalidLayer(format!(
                "{} layer has no weights loaded",
                self.kind.name()
            ))),
        }
    }
}

/// `(extent + 2·padding − kernel) / stride + 1`, or `None` when no window fits.
pub fn window_count(extent: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = extent + 2 * padding;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Direct convolution with zero padding.
///
/// Accumulation order per output value is input channel, then kernel row,
/// then kernel column; bias is added last. Padded taps are skipped.
pub fn conv_forward(input: &Tensor3, layer: &LayerSpec) -> Result<Tensor3> {
    if layer.kind != LayerKind::Conv {
        return Err(Error::InvalidLayer(format!(
            "expected conv, got {}",
            layer.kind.name()
        )));
    }
    let out_shape = layer.output_shape(input.shape())?;
    let (weights, bias) = layer.require_params()?;
    let (kh, kw) = layer.kernel;
    let (ih, iw) = (input.height() as isize, input.width() as isize);
    let s = layer.stride as isize;
    let p = layer.padding as isize;
    let cin = layer.in_channels;

    let mut out = Tensor3::zeros(out_shape);
    let data = input.data();
    for co in 0..out_shape.channels {
        let filter = &weights[co * cin * kh * kw..(co + 1) * cin * kh * kw];
        for oy in 0..out_shape.height {
            let y0 = oy as isize * s - p;
            for ox in 0..out_shape.width {
                let x0 = ox as isize * s - p;
                let mut acc = 0.0f32;
                for ci in 0..cin {
                    let plane = &data[ci * input.shape().plane()..(ci + 1) * input.shape().plane()];
                    let fch = &filter[ci * kh * kw..(ci + 1) * kh * kw];
                    for ky in 0..kh {
                        let y = y0 + ky as isize;
                        if y < 0 || y >= ih {
                            continue;
                        }
                        let row = &plane[y as usize * iw as usize..(y as usize + 1) * iw as usize];
                        for kx in 0..kw {
                            let x = x0 + kx as isize;
                            if x < 0 || x >= iw {
                                continue;
                            }
                            acc += fch[ky * kw + kx] * row[x as usize];
                        }
                    }
                }
                out.set(co, oy, ox, acc + bias[co]);
            }
        }
    }
    Ok(out)
}

/// Per-channel window maximum; padded positions never participate.
pub fn maxpool_forward(input: &Tensor3, layer: &LayerSpec) -> Result<Tensor3> {
    if layer.kind != LayerKind::MaxPool {
        return Err(Error::InvalidLayer(format!(
            "expected maxpool, got {}",
            layer.kind.name()
        )));
    }
    let out_shape = layer.output_shape(input.shape())?;
    let (kh, kw) = layer.kernel;
    let (ih, iw) = (input.height() as isize, input.width() as isize);
    let s = layer.stride as isize;
    let p = layer.padding as isize;

    let mut out = Tensor3::zeros(out_shape);
    for c in 0..out_shape.channels {
        for oy in 0..out_shape.height {
            for ox in 0..out_shape.width {
                let y0 = oy as isize * s - p;
                let x0 = ox as isize * s - p;
                let mut best = f32::NEG_INFINITY;
                let mut seen = false;
                for y in y0.max(0)..(y0 + kh as isize).min(ih) {
                    for x in x0.max(0)..(x0 + kw as isize).min(iw) {
                        let v = input.get(c, y as usize, x as usize);
                        if !seen || v > best {
                            best = v;
                            seen = true;
                        }
                    }
                }
                if !seen {
                    // window lies entirely in padding
                    return Err(Error::EmptyOutput {
                        layer: format!("maxpool window at ({oy}, {ox}) covers only padding"),
                    });
                }
                out.set(c, oy, ox, best);
            }
        }
    }
    Ok(out)
}

pub fn relu_forward(input: &Tensor3) -> Tensor3 {
    input.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Matrix-vector product over the flattened input plus bias.
pub fn fc_forward(input: &Tensor3, layer: &LayerSpec) -> Result<Tensor3> {
    if layer.kind != LayerKind::Fc {
        return Err(Error::InvalidLayer(format!(
            "expected fc, got {}",
            layer.kind.name()
        )));
    }
    let out_shape = layer.output_shape(input.shape())?;
    let (weights, bias) = layer.require_params()?;
    let n = input.data().len();
    let out = (0..layer.out_channels)
        .map(|o| {
            let row = &weights[o * n..(o + 1) * n];
            let acc = row
                .iter()
                .zip(input.data())
                .fold(0.0f32, |acc, (w, x)| acc + w * x);
            acc + bias[o]
        })
        .collect();
    Tensor3::new(out_shape, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape3) -> Tensor3 {
        Tensor3::from_fn(shape, |_, _, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn conv_scalar_kernel() {
        let input = Tensor3::filled(Shape3::new(1, 3, 3), 1.0);
        let layer = LayerSpec::conv(1, 1, 1, 1, 0, vec![2.0], vec![0.0]).unwrap();
        let out = conv_forward(&input, &layer).unwrap();
        assert_eq!(out, Tensor3::filled(Shape3::new(1, 3, 3), 2.0));
    }

    #[test]
    fn conv_identity_kernel_with_padding() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = random_tensor(&mut rng, Shape3::new(1, 4, 4));
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let layer = LayerSpec::conv(1, 1, 3, 1, 1, w, vec![0.0]).unwrap();
        assert_eq!(conv_forward(&input, &layer).unwrap(), input);
    }

    #[test]
    fn conv_matches_window_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input = random_tensor(&mut rng, Shape3::new(1, 4, 4));
        let w: Vec<f32> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let layer = LayerSpec::conv(1, 1, 3, 1, 0, w.clone(), vec![0.25]).unwrap();
        let out = conv_forward(&input, &layer).unwrap();
        assert_eq!(out.shape(), Shape3::new(1, 2, 2));
        for oy in 0..2 {
            for ox in 0..2 {
                let mut dot = 0.0f64;
                for ky in 0..3 {
                    for kx in 0..3 {
                        dot += w[ky * 3 + kx] as f64 * input.get(0, oy + ky, ox + kx) as f64;
                    }
                }
                let expected = dot + 0.25;
                assert!((out.get(0, oy, ox) as f64 - expected).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn conv_rejects_bad_input() {
        let layer = LayerSpec::conv(2, 1, 3, 1, 0, vec![0.0; 18], vec![0.0]).unwrap();
        let one_channel = Tensor3::zeros(Shape3::new(1, 4, 4));
        assert!(matches!(
            conv_forward(&one_channel, &layer),
            Err(Error::ShapeMismatch { .. })
        ));
        let tiny = Tensor3::zeros(Shape3::new(2, 2, 2));
        assert!(matches!(
            conv_forward(&tiny, &layer),
            Err(Error::EmptyOutput { .. })
        ));
    }

    #[test]
    fn conv_rejects_wrong_weight_count() {
        assert!(LayerSpec::conv(1, 2, 3, 1, 0, vec![0.0; 9], vec![0.0; 2]).is_err());
    }

    #[test]
    fn maxpool_constant() {
        let input = Tensor3::filled(Shape3::new(2, 4, 6), 7.0);
        let layer = LayerSpec::maxpool(2, 2, 2, 0).unwrap();
        assert_eq!(
            maxpool_forward(&input, &layer).unwrap(),
            Tensor3::filled(Shape3::new(2, 2, 3), 7.0)
        );
    }

    #[test]
    fn maxpool_single_window() {
        let input = Tensor3::new(Shape3::new(1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let layer = LayerSpec::maxpool(1, 2, 1, 0).unwrap();
        let out = maxpool_forward(&input, &layer).unwrap();
        assert_eq!(out.data(), &[4.0]);
    }

    #[test]
    fn maxpool_matches_window_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let input = random_tensor(&mut rng, Shape3::new(1, 6, 6));
        let layer = LayerSpec::maxpool(1, 2, 2, 0).unwrap();
        let out = maxpool_forward(&input, &layer).unwrap();
        for oy in 0..3 {
            for ox in 0..3 {
                let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                    .iter()
                    .map(|&(dy, dx)| input.get(0, 2 * oy + dy, 2 * ox + dx))
                    .fold(f32::NEG_INFINITY, f32::max);
                assert_eq!(out.get(0, oy, ox), m);
            }
        }
    }

    #[test]
    fn maxpool_padding_is_not_a_candidate() {
        let input = Tensor3::filled(Shape3::new(1, 2, 2), -3.0);
        let layer = LayerSpec::maxpool(1, 2, 2, 1).unwrap();
        let out = maxpool_forward(&input, &layer).unwrap();
        assert_eq!(out.shape(), Shape3::new(1, 2, 2));
        assert!(out.data().iter().all(|&v| v == -3.0));
    }

    #[test]
    fn relu_cases() {
        let t = Tensor3::new(Shape3::new(1, 1, 3), vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu_forward(&t).data(), &[0.0, 0.0, 2.0]);
        let neg = Tensor3::filled(Shape3::new(2, 3, 3), -0.5);
        assert!(relu_forward(&neg).data().iter().all(|&v| v == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = random_tensor(&mut rng, Shape3::new(3, 5, 5));
        let out = relu_forward(&r);
        for (a, b) in r.data().iter().zip(out.data()) {
            assert_eq!(*b, if *a > 0.0 { *a } else { 0.0 });
        }
    }

    #[test]
    fn fc_identity_and_bias() {
        let shape = Shape3::new(2, 2, 1);
        let input = Tensor3::new(shape, vec![1.0, -2.0, 3.0, 4.5]).unwrap();
        let mut eye = vec![0.0; 16];
        for i in 0..4 {
            eye[i * 4 + i] = 1.0;
        }
        let layer = LayerSpec::fc(shape, 4, eye, vec![0.0; 4]).unwrap();
        let out = fc_forward(&input, &layer).unwrap();
        assert_eq!(out.shape(), Shape3::new(4, 1, 1));
        assert_eq!(out.data(), input.data());

        let layer = LayerSpec::fc(shape, 2, vec![0.0; 8], vec![0.5, -1.5]).unwrap();
        assert_eq!(fc_forward(&input, &layer).unwrap().data(), &[0.5, -1.5]);
    }

    #[test]
    fn fc_matches_dot_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = Shape3::new(2, 2, 2);
        let input = random_tensor(&mut rng, shape);
        let w: Vec<f32> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f32> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let layer = LayerSpec::fc(shape, 3, w.clone(), b.clone()).unwrap();
        let out = fc_forward(&input, &layer).unwrap();
        for o in 0..3 {
            let dot: f64 = (0..8)
                .map(|i| w[o * 8 + i] as f64 * input.data()[i] as f64)
                .sum();
            assert!((out.data()[o] as f64 - (dot + b[o] as f64)).abs() < 1e-5);
        }
    }

    #[test]
    fn fc_length_mismatch() {
        let layer = LayerSpec::fc(Shape3::new(1, 2, 2), 1, vec![0.0; 4], vec![0.0]).unwrap();
        let input = Tensor3::zeros(Shape3::new(1, 3, 3));
        assert!(matches!(
            fc_forward(&input, &layer),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn relu_layer_must_be_unit() {
        let mut r = LayerSpec::relu(1);
        r.stride = 2;
        assert!(r.validate().is_err());
    }
}
