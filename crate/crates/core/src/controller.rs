//! Frame-by-frame orchestration of key and predicted execution.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activation::{
    quantize, rle_decode, rle_encode, scale_vector_field, warp, BorderPolicy, SparseActivation,
};
use crate::cost::{
    build_cost_table, frame_costs, CostParams, CostReport, LayerCostEntry, LayerCostOverride,
    MotionOps,
};
use crate::error::{shape_mismatch, Error, Result};
use crate::geometry::ReceptiveFieldGeometry;
use crate::motion::{rfbme_on_grid, FieldGrid, Frame, MotionVectorField, SearchParams};
use crate::network::NetworkDescriptor;
use crate::tensor::{Shape3, Tensor3};

/// When to spend a full network execution on a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum KeyFramePolicy {
    /// Every `n`th frame.
    StaticRate(usize),
    /// When the normalized block-matching error exceeds the threshold.
    ErrorThreshold(f64),
    /// When the summed motion-vector magnitude exceeds the threshold.
    MotionThreshold(f64),
    AlwaysKey,
}

impl KeyFramePolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KeyFramePolicy::StaticRate(0) => {
                Err(Error::InvalidPolicy("static rate must be >= 1".into()))
            }
            KeyFramePolicy::ErrorThreshold(t) | KeyFramePolicy::MotionThreshold(t)
                if t.is_nan() || t < 0.0 =>
            {
                Err(Error::InvalidPolicy(format!(
                    "threshold must be >= 0, got {t}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// The metric this policy thresholds, read from a motion field.
    pub fn metric(&self, mv: &MotionVectorField) -> f64 {
        match self {
            KeyFramePolicy::MotionThreshold(_) => mv.total_magnitude,
            _ => mv.aggregate_error,
        }
    }
}

impl FromStr for KeyFramePolicy {
    type Err = Error;

    /// `static:N`, `error:θ`, `motion:θ` or `always`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidPolicy(format!("cannot parse policy {s:?}"));
        let policy = match s.split_once(':') {
            None if s == "always" => KeyFramePolicy::AlwaysKey,
            Some(("static", n)) => KeyFramePolicy::StaticRate(n.parse().map_err(|_| bad())?),
            Some(("error", t)) => KeyFramePolicy::ErrorThreshold(t.parse().map_err(|_| bad())?),
            Some(("motion", t)) => KeyFramePolicy::MotionThreshold(t.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl fmt::Display for KeyFramePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyFramePolicy::StaticRate(n) => write!(f, "static:{n}"),
            KeyFramePolicy::ErrorThreshold(t) => write!(f, "error:{t}"),
            KeyFramePolicy::MotionThreshold(t) => write!(f, "motion:{t}"),
            KeyFramePolicy::AlwaysKey => write!(f, "always"),
        }
    }
}

/// Key-frame decision. `frames_since_key` is `None` before the first key
/// frame, which always makes the frame a key.
pub fn decide(
    metrics: Option<&MotionVectorField>,
    policy: &KeyFramePolicy,
    frames_since_key: Option<usize>,
) -> bool {
    let Some(since) = frames_since_key else {
        return true;
    };
    match *policy {
        KeyFramePolicy::AlwaysKey => true,
        KeyFramePolicy::StaticRate(n) => since + 1 >= n,
        KeyFramePolicy::ErrorThreshold(theta) => metrics.is_none_or(|m| m.aggregate_error > theta),
        KeyFramePolicy::MotionThreshold(theta) => metrics.is_none_or(|m| m.total_magnitude > theta),
    }
}

/// A frame as the network sees it plus the luma plane motion estimation uses.
#[derive(Debug, Clone, PartialEq)]
pub struct InputFrame {
    pub pixels: Tensor3,
    pub luma: Frame,
}

impl InputFrame {
    /// Grayscale frame; pixel values are scaled to `[0, 1]` and replicated
    /// across `channels`.
    pub fn from_gray(height: usize, width: usize, gray: &[u8], channels: usize) -> Result<Self> {
        let luma = Frame::new(height, width, gray.to_vec())?;
        let pixels = Tensor3::from_fn(Shape3::new(channels, height, width), |_, y, x| {
            gray[y * width + x] as f32 / 255.0
        });
        Ok(Self { pixels, luma })
    }

    /// Interleaved RGB frame. A 3-channel network gets R, G, B planes; a
    /// 1-channel network gets luma.
    pub fn from_rgb(height: usize, width: usize, rgb: &[u8], channels: usize) -> Result<Self> {
        let luma = Frame::from_rgb(height, width, rgb)?;
        let pixels = match channels {
            3 => Tensor3::from_fn(Shape3::new(3, height, width), |c, y, x| {
                rgb[(y * width + x) * 3 + c] as f32 / 255.0
            }),
            1 => Tensor3::from_fn(Shape3::new(1, height, width), |_, y, x| {
                luma.at(y, x) as f32 / 255.0
            }),
            n => {
                return Err(Error::ShapeMismatch {
                    expected: "a 1- or 3-channel network for RGB input".into(),
                    actual: format!("{n} channels"),
                })
            }
        };
        Ok(Self { pixels, luma })
    }

    pub fn from_luma(luma: Frame, channels: usize) -> Self {
        let (h, w) = luma.dims();
        let pixels = Tensor3::from_fn(Shape3::new(channels, h, w), |_, y, x| {
            luma.at(y, x) as f32 / 255.0
        });
        Self { pixels, luma }
    }
}

/// What survives between frames: the last key frame's pixels and its
/// compressed target activation.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineState {
    pub key_frame: Frame,
    pub key_activation: SparseActivation,
    pub frames_since_key: usize,
    pub geometry: ReceptiveFieldGeometry,
    pub search: SearchParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDecision {
    pub is_key: bool,
    pub metric_value: f64,
    /// Absent on the first frame, which has nothing to match against.
    pub vectors: Option<MotionVectorField>,
}

/// Work done on one frame, plus its estimated cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub prefix_macs: u64,
    pub suffix_macs: u64,
    pub motion_ops: u64,
    pub warp_elements: u64,
    pub aggregate_error: f64,
    pub total_magnitude: f64,
    pub energy_mj: f64,
    pub latency_ms: f64,
}

/// Knobs that are not part of the network or the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Defaults to a radius of three tiles with a one-tile step.
    pub search: Option<SearchParams>,
    pub border: BorderPolicy,
    pub zero_epsilon: f64,
    pub cost_params: CostParams,
    pub cost_overrides: Vec<LayerCostOverride>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            search: None,
            border: BorderPolicy::ClampToEdge,
            zero_epsilon: 0.0,
            cost_params: CostParams::default(),
            cost_overrides: Vec::new(),
        }
    }
}

/// Everything derived once from the network and config.
#[derive(Debug, Clone)]
pub struct PreparedNetwork {
    pub net: NetworkDescriptor,
    pub geometry: ReceptiveFieldGeometry,
    pub search: SearchParams,
    pub target_shape: Shape3,
    pub cost_table: Vec<LayerCostEntry>,
    /// Layers whose cost came from the MAC-proportional default.
    pub default_cost_layers: usize,
    pub config: PipelineConfig,
    prefix_macs: u64,
    suffix_macs: u64,
}

impl PreparedNetwork {
    pub fn new(net: NetworkDescriptor, config: PipelineConfig) -> Result<Self> {
        net.validate()?;
        let geometry = net.target_geometry()?;
        let search = config
            .search
            .unwrap_or_else(|| SearchParams::default_for_tile(geometry.stride));
        search.validate()?;
        let target_shape = net.target_shape()?;
        let (cost_table, default_cost_layers) = build_cost_table(
            &net,
            net.input_shape,
            &config.cost_params,
            &config.cost_overrides,
        )?;
        let prefix_macs = cost_table[..=net.target_layer].iter().map(|e| e.macs).sum();
        let suffix_macs = cost_table[net.target_layer + 1..]
            .iter()
            .map(|e| e.macs)
            .sum();
        Ok(Self {
            net,
            geometry,
            search,
            target_shape,
            cost_table,
            default_cost_layers,
            config,
            prefix_macs,
            suffix_macs,
        })
    }

    fn grid(&self) -> FieldGrid {
        FieldGrid {
            fields_y: self.target_shape.height,
            fields_x: self.target_shape.width,
        }
    }

    /// Formula-based motion cost at this network's target geometry.
    pub fn motion_formulas(&self) -> MotionOps {
        MotionOps::from_formulas(
            &self.geometry,
            &self.search,
            (self.target_shape.height, self.target_shape.width),
        )
    }

    fn layer_cost(&self, range: std::ops::Range<usize>) -> (f64, f64) {
        self.cost_table[range]
            .iter()
            .fold((0.0, 0.0), |(e, l), c| (e + c.energy_mj, l + c.latency_ms))
    }
}

/// Result of [`process_frame`].
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub output: Tensor3,
    /// The (dequantized) target activation fed to the suffix.
    pub target_activation: Tensor3,
    pub decision: FrameDecision,
    pub state: PipelineState,
    pub metrics: FrameMetrics,
}

/// Runs one frame: motion estimation against the stored key frame (if any),
/// the key-frame decision, then either the full network or a warped (or
/// memoized) target activation through the suffix.
pub fn process_frame(
    frame: &InputFrame,
    state: Option<&PipelineState>,
    prepared: &PreparedNetwork,
    policy: &KeyFramePolicy,
) -> Result<FrameResult> {
    let net = &prepared.net;
    if frame.pixels.shape() != net.input_shape {
        return Err(shape_mismatch(net.input_shape, frame.pixels.shape()));
    }
    if frame.luma.dims() != (net.input_shape.height, net.input_shape.width) {
        return Err(shape_mismatch(
            format!("{}x{} luma", net.input_shape.height, net.input_shape.width),
            format!("{}x{}", frame.luma.height(), frame.luma.width()),
        ));
    }
    if let Some(s) = state {
        if s.key_activation.shape() != prepared.target_shape {
            return Err(Error::CorruptedState(format!(
                "stored activation is {}, target layer produces {}",
                s.key_activation.shape(),
                prepared.target_shape
            )));
        }
        if s.key_frame.dims() != frame.luma.dims() {
            return Err(Error::CorruptedState(
                "stored key frame has different dims".into(),
            ));
        }
    }

    let vectors = state
        .map(|s| {
            rfbme_on_grid(
                &frame.luma,
                &s.key_frame,
                &s.geometry,
                &s.search,
                prepared.grid(),
            )
        })
        .transpose()?;
    let is_key = decide(vectors.as_ref(), policy, state.map(|s| s.frames_since_key));
    let metric_value = vectors.as_ref().map_or(0.0, |mv| policy.metric(mv));
    let motion_ops = vectors.as_ref().map_or(0, |mv| mv.ops);
    let (aggregate_error, total_magnitude) = vectors
        .as_ref()
        .map_or((0.0, 0.0), |mv| (mv.aggregate_error, mv.total_magnitude));
    let params = &prepared.config.cost_params;

    let (target_activation, new_state, mut metrics) = if is_key {
        let activation = quantize(&net.run_prefix(&frame.pixels)?);
        let key_activation = rle_encode(&activation, prepared.config.zero_epsilon);
        let stored = rle_decode(&key_activation);
        let (energy, latency) = prepared.layer_cost(0..net.layers.len());
        let state = PipelineState {
            key_frame: frame.luma.clone(),
            key_activation,
            frames_since_key: 0,
            geometry: prepared.geometry,
            search: prepared.search,
        };
        let metrics = FrameMetrics {
            prefix_macs: prepared.prefix_macs,
            suffix_macs: prepared.suffix_macs,
            motion_ops,
            warp_elements: 0,
            aggregate_error,
            total_magnitude,
            energy_mj: energy,
            latency_ms: latency,
        };
        (stored, state, metrics)
    } else {
        let s = state.expect("predicted frames always have state");
        let mv = vectors.as_ref().expect("motion runs whenever state exists");
        let (activation, warp_elements) = if net.memoization_only {
            (rle_decode(&s.key_activation), 0)
        } else {
            let field = scale_vector_field(
                mv,
                s.geometry.stride,
                (prepared.target_shape.height, prepared.target_shape.width),
            )?;
            (
                warp(&s.key_activation, &field, prepared.config.border)?,
                prepared.target_shape.len() as u64,
            )
        };
        let (energy, latency) = prepared.layer_cost(net.target_layer + 1..net.layers.len());
        let state = PipelineState {
            frames_since_key: s.frames_since_key + 1,
            ..s.clone()
        };
        let metrics = FrameMetrics {
            prefix_macs: 0,
            suffix_macs: prepared.suffix_macs,
            motion_ops,
            warp_elements,
            aggregate_error,
            total_magnitude,
            energy_mj: energy
                + motion_ops as f64 * params.motion_op_energy_mj
                + warp_elements as f64 * params.warp_energy_per_element_mj,
            latency_ms: latency
                + motion_ops as f64 * params.motion_op_latency_ms
                + warp_elements as f64 * params.warp_latency_per_element_ms,
        };
        (activation, state, metrics)
    };

    // key frames still pay for the motion search that informed the decision
    if is_key && motion_ops > 0 {
        metrics.energy_mj += motion_ops as f64 * params.motion_op_energy_mj;
        metrics.latency_ms += motion_ops as f64 * params.motion_op_latency_ms;
    }

    let output = net.run_suffix(&target_activation)?;
    Ok(FrameResult {
        output,
        target_activation,
        decision: FrameDecision {
            is_key,
            metric_value,
            vectors,
        },
        state: new_state,
        metrics,
    })
}

/// Stateful wrapper around [`process_frame`].
#[derive(Debug, Clone)]
pub struct Pipeline {
    prepared: PreparedNetwork,
    policy: KeyFramePolicy,
    state: Option<PipelineState>,
}

impl Pipeline {
    pub fn new(
        net: NetworkDescriptor,
        policy: KeyFramePolicy,
        config: PipelineConfig,
    ) -> Result<Self> {
        policy.validate()?;
        Ok(Self {
            prepared: PreparedNetwork::new(net, config)?,
            policy,
            state: None,
        })
    }

    pub fn prepared(&self) -> &PreparedNetwork {
        &self.prepared
    }

    pub fn state(&self) -> Option<&PipelineState> {
        self.state.as_ref()
    }

    pub fn process(&mut self, frame: &InputFrame) -> Result<FrameResult> {
        let result = process_frame(frame, self.state.as_ref(), &self.prepared, &self.policy)?;
        self.state = Some(result.state.clone());
        Ok(result)
    }
}

/// Per-frame record of a stream run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: usize,
    pub is_key: bool,
    pub metric_value: f64,
    #[serde(flatten)]
    pub metrics: FrameMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    pub frames: Vec<FrameRecord>,
    pub key_frames: usize,
    pub key_fraction: f64,
    /// Mean measured cost over all frames.
    pub avg_energy_mj: f64,
    pub avg_latency_ms: f64,
    /// Mean measured cost over predicted frames (0 if there were none).
    pub pred_energy_mj: f64,
    pub pred_latency_ms: f64,
    /// Cost of a full execution of every frame.
    pub orig_energy_mj: f64,
    pub orig_latency_ms: f64,
    /// Formula-based estimate at the observed key fraction.
    pub model: CostReport,
}

impl StreamReport {
    pub fn from_records(frames: Vec<FrameRecord>, prepared: &PreparedNetwork) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidPolicy("empty frame stream".into()));
        }
        let n = frames.len() as f64;
        let key_frames = frames.iter().filter(|r| r.is_key).count();
        let key_fraction = key_frames as f64 / n;
        let preds: Vec<_> = frames.iter().filter(|r| !r.is_key).collect();
        let mean = |xs: &mut dyn Iterator<Item = f64>, count: usize| {
            if count == 0 {
                0.0
            } else {
                xs.sum::<f64>() / count as f64
            }
        };
        let model = frame_costs(
            &prepared.cost_table,
            &prepared.net,
            key_fraction,
            prepared.motion_formulas(),
            &prepared.config.cost_params,
        )?;
        Ok(Self {
            avg_energy_mj: mean(
                &mut frames.iter().map(|r| r.metrics.energy_mj),
                frames.len(),
            ),
            avg_latency_ms: mean(
                &mut frames.iter().map(|r| r.metrics.latency_ms),
                frames.len(),
            ),
            pred_energy_mj: mean(&mut preds.iter().map(|r| r.metrics.energy_mj), preds.len()),
            pred_latency_ms: mean(&mut preds.iter().map(|r| r.metrics.latency_ms), preds.len()),
            orig_energy_mj: model.key_energy,
            orig_latency_ms: model.key_latency,
            frames,
            key_frames,
            key_fraction,
            model,
        })
    }
}

/// Folds [`process_frame`] over a stream, calling `observe` with each
/// frame's result.
pub fn run_stream_with<'a>(
    frames: impl IntoIterator<Item = &'a InputFrame>,
    net: &NetworkDescriptor,
    policy: &KeyFramePolicy,
    config: &PipelineConfig,
    mut observe: impl FnMut(usize, &FrameResult) -> Result<()>,
) -> Result<StreamReport> {
    let mut pipeline = Pipeline::new(net.clone(), *policy, config.clone())?;
    let mut records = Vec::new();
    for (i, frame) in frames.into_iter().enumerate() {
        let r = pipeline.process(frame)?;
        observe(i, &r)?;
        records.push(FrameRecord {
            frame_index: i,
            is_key: r.decision.is_key,
            metric_value: r.decision.metric_value,
            metrics: r.metrics,
        });
    }
    StreamReport::from_records(records, pipeline.prepared())
}

pub fn run_stream(
    frames: &[InputFrame],
    net: &NetworkDescriptor,
    policy: &KeyFramePolicy,
    config: &PipelineConfig,
) -> Result<StreamReport> {
    run_stream_with(frames, net, policy, config, |_, _| Ok(()))
}
