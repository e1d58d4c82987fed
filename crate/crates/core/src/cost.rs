//! First-order cost model: MAC counts for the network, add counts for
//! motion estimation, and per-frame energy/latency estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ReceptiveFieldGeometry;
use crate::layer::{LayerKind, LayerSpec};
use crate::motion::SearchParams;
use crate::network::NetworkDescriptor;
use crate::tensor::Shape3;

/// Multiply-accumulates for one layer on an input of shape `input`:
/// outputs × (in channels × kernel height × kernel width). Zero for pooling
/// and ReLU.
pub fn layer_macs(layer: &LayerSpec, input: Shape3) -> Result<u64> {
    match layer.kind {
        LayerKind::Conv | LayerKind::Fc => {
            let out = layer.output_shape(input)?;
            let per_output = layer.in_channels * layer.kernel.0 * layer.kernel.1;
            Ok(out.len() as u64 * per_output as u64)
        }
        LayerKind::MaxPool | LayerKind::Relu => Ok(0),
    }
}

/// MACs of every layer with dims propagated from `input`.
pub fn per_layer_macs(net: &NetworkDescriptor, input: Shape3) -> Result<Vec<u64>> {
    let shapes = net.layer_shapes_for(input)?;
    net.layers
        .iter()
        .enumerate()
        .map(|(i, layer)| layer_macs(layer, if i == 0 { input } else { shapes[i - 1] }))
        .collect()
}

pub fn prefix_macs(net: &NetworkDescriptor, input: Shape3) -> Result<u64> {
    Ok(per_layer_macs(net, input)?[..=net.target_layer]
        .iter()
        .sum())
}

pub fn suffix_macs(net: &NetworkDescriptor, input: Shape3) -> Result<u64> {
    Ok(per_layer_macs(net, input)?[net.target_layer + 1..]
        .iter()
        .sum())
}

/// Adds for block matching without tile reuse:
/// `W·H · (2·radius / search_stride)² · size²`, where `map_dims = (H, W)` is
/// the target activation's spatial size.
///
/// With `radius = 0` this is 0 even though one offset is still evaluated;
/// the value is kept as the formula gives it.
pub fn unoptimized_ops(
    geometry: &ReceptiveFieldGeometry,
    search: &SearchParams,
    map_dims: (usize, usize),
) -> u64 {
    let fields = (map_dims.0 * map_dims.1) as u128;
    let steps = search.steps() as u128;
    let size = geometry.size as u128;
    (fields * steps * steps * size * size) as u64
}

/// Adds for block matching with tile reuse:
/// `unoptimized / stride² + W·H · (size / stride)²`, rounded up.
pub fn rfbme_ops(
    geometry: &ReceptiveFieldGeometry,
    search: &SearchParams,
    map_dims: (usize, usize),
) -> u64 {
    let fields = (map_dims.0 * map_dims.1) as u128;
    let steps = search.steps() as u128;
    let size = geometry.size as u128;
    let s2 = (geometry.stride * geometry.stride) as u128;
    // both terms share the denominator stride²
    let numerator = fields * size * size * (steps * steps + 1);
    numerator.div_ceil(s2) as u64
}

/// Unit costs for the MAC-proportional default table and the predicted-frame
/// overheads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub energy_per_mac_mj: f64,
    pub latency_per_mac_ms: f64,
    /// Per output element of ReLU and pooling layers.
    pub elementwise_energy_mj: f64,
    pub elementwise_latency_ms: f64,
    /// Per motion-estimation add/subtract.
    pub motion_op_energy_mj: f64,
    pub motion_op_latency_ms: f64,
    /// Per warped target-activation element.
    pub warp_energy_per_element_mj: f64,
    pub warp_latency_per_element_ms: f64,
}

impl Default for CostParams {
    /// 1 pJ and 1 ps per MAC (a 1 TMAC/s accelerator), a tenth of that per
    /// motion add, and four MAC-equivalents per warped element.
    fn default() -> Self {
        Self {
            energy_per_mac_mj: 1e-9,
            latency_per_mac_ms: 1e-9,
            elementwise_energy_mj: 0.0,
            elementwise_latency_ms: 0.0,
            motion_op_energy_mj: 1e-10,
            motion_op_latency_ms: 1e-10,
            warp_energy_per_element_mj: 4e-9,
            warp_latency_per_element_ms: 4e-9,
        }
    }
}

impl CostParams {
    /// Only layer costs; motion estimation and warping are free.
    pub fn layers_only(energy_per_mac_mj: f64, latency_per_mac_ms: f64) -> Self {
        Self {
            energy_per_mac_mj,
            latency_per_mac_ms,
            elementwise_energy_mj: 0.0,
            elementwise_latency_ms: 0.0,
            motion_op_energy_mj: 0.0,
            motion_op_latency_ms: 0.0,
            warp_energy_per_element_mj: 0.0,
            warp_latency_per_element_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerCostEntry {
    pub layer_index: usize,
    pub macs: u64,
    pub energy_mj: f64,
    pub latency_ms: f64,
}

/// One entry of a user cost table file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerCostOverride {
    pub layer_index: usize,
    pub energy_mj: f64,
    pub latency_ms: f64,
}

/// Per-layer costs for `net` at `input`: user overrides where given,
/// MAC-proportional defaults elsewhere. Returns the table and the number of
/// layers that fell back to the default.
pub fn build_cost_table(
    net: &NetworkDescriptor,
    input: Shape3,
    params: &CostParams,
    overrides: &[LayerCostOverride],
) -> Result<(Vec<LayerCostEntry>, usize)> {
    for o in overrides {
        if o.layer_index >= net.layers.len() {
            return Err(Error::InvalidCost(format!(
                "cost table names layer {} but the network has {} layers",
                o.layer_index,
                net.layers.len()
            )));
        }
        if !(o.energy_mj >= 0.0 && o.latency_ms >= 0.0) {
            return Err(Error::InvalidCost(format!(
                "layer {}: energy and latency must be non-negative",
                o.layer_index
            )));
        }
    }
    let macs = per_layer_macs(net, input)?;
    let shapes = net.layer_shapes_for(input)?;
    let mut defaults = 0;
    let table = macs
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            if let Some(o) = overrides.iter().rev().find(|o| o.layer_index == i) {
                return LayerCostEntry {
                    layer_index: i,
                    macs: m,
                    energy_mj: o.energy_mj,
                    latency_ms: o.latency_ms,
                };
            }
            defaults += 1;
            let (energy_mj, latency_ms) = match net.layers[i].kind {
                LayerKind::Conv | LayerKind::Fc => (
                    m as f64 * params.energy_per_mac_mj,
                    m as f64 * params.latency_per_mac_ms,
                ),
                LayerKind::MaxPool | LayerKind::Relu => {
                    let n = shapes[i].len() as f64;
                    (
                        n * params.elementwise_energy_mj,
                        n * params.elementwise_latency_ms,
                    )
                }
            };
            LayerCostEntry {
                layer_index: i,
                macs: m,
                energy_mj,
                latency_ms,
            }
        })
        .collect();
    Ok((table, defaults))
}

/// Motion-estimation add counts that feed a predicted frame's cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MotionOps {
    pub unoptimized: u64,
    pub rfbme: u64,
}

impl MotionOps {
    pub fn from_formulas(
        geometry: &ReceptiveFieldGeometry,
        search: &SearchParams,
        map_dims: (usize, usize),
    ) -> Self {
        Self {
            unoptimized: unoptimized_ops(geometry, search, map_dims),
            rfbme: rfbme_ops(geometry, search, map_dims),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub prefix_macs: u64,
    pub suffix_macs: u64,
    pub unoptimized_ops: u64,
    pub rfbme_ops: u64,
    pub key_energy: f64,
    pub pred_energy: f64,
    pub avg_energy: f64,
    pub key_latency: f64,
    pub pred_latency: f64,
    pub avg_latency: f64,
    pub key_fraction: f64,
}

/// `key_fraction · key + (1 − key_fraction) · pred`.
pub fn average_cost(key: f64, pred: f64, key_fraction: f64) -> f64 {
    key_fraction * key + (1.0 - key_fraction) * pred
}

/// Predicted-frame cost implied by an observed average:
/// `(avg − key_fraction · key) / (1 − key_fraction)`.
pub fn solve_predicted_cost(key: f64, avg: f64, key_fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&key_fraction) {
        return Err(Error::InvalidCost(format!(
            "key fraction {key_fraction} leaves no predicted frames"
        )));
    }
    Ok((avg - key_fraction * key) / (1.0 - key_fraction))
}

/// Costs of key and predicted frames, and their mix at `key_fraction`.
///
/// A key frame pays for every layer. A predicted frame pays for the suffix,
/// `motion.rfbme` motion-estimation adds, and one warp per target activation
/// element.
pub fn frame_costs(
    table: &[LayerCostEntry],
    net: &NetworkDescriptor,
    key_fraction: f64,
    motion: MotionOps,
    params: &CostParams,
) -> Result<CostReport> {
    if !(0.0..=1.0).contains(&key_fraction) {
        return Err(Error::InvalidCost(format!(
            "key fraction {key_fraction} outside [0, 1]"
        )));
    }
    if table.len() != net.layers.len() || table.iter().enumerate().any(|(i, e)| e.layer_index != i)
    {
        return Err(Error::InvalidCost(format!(
            "cost table must list layers 0..{} in order",
            net.layers.len()
        )));
    }
    let target_elems = net.target_shape()?.len() as f64;
    let (prefix, suffix) = table.split_at(net.target_layer + 1);
    let sum = |entries: &[LayerCostEntry]| {
        entries
            .iter()
            .fold((0.0, 0.0), |(e, l), c| (e + c.energy_mj, l + c.latency_ms))
    };
    let (prefix_energy, prefix_latency) = sum(prefix);
    let (suffix_energy, suffix_latency) = sum(suffix);

    let key_energy = prefix_energy + suffix_energy;
    let key_latency = prefix_latency + suffix_latency;
    let pred_energy = suffix_energy
        + motion.rfbme as f64 * params.motion_op_energy_mj
        + target_elems * params.warp_energy_per_element_mj;
    let pred_latency = suffix_latency
        + motion.rfbme as f64 * params.motion_op_latency_ms
        + target_elems * params.warp_latency_per_element_ms;

    Ok(CostReport {
        prefix_macs: prefix.iter().map(|e| e.macs).sum(),
        suffix_macs: suffix.iter().map(|e| e.macs).sum(),
        unoptimized_ops: motion.unoptimized,
        rfbme_ops: motion.rfbme,
        key_energy,
        pred_energy,
        avg_energy: average_cost(key_energy, pred_energy, key_fraction),
        key_latency,
        pred_latency,
        avg_latency: average_cost(key_latency, pred_latency, key_fraction),
        key_fraction,
    })
}
