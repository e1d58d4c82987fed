use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amc::activation::{rle_encode, BorderPolicy};
use amc::controller::{FrameRecord, KeyFramePolicy, Pipeline, PipelineConfig, StreamReport};
use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::{CostArgs, SearchArgs};

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    net: PathBuf,
    /// Directory of .pgm/.ppm frames, processed in filename order.
    #[arg(long)]
    frames: PathBuf,
    /// static:N, error:THETA, motion:THETA or always.
    #[arg(long)]
    policy: KeyFramePolicy,
    #[command(flatten)]
    search: SearchArgs,
    /// JSON Lines output file.
    #[arg(long)]
    out: PathBuf,
    /// Reuse the key activation unchanged instead of warping it.
    #[arg(long)]
    memoize: bool,
    /// Write each frame's motion field to `<out>.flow/`.
    #[arg(long = "dump-flow")]
    dump_flow: bool,
    /// Write each predicted target activation to `<out>.activations/`.
    #[arg(long = "dump-activations")]
    dump_activations: bool,
    #[command(flatten)]
    cost: CostArgs,
    /// Annotate records with timestamps at this frame rate.
    #[arg(long)]
    fps: Option<f64>,
    /// Zero threshold when compressing key activations.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = Border::Clamp)]
    border: Border,
}

#[derive(Clone, Copy, ValueEnum)]
enum Border {
    Clamp,
    Zero,
}

#[derive(Serialize)]
struct Record {
    #[serde(rename = "type")]
    kind: &'static str,
    frame_index: usize,
    file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp_s: Option<f64>,
    is_key: bool,
    metric_value: f64,
    aggregate_error: f64,
    total_magnitude: f64,
    estimated_energy_mj: f64,
    estimated_latency_ms: f64,
    prefix_macs: u64,
    suffix_macs: u64,
    motion_ops: u64,
    warp_elements: u64,
}

#[derive(Serialize)]
struct Summary<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    frames: usize,
    key_frames: usize,
    key_fraction: f64,
    avg_energy_mj: f64,
    avg_latency_ms: f64,
    orig_energy_mj: f64,
    orig_latency_ms: f64,
    pred_energy_mj: f64,
    pred_latency_ms: f64,
    default_cost_layers: usize,
    policy: String,
    model: &'a amc::cost::CostReport,
}

pub fn list_frames(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut frames = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("pgm" | "ppm")) {
            frames.push(path);
        }
    }
    frames.sort();
    Ok(frames)
}

fn dump_dir(out: &Path, suffix: &str) -> anyhow::Result<PathBuf> {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    let dir = PathBuf::from(name);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let net = amc::io::load_descriptor(&args.net)
        .with_context(|| format!("loading {}", args.net.display()))?;
    let memoize = net.memoization_only || args.memoize;
    let net = net.with_memoization(memoize);
    let geometry = net.target_geometry()?;
    let config = PipelineConfig {
        search: Some(args.search.resolve(geometry.stride)?),
        border: match args.border {
            Border::Clamp => BorderPolicy::ClampToEdge,
            Border::Zero => BorderPolicy::Zero,
        },
        zero_epsilon: args.epsilon,
        cost_overrides: args.cost.load()?,
        ..PipelineConfig::default()
    };
    let channels = net.input_shape.channels;
    let mut pipeline = Pipeline::new(net, args.policy, config)?;

    let frames = list_frames(&args.frames)?;
    if frames.is_empty() {
        bail!("no .pgm or .ppm frames in {}", args.frames.display());
    }
    let flow_dir = args
        .dump_flow
        .then(|| dump_dir(&args.out, ".flow"))
        .transpose()?;
    let act_dir = args
        .dump_activations
        .then(|| dump_dir(&args.out, ".activations"))
        .transpose()?;

    let mut out = BufWriter::new(
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?,
    );
    let mut records = Vec::with_capacity(frames.len());
    for (i, path) in frames.iter().enumerate() {
        let frame = amc::io::load_frame(path, channels)?;
        let r = pipeline
            .process(&frame)
            .with_context(|| format!("processing {}", path.display()))?;
        let m = r.metrics;
        let record = Record {
            kind: "frame",
            frame_index: i,
            file: path
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
            timestamp_s: args.fps.map(|fps| i as f64 / fps),
            is_key: r.decision.is_key,
            metric_value: r.decision.metric_value,
            aggregate_error: m.aggregate_error,
            total_magnitude: m.total_magnitude,
            estimated_energy_mj: m.energy_mj,
            estimated_latency_ms: m.latency_ms,
            prefix_macs: m.prefix_macs,
            suffix_macs: m.suffix_macs,
            motion_ops: m.motion_ops,
            warp_elements: m.warp_elements,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;

        if let (Some(dir), Some(mv)) = (&flow_dir, &r.decision.vectors) {
            std::fs::write(dir.join(format!("{i:06}.json")), serde_json::to_vec(mv)?)?;
        }
        if let (Some(dir), false) = (&act_dir, r.decision.is_key) {
            let sparse = rle_encode(&r.target_activation, 0.0);
            std::fs::write(dir.join(format!("{i:06}.eva2")), sparse.to_bytes())?;
        }
        records.push(FrameRecord {
            frame_index: i,
            is_key: r.decision.is_key,
            metric_value: r.decision.metric_value,
            metrics: m,
        });
    }

    let report = StreamReport::from_records(records, pipeline.prepared())?;
    let summary = Summary {
        kind: "summary",
        frames: report.frames.len(),
        key_frames: report.key_frames,
        key_fraction: report.key_fraction,
        avg_energy_mj: report.avg_energy_mj,
        avg_latency_ms: report.avg_latency_ms,
        orig_energy_mj: report.orig_energy_mj,
        orig_latency_ms: report.orig_latency_ms,
        pred_energy_mj: report.pred_energy_mj,
        pred_latency_ms: report.pred_latency_ms,
        default_cost_layers: pipeline.prepared().default_cost_layers,
        policy: args.policy.to_string(),
        model: &report.model,
    };
    serde_json::to_writer(&mut out, &summary)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}
