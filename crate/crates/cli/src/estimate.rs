use std::path::PathBuf;
use std::process::ExitCode;

use amc::controller::{PipelineConfig, PreparedNetwork};
use amc::cost::frame_costs;
use amc::Shape3;
use anyhow::Context;
use clap::Args;
use serde_json::json;

use crate::{CostArgs, SearchArgs};

#[derive(Args)]
pub struct EstimateArgs {
    #[arg(long)]
    net: PathBuf,
    /// Input width; defaults to the descriptor's.
    #[arg(long)]
    width: Option<usize>,
    /// Input height; defaults to the descriptor's.
    #[arg(long)]
    height: Option<usize>,
    /// Fraction of key frames used for the averaged cost.
    #[arg(long = "key-fraction", default_value_t = 1.0)]
    key_fraction: f64,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    cost: CostArgs,
}

pub fn run(args: EstimateArgs) -> anyhow::Result<ExitCode> {
    let mut net = amc::io::load_descriptor(&args.net)
        .with_context(|| format!("loading {}", args.net.display()))?;
    let s = net.input_shape;
    net.input_shape = Shape3::new(
        s.channels,
        args.height.unwrap_or(s.height),
        args.width.unwrap_or(s.width),
    );
    let geometry = net.target_geometry()?;
    let config = PipelineConfig {
        search: Some(args.search.resolve(geometry.stride)?),
        cost_overrides: args.cost.load()?,
        ..PipelineConfig::default()
    };
    let prepared = PreparedNetwork::new(net, config)?;
    let report = frame_costs(
        &prepared.cost_table,
        &prepared.net,
        args.key_fraction,
        prepared.motion_formulas(),
        &prepared.config.cost_params,
    )?;
    let note = if prepared.default_cost_layers == 0 {
        "all layer costs from the cost table".to_string()
    } else {
        format!(
            "{} of {} layers use the MAC-proportional default cost",
            prepared.default_cost_layers,
            prepared.net.layers.len()
        )
    };
    let out = json!({
        "input_shape": prepared.net.input_shape,
        "target_layer": prepared.net.target_layer,
        "target_shape": prepared.target_shape,
        "geometry": prepared.geometry,
        "search": prepared.search,
        "prefix_macs": report.prefix_macs,
        "suffix_macs": report.suffix_macs,
        "unoptimized_ops": report.unoptimized_ops,
        "rfbme_ops": report.rfbme_ops,
        "frame_costs": report,
        "default_cost_layers": prepared.default_cost_layers,
        "note": note,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}
