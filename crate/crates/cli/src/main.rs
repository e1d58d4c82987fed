//! `amc`: run the activation motion compensation pipeline over frame
//! directories, estimate costs, and poke at the codec and motion estimator.

mod codec;
mod estimate;
mod flow;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "amc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process a directory of PGM/PPM frames and write JSON Lines records.
    Run(run::RunArgs),
    /// Print MAC, motion-op and per-frame cost estimates for a network.
    Estimate(estimate::EstimateArgs),
    /// Convert between dense Q8.8 tensors and the sparse activation format.
    Codec {
        #[command(subcommand)]
        action: codec::CodecAction,
    },
    /// Estimate receptive-field motion between two PGM frames.
    Flow(flow::FlowArgs),
}

/// Block-matching search window, in pixels.
#[derive(Args, Debug, Clone, Copy)]
pub struct SearchArgs {
    /// Search radius; defaults to three receptive-field strides.
    #[arg(long)]
    pub radius: Option<usize>,
    /// Step between searched offsets; defaults to the receptive-field stride.
    #[arg(long = "search-stride")]
    pub search_stride: Option<usize>,
}

impl SearchArgs {
    pub fn resolve(&self, tile: usize) -> amc::Result<amc::motion::SearchParams> {
        let d = amc::motion::SearchParams::default_for_tile(tile);
        amc::motion::SearchParams::new(
            self.radius.unwrap_or(d.radius),
            self.search_stride.unwrap_or(d.stride),
        )
    }
}

#[derive(Args, Debug, Clone)]
pub struct CostArgs {
    /// JSON array of {layer_index, energy_mj, latency_ms}.
    #[arg(long = "cost-table")]
    pub cost_table: Option<PathBuf>,
}

impl CostArgs {
    pub fn load(&self) -> anyhow::Result<Vec<amc::cost::LayerCostOverride>> {
        use anyhow::Context;
        match &self.cost_table {
            Some(p) => amc::io::load_cost_table(p)
                .with_context(|| format!("reading cost table {}", p.display())),
            None => Ok(Vec::new()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run::run(args),
        Command::Estimate(args) => estimate::run(args),
        Command::Codec { action } => codec::run(action),
        Command::Flow(args) => flow::run(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("amc: {e:#}");
            ExitCode::FAILURE
        }
    }
}
