use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amc::io::{read_pnm, write_pgm};
use amc::motion::{exhaustive_bme, rfbme, Frame, MotionVectorField};
use amc::ReceptiveFieldGeometry;
use anyhow::{bail, Context};
use clap::Args;
use serde_json::json;

use crate::SearchArgs;

#[derive(Args)]
pub struct FlowArgs {
    #[arg(long)]
    current: PathBuf,
    #[arg(long)]
    key: PathBuf,
    /// Receptive-field size in pixels.
    #[arg(long = "rf-size")]
    rf_size: usize,
    /// Receptive-field stride in pixels; also the tile size.
    #[arg(long = "rf-stride")]
    rf_stride: usize,
    /// Pixel position of the first field's top-left corner (may be negative).
    #[arg(long = "rf-offset", default_value_t = 0, allow_hyphen_values = true)]
    rf_offset: isize,
    #[command(flatten)]
    search: SearchArgs,
    /// Also run the exhaustive matcher and fail if it disagrees.
    #[arg(long = "check-oracle")]
    check_oracle: bool,
    /// Write a per-field vector magnitude map here.
    #[arg(long)]
    pgm: Option<PathBuf>,
}

fn load_luma(path: &Path) -> anyhow::Result<Frame> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let img = read_pnm(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
    Ok(img.into_input_frame(1)?.luma)
}

/// One pixel per field, magnitudes scaled so the largest is 255.
pub fn magnitude_map(mv: &MotionVectorField) -> Vec<u8> {
    let mags: Vec<f64> = mv
        .vectors
        .iter()
        .map(|&(dy, dx)| ((dy * dy + dx * dx) as f64).sqrt())
        .collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    mags.iter()
        .map(|&m| {
            if max > 0.0 {
                (m * 255.0 / max).round() as u8
            } else {
                0
            }
        })
        .collect()
}

pub fn run(args: FlowArgs) -> anyhow::Result<ExitCode> {
    let current = load_luma(&args.current)?;
    let key = load_luma(&args.key)?;
    if args.rf_size == 0 || args.rf_stride == 0 {
        bail!("--rf-size and --rf-stride must be >= 1");
    }
    let geometry = ReceptiveFieldGeometry::new(args.rf_size, args.rf_stride, args.rf_offset);
    let search = args.search.resolve(args.rf_stride)?;
    let mv = rfbme(&current, &key, &geometry, &search)?;

    let mut out = json!({ "geometry": geometry, "search": search, "field": mv });
    let mut agree = true;
    if args.check_oracle {
        let oracle = exhaustive_bme(&current, &key, &geometry, &search)?;
        agree = oracle.vectors == mv.vectors && oracle.min_sad == mv.min_sad;
        out["oracle"] = json!({
            "agrees": agree,
            "rfbme_ops": mv.ops,
            "exhaustive_ops": oracle.ops,
        });
    }
    if let Some(p) = &args.pgm {
        let mut w =
            BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
        write_pgm(&mut w, mv.fields_y, mv.fields_x, &magnitude_map(&mv))?;
        w.flush()?;
    }
    println!("{}", serde_json::to_string(&out)?);
    if !agree {
        bail!("block matcher disagrees with the exhaustive oracle");
    }
    Ok(ExitCode::SUCCESS)
}
