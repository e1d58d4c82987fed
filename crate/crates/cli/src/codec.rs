use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use amc::activation::{rle_encode_raw, SparseActivation};
use amc::io::{read_dense, write_dense};
use anyhow::Context;
use clap::Subcommand;

#[derive(Subcommand)]
pub enum CodecAction {
    /// Dense `EVAD` file to sparse `EVA2` file.
    Encode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Values with magnitude at or below this are stored as zero.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Sparse `EVA2` file to dense `EVAD` file.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
}

pub fn run(action: CodecAction) -> anyhow::Result<ExitCode> {
    match action {
        CodecAction::Encode {
            input,
            output,
            epsilon,
        } => {
            let f = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let (shape, values) = read_dense(BufReader::new(f))
                .with_context(|| format!("reading {}", input.display()))?;
            let sparse = rle_encode_raw(shape, &values, epsilon)?;
            let mut w = BufWriter::new(File::create(&output)?);
            sparse.write_to(&mut w)?;
            w.flush()?;
        }
        CodecAction::Decode { input, output } => {
            let bytes =
                std::fs::read(&input).with_context(|| format!("opening {}", input.display()))?;
            let sparse = SparseActivation::from_bytes(&bytes)
                .with_context(|| format!("reading {}", input.display()))?;
            let mut w = BufWriter::new(File::create(&output)?);
            write_dense(&mut w, sparse.shape(), &sparse.decode_raw())?;
            w.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
