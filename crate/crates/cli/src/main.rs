//! `pansharp`: simulate reduced-resolution datasets, fuse them and score the
//! results.

mod eval;
mod fuse;
mod manifest;
mod simulate;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pansharp", version, about = "Nonlocal variational pansharpening toolkit")]
struct Cli {
    /// Worker threads; outputs are identical for every value.
    #[arg(long, global = true, env = "PANSHARP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Degrade a reference image into panchromatic and low-resolution bands.
    Simulate(simulate::SimulateArgs),
    /// Fuse a panchromatic with low-resolution bands.
    Fuse(fuse::FuseArgs),
    /// Score fused images with full-reference and/or no-reference indices.
    Eval(eval::EvalArgs),
    /// Print the nonlocal weights of one pixel as CSV.
    WeightsDump(WeightsDumpArgs),
}

#[derive(Debug, Args)]
struct WeightsDumpArgs {
    #[arg(long)]
    pan: PathBuf,
    /// Column of the pixel.
    #[arg(long)]
    x: usize,
    /// Row of the pixel.
    #[arg(long)]
    y: usize,
    #[arg(long, default_value_t = 3)]
    search_radius: usize,
    #[arg(long, default_value_t = 1)]
    patch_radius: usize,
    #[arg(long, default_value_t = 1.25)]
    h: f64,
    #[arg(long, value_enum, default_value_t = SelfWeight::MaxThenNormalize)]
    self_weight: SelfWeight,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelfWeight {
    MaxThenNormalize,
    NormalizeThenMax,
}

impl From<SelfWeight> for pansharp::weights::SelfWeightRule {
    fn from(s: SelfWeight) -> Self {
        match s {
            SelfWeight::MaxThenNormalize => pansharp::weights::SelfWeightRule::MaxThenNormalize,
            SelfWeight::NormalizeThenMax => pansharp::weights::SelfWeightRule::NormalizeThenMax,
        }
    }
}

fn weights_dump(args: &WeightsDumpArgs) -> Result<()> {
    let pan = fuse::read_pan(&args.pan)?;
    let cfg = pansharp::weights::NonlocalConfig {
        search_radius: args.search_radius,
        patch_radius: args.patch_radius,
        h: args.h,
        self_weight: args.self_weight.into(),
    };
    if args.x >= pan.width() || args.y >= pan.height() {
        bail!("pixel ({}, {}) lies outside the {} panchromatic", args.x, args.y, pan.grid());
    }
    let weights = pansharp::weights::compute_weights(&pan, &cfg)?;
    let csv = weights.window_csv(args.y, args.x)?;
    match &args.out {
        Some(path) => std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| match &cli.command {
        Command::Simulate(args) => simulate::run(args),
        Command::Fuse(args) => fuse::run(args),
        Command::Eval(args) => eval::run(args),
        Command::WeightsDump(args) => weights_dump(args),
    })
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        super::Cli::command().debug_assert();
    }
}
