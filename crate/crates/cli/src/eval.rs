use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use pansharp::io::{read_image, write_image, ImageFormat};
use pansharp::metrics::{MetricReport, NoReferenceReport};
use pansharp::raster::difference_visualization;
use pansharp::sampling::{BlurSpec, SamplingSpec};
use pansharp::MultispectralImage;

use crate::fuse::read_pan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Full,
    NoReference,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground truth for the full-reference indices.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// One or more fused images to score.
    #[arg(long, num_args = 1.., required = true)]
    pub fused: Vec<PathBuf>,
    /// Row labels, one per fused image; defaults to the file stems.
    #[arg(long, num_args = 1..)]
    pub names: Vec<String>,
    #[arg(long, default_value_t = 4)]
    pub factor: usize,
    /// Panchromatic for the no-reference indices.
    #[arg(long)]
    pub pan: Option<PathBuf>,
    /// Low-resolution bands for the no-reference indices.
    #[arg(long)]
    pub lowres: Option<PathBuf>,
    /// Sensor blur used to low-pass the panchromatic.
    #[arg(long, default_value_t = 1.3)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = Mode::Full)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write a difference image (fused minus truth) of the first fused input.
    #[arg(long)]
    pub diff_ppm: Option<PathBuf>,
    /// Write the table to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Row {
    method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    full: Option<MetricReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    no_reference: Option<NoReferenceReport>,
}

fn load(path: &Path) -> Result<MultispectralImage> {
    read_image(path).with_context(|| format!("reading {}", path.display()))
}

fn usage_error(msg: &str) -> ! {
    use clap::CommandFactory;
    let mut cmd = crate::Cli::command();
    cmd.error(clap::error::ErrorKind::MissingRequiredArgument, msg).exit()
}

fn csv(rows: &[Row], mode: Mode) -> String {
    let mut text = String::new();
    let full = mode != Mode::NoReference;
    let noref = mode != Mode::Full;
    text.push_str("method");
    if full {
        text.push_str(",rmse,ergas,sam,ssim,q2n");
    }
    if noref {
        text.push_str(",d_lambda,d_s,qnr");
    }
    text.push('\n');
    for row in rows {
        text.push_str(&row.method);
        if let Some(m) = &row.full {
            let _ = write!(text, ",{},{},{},{},{}", m.rmse, m.ergas, m.sam_degrees, m.ssim, m.q2n);
        }
        if let Some(n) = &row.no_reference {
            let _ = write!(text, ",{},{},{}", n.d_lambda, n.d_s, n.qnr);
        }
        text.push('\n');
    }
    text
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let full = args.mode != Mode::NoReference;
    let noref = args.mode != Mode::Full;
    if full && args.truth.is_none() {
        usage_error("--truth is required for full-reference scoring");
    }
    if noref && (args.pan.is_none() || args.lowres.is_none()) {
        usage_error("--pan and --lowres are required for no-reference scoring");
    }
    if !args.names.is_empty() && args.names.len() != args.fused.len() {
        bail!("{} names given for {} fused images", args.names.len(), args.fused.len());
    }

    let truth = args.truth.as_deref().map(load).transpose()?;
    let pan = args.pan.as_deref().map(read_pan).transpose()?;
    let lowres = args.lowres.as_deref().map(load).transpose()?;
    let blur = BlurSpec::gaussian(args.sigma)?;
    let sampling = SamplingSpec::new(args.factor)?;

    let mut rows = Vec::with_capacity(args.fused.len());
    for (i, path) in args.fused.iter().enumerate() {
        let fused = load(path)?;
        let method = match args.names.get(i) {
            Some(name) => name.clone(),
            None => path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned()),
        };
        let full = match (&truth, full) {
            (Some(t), true) => Some(MetricReport::compute(t, &fused, args.factor).with_context(|| format!("scoring {}", path.display()))?),
            _ => None,
        };
        let no_reference = match (&pan, &lowres, noref) {
            (Some(p), Some(l), true) => Some(NoReferenceReport::compute(&fused, p, l, &blur, &sampling)?),
            _ => None,
        };
        if i == 0 {
            if let (Some(out), Some(t)) = (&args.diff_ppm, &truth) {
                write_difference(&fused, t, out)?;
            }
        }
        rows.push(Row { method, full, no_reference });
    }

    let text = match args.format {
        Format::Csv => csv(&rows, args.mode),
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
    };
    match &args.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// First three bands as PPM, or the first band as PGM when there are fewer.
fn write_difference(fused: &MultispectralImage, truth: &MultispectralImage, out: &Path) -> Result<()> {
    let diff = difference_visualization(fused, truth)?;
    let (bands, format) = if diff.num_bands() >= 3 { (3, ImageFormat::Ppm) } else { (1, ImageFormat::Pgm) };
    let shown = MultispectralImage::from_bands(diff.into_bands().into_iter().take(bands).collect())?;
    write_image(&shown, out, format).with_context(|| format!("writing {}", out.display()))
}
