use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use pansharp::io::{read_image, write_image, ImageFormat};
use pansharp::simulate::{default_translations, procedural_scene, simulate_lowres, synthesize_pan, MixingWeights, SimulationSpec};

use crate::manifest::{write_json, FileRecord, ReferenceSource, SimulationManifest};

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["reference", "procedural"]))]
pub struct SimulateArgs {
    /// Ground-truth multispectral image (MBF, PGM or PPM).
    #[arg(long = "ref", value_name = "PATH")]
    pub reference: Option<PathBuf>,
    /// Generate a synthetic ground truth of the given size, e.g. 128x128x4.
    #[arg(long, value_name = "WxHxC")]
    pub procedural: Option<String>,
    /// Seed of the synthetic scene.
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
    /// Standard deviation of the Gaussian sensor blur.
    #[arg(long, default_value_t = 1.3)]
    pub sigma: f64,
    #[arg(long, default_value_t = 4)]
    pub factor: usize,
    /// Comma-separated mixing weights, or `equal`.
    #[arg(long, default_value = "equal")]
    pub alphas: String,
    /// `auto` for (0.6 k, -0.4 k), `none`, or `dx:dy,dx:dy,...` per band.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub shifts: String,
    /// Standard deviation of additive Gaussian noise on the bands.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for pan.mbf, lowres.mbf, truth.mbf and manifest.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn parse_alphas(text: &str, bands: usize) -> Result<MixingWeights> {
    if text == "equal" {
        return Ok(MixingWeights::equal(bands));
    }
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad mixing weight {v:?}")))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != bands {
        bail!("{} mixing weights given for {bands} bands", values.len());
    }
    Ok(MixingWeights::new(values)?)
}

pub fn parse_shifts(text: &str, bands: usize) -> Result<Vec<(f64, f64)>> {
    let shifts = match text {
        "auto" => default_translations(bands),
        "none" => vec![(0.0, 0.0); bands],
        list => list
            .split(',')
            .map(|pair| {
                let (dx, dy) = pair.split_once(':').with_context(|| format!("shift {pair:?} is not dx:dy"))?;
                Ok((dx.trim().parse()?, dy.trim().parse()?))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    if shifts.len() != bands {
        bail!("{} shifts given for {bands} bands", shifts.len());
    }
    Ok(shifts)
}

fn parse_size(text: &str) -> Result<(usize, usize, usize)> {
    let parts = text.split('x').map(str::parse::<usize>).collect::<Result<Vec<_>, _>>();
    match parts.as_deref() {
        Ok([w, h, c]) => Ok((*w, *h, *c)),
        _ => bail!("--procedural expects WxHxC, got {text:?}"),
    }
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let (truth, reference) = match (&args.reference, &args.procedural) {
        (Some(path), _) => (read_image(path)?, ReferenceSource::File(FileRecord::of(path)?)),
        (None, Some(size)) => {
            let (width, height, bands) = parse_size(size)?;
            let truth = procedural_scene(width, height, bands, args.scene_seed)?;
            (truth, ReferenceSource::Procedural { width, height, bands, seed: args.scene_seed })
        }
        (None, None) => unreachable!("clap requires a reference"),
    };
    let bands = truth.num_bands();
    let spec = SimulationSpec::new(args.sigma, args.factor, parse_alphas(&args.alphas, bands)?)
        .with_translations(parse_shifts(&args.shifts, bands)?)
        .with_noise(args.noise);

    let pan = synthesize_pan(&truth, &spec.alphas)?;
    let lowres = simulate_lowres(&truth, &spec, args.seed)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let pan_path = args.out.join("pan.mbf");
    let lowres_path = args.out.join("lowres.mbf");
    let truth_path = args.out.join("truth.mbf");
    write_image(&pan.into(), &pan_path, ImageFormat::Mbf)?;
    write_image(&lowres, &lowres_path, ImageFormat::Mbf)?;
    write_image(&truth, &truth_path, ImageFormat::Mbf)?;

    let manifest = SimulationManifest {
        command: "simulate".into(),
        reference,
        spec,
        seed: args.seed,
        pan: FileRecord::of(&pan_path)?,
        lowres: FileRecord::of(&lowres_path)?,
        truth: FileRecord::of(&truth_path)?,
    };
    write_json(&manifest, &args.out.join("manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_lists() {
        assert_eq!(parse_shifts("none", 2).unwrap(), vec![(0.0, 0.0); 2]);
        assert_eq!(parse_shifts("0:0,-0.5:1.25", 2).unwrap(), vec![(0.0, 0.0), (-0.5, 1.25)]);
        assert!(parse_shifts("0:0", 2).is_err());
        assert!(parse_shifts("0;0,1:1", 2).is_err());
    }

    #[test]
    fn alpha_lists() {
        assert_eq!(parse_alphas("0,0.4,0.35,0.25", 4).unwrap(), MixingWeights::bgrn_without_blue());
        assert!(parse_alphas("0.5,0.5", 3).is_err());
        assert!(parse_alphas("-1,2", 2).is_err());
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_size("64x32x4").unwrap(), (64, 32, 4));
        assert!(parse_size("64x32").is_err());
    }
}
