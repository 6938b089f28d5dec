use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use pansharp::baselines::{fuse_baseline, fuse_baseline_misregistered, Baseline, BaselineConfig};
use pansharp::io::{read_image, write_image, ImageFormat};
use pansharp::sampling::{BlurSpec, SamplingSpec};
use pansharp::simulate::MixingWeights;
use pansharp::solver::{pansharpen_nlvd, pansharpen_nlvd_misregistered, solve_nlv, NlvConfig, SolverConfig, StepSize};
use pansharp::weights::NonlocalConfig;
use pansharp::{MultispectralImage, PanImage};

use crate::manifest::{read_json, write_json, BandSummary, FileRecord, SimulationManifest, Timings};
use crate::simulate::{parse_alphas, parse_shifts};
use crate::SelfWeight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nlvd,
    Nlv,
    Hpf,
    Sfim,
    Lmvm,
    Lbf,
    Bicubic,
}

impl Method {
    fn baseline(self) -> Option<Baseline> {
        match self {
            Method::Hpf => Some(Baseline::Hpf),
            Method::Sfim => Some(Baseline::Sfim),
            Method::Lmvm => Some(Baseline::Lmvm),
            Method::Lbf => Some(Baseline::Lbf),
            Method::Bicubic => Some(Baseline::Bicubic),
            Method::Nlvd | Method::Nlv => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long, value_enum, required_unless_present = "replay")]
    pub method: Option<Method>,
    #[arg(long, required_unless_present = "replay")]
    pub pan: Option<PathBuf>,
    #[arg(long, required_unless_present = "replay")]
    pub lowres: Option<PathBuf>,
    /// Fused image; the run manifest is written next to it with a .json
    /// extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fuse each band in its own geometry and translate the results back.
    #[arg(long)]
    pub misregistered: bool,
    /// Simulation manifest supplying shifts, mixing weights, blur and factor.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Per-band shifts `dx:dy,...`, overriding the manifest.
    #[arg(long, allow_hyphen_values = true)]
    pub shifts: Option<String>,
    /// Mixing weights for nlv, overriding the manifest.
    #[arg(long)]
    pub alphas: Option<String>,
    #[arg(long, default_value_t = 50.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 6.21)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.25)]
    pub h: f64,
    #[arg(long, default_value_t = 3)]
    pub search_radius: usize,
    #[arg(long, default_value_t = 1)]
    pub patch_radius: usize,
    #[arg(long, value_enum, default_value_t = SelfWeight::MaxThenNormalize)]
    pub self_weight: SelfWeight,
    /// Sensor blur; defaults to the manifest value, else 1.3.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Sampling factor; defaults to the manifest value, else 4.
    #[arg(long)]
    pub factor: Option<usize>,
    /// Gradient step: `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    pub tau: String,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 5)]
    pub hpf_box: usize,
    #[arg(long, default_value_t = 9)]
    pub lmvm_window: usize,
    /// Re-run a previous fuse from its run manifest and check the output is
    /// bitwise identical.
    #[arg(long, conflicts_with_all = ["method", "pan", "lowres"])]
    pub replay: Option<PathBuf>,
}

/// Everything needed to reproduce a fuse run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseSettings {
    pub method: Method,
    pub pan: PathBuf,
    pub lowres: PathBuf,
    pub out: PathBuf,
    /// Per-band shifts when fusing misregistered bands.
    pub shifts: Option<Vec<(f64, f64)>>,
    pub alphas: Option<MixingWeights>,
    pub solver: SolverConfig,
    pub nlv: NlvConfig,
    pub baseline: BaselineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub settings: FuseSettings,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub timings: Timings,
    pub bands: Vec<BandSummary>,
}

pub fn read_pan(path: &Path) -> Result<PanImage> {
    let img = read_image(path).with_context(|| format!("reading {}", path.display()))?;
    if img.num_bands() != 1 {
        bail!("{} has {} bands; a panchromatic has one", path.display(), img.num_bands());
    }
    Ok(img.into_bands().remove(0))
}

fn parse_tau(text: &str) -> Result<StepSize> {
    if text == "auto" {
        return Ok(StepSize::Auto);
    }
    let tau: f64 = text.parse().with_context(|| format!("--tau expects `auto` or a number, got {text:?}"))?;
    Ok(StepSize::Fixed(tau))
}

fn settings_from_args(args: &FuseArgs) -> Result<FuseSettings> {
    let (Some(method), Some(pan), Some(lowres)) = (args.method, &args.pan, &args.lowres) else {
        bail!("--method, --pan and --lowres are required");
    };
    let sim: Option<SimulationManifest> = args.manifest.as_deref().map(read_json).transpose()?;
    let bands = read_image(lowres).with_context(|| format!("reading {}", lowres.display()))?.num_bands();

    let shifts = if args.misregistered {
        let shifts = match (&args.shifts, &sim) {
            (Some(text), _) => parse_shifts(text, bands)?,
            (None, Some(m)) => m.spec.translations.clone(),
            (None, None) => bail!("--misregistered needs --shifts or a simulation --manifest"),
        };
        Some(shifts)
    } else {
        None
    };
    let alphas = match (&args.alphas, &sim) {
        (Some(text), _) => Some(parse_alphas(text, bands)?),
        (None, Some(m)) => Some(m.spec.alphas.clone()),
        (None, None) => None,
    };
    let sigma = args.sigma.or(sim.as_ref().map(|m| m.spec.sigma)).unwrap_or(1.3);
    let factor = args.factor.or(sim.as_ref().map(|m| m.spec.factor)).unwrap_or(4);
    let blur = BlurSpec::gaussian(sigma)?;
    let sampling = SamplingSpec::new(factor)?;
    let nonlocal = NonlocalConfig {
        search_radius: args.search_radius,
        patch_radius: args.patch_radius,
        h: args.h,
        self_weight: args.self_weight.into(),
    };
    let tau = parse_tau(&args.tau)?;
    Ok(FuseSettings {
        method,
        pan: pan.clone(),
        lowres: lowres.clone(),
        out: args.out.clone().unwrap_or_else(|| PathBuf::from("fused.mbf")),
        shifts,
        alphas,
        solver: SolverConfig {
            mu: args.mu,
            delta: args.delta,
            nonlocal,
            blur,
            sampling,
            tau,
            max_iter: args.max_iter,
            tol: args.tol,
        },
        nlv: NlvConfig {
            lambda: args.lambda,
            mu: args.mu,
            nonlocal,
            blur,
            sampling,
            tau,
            max_iter: args.max_iter,
            tol: args.tol,
        },
        baseline: BaselineConfig { hpf_box: args.hpf_box, lmvm_window: args.lmvm_window, ratio_epsilon: 1e-6, blur, sampling },
    })
}

fn fuse(settings: &FuseSettings, pan: &PanImage, lowres: &MultispectralImage) -> Result<(MultispectralImage, Vec<BandSummary>)> {
    let summaries = |reports: &[pansharp::solver::SolveReport]| reports.iter().enumerate().map(|(k, r)| BandSummary::new(k, r)).collect();
    match (settings.method, &settings.shifts) {
        (Method::Nlvd, None) => {
            let (img, reports) = pansharpen_nlvd(std::slice::from_ref(pan), lowres, &settings.solver)?;
            Ok((img, summaries(&reports)))
        }
        (Method::Nlvd, Some(shifts)) => {
            let (img, reports) = pansharpen_nlvd_misregistered(pan, lowres, shifts, &settings.solver)?;
            Ok((img, summaries(&reports)))
        }
        (Method::Nlv, Some(_)) => Err(pansharp::Error::Unsupported(
            "nlv couples the bands through the panchromatic and requires spectral components to be co-registered".into(),
        )
        .into()),
        (Method::Nlv, None) => {
            let alphas = settings.alphas.clone().unwrap_or_else(|| MixingWeights::equal(lowres.num_bands()));
            let (img, report) = solve_nlv(pan, lowres, &alphas, &settings.nlv)?;
            Ok((img, vec![BandSummary::new(0, &report)]))
        }
        (method, shifts) => {
            let baseline = method.baseline().expect("variational methods handled above");
            let img = match shifts {
                Some(shifts) => fuse_baseline_misregistered(baseline, pan, lowres, shifts, &settings.baseline)?,
                None => fuse_baseline(baseline, std::slice::from_ref(pan), lowres, &settings.baseline)?,
            };
            Ok((img, Vec::new()))
        }
    }
}

fn execute(settings: &FuseSettings) -> Result<RunManifest> {
    let t0 = Instant::now();
    let inputs = vec![FileRecord::of(&settings.pan)?, FileRecord::of(&settings.lowres)?];
    let pan = read_pan(&settings.pan)?;
    let lowres = read_image(&settings.lowres).with_context(|| format!("reading {}", settings.lowres.display()))?;
    let t1 = Instant::now();
    let (fused, bands) = fuse(settings, &pan, &lowres)?;
    let t2 = Instant::now();
    write_image(&fused, &settings.out, ImageFormat::from_path(&settings.out))
        .with_context(|| format!("writing {}", settings.out.display()))?;
    let t3 = Instant::now();
    let ms = |a: Instant, b: Instant| (b - a).as_secs_f64() * 1e3;
    Ok(RunManifest {
        command: "fuse".into(),
        settings: settings.clone(),
        inputs,
        outputs: vec![FileRecord::of(&settings.out)?],
        timings: Timings { load_ms: ms(t0, t1), fuse_ms: ms(t1, t2), write_ms: ms(t2, t3) },
        bands,
    })
}

pub fn run(args: &FuseArgs) -> Result<()> {
    if let Some(path) = &args.replay {
        let previous: RunManifest = read_json(path)?;
        for input in &previous.inputs {
            input.verify()?;
        }
        let mut settings = previous.settings.clone();
        if let Some(out) = &args.out {
            settings.out = out.clone();
        }
        let rerun = execute(&settings)?;
        for (old, new) in previous.outputs.iter().zip(&rerun.outputs) {
            if old.sha256 != new.sha256 {
                bail!("replay of {} produced different bytes for {}", path.display(), new.path.display());
            }
        }
        return Ok(());
    }
    let settings = settings_from_args(args)?;
    let manifest = execute(&settings)?;
    write_json(&manifest, &settings.out.with_extension("json"))
}
