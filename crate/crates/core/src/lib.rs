//! Variational pansharpening with a nonlocal, band-decoupled energy.
//!
//! The crate fuses a high-resolution panchromatic image with low-resolution,
//! possibly misregistered and aliased spectral bands. Each band is solved on
//! its own grid against a panchromatic warped into that band's geometry, so
//! the aliased spectral data never has to be resampled before fusion.
//!
//! Besides the solver ([`solver`]) the crate ships everything needed to run a
//! reduced-resolution comparison at desk scale: the linear operators of the
//! acquisition model ([`sampling`]), the patch-similarity weight field
//! ([`weights`]), classical fusion baselines ([`baselines`]), a scene
//! simulator ([`simulate`]) and the usual full- and no-reference quality
//! indices ([`metrics`]).
//!
//! ```
//! use pansharp::simulate::{procedural_scene, simulate_lowres, synthesize_pan, MixingWeights, SimulationSpec};
//! use pansharp::solver::{pansharpen_nlvd, SolverConfig};
//!
//! let truth = procedural_scene(32, 32, 3, 1).unwrap();
//! let alphas = MixingWeights::equal(3);
//! let pan = synthesize_pan(&truth, &alphas).unwrap();
//! let spec = SimulationSpec::new(1.7, 4, alphas);
//! let lowres = simulate_lowres(&truth, &spec, 0).unwrap();
//!
//! let cfg = SolverConfig { max_iter: 20, ..SolverConfig::default() };
//! let (fused, reports) = pansharpen_nlvd(&[pan], &lowres, &cfg).unwrap();
//! assert_eq!(fused.num_bands(), 3);
//! assert_eq!(reports.len(), 3);
//! ```

pub mod baselines;
mod error;
pub mod io;
pub mod metrics;
pub mod raster;
pub mod sampling;
pub mod simulate;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use raster::{Band, Grid, MultispectralImage, PanImage};
