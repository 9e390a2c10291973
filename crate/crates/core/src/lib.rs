//! Monte Carlo dropout ensembles for single-illuminant color constancy.
//!
//! Several dropout-trained estimators are each run many times with dropout
//! active. The spread of their outputs gives a per-model uncertainty, and
//! the final illuminant is a confidence-weighted average of the model
//! estimates taken in spherical coordinates.
//!
//! Module map:
//!
//! - [`colorcore`]: illuminants, spherical coordinates, angular errors,
//!   von Kries correction
//! - [`nnet`]: the trainable estimator and its container format
//! - [`mcdropout`]: MC-dropout reduction to mean, spread and total uncertainty
//! - [`ensemble`]: confidence scores, angular fusion, the per-sample oracle
//! - [`baselines`]: Grey-World and Shades-of-Grey
//! - [`datagen`]: synthetic scenes, dataset directories, folds
//! - [`bench`]: cross-validation, error statistics, report files
//!
//! ```
//! use mcde_core::datagen::{gen_dataset, GenConfig, Pool};
//! use mcde_core::ensemble::{mcde, McdeConfig};
//! use mcde_core::mcdropout::StochasticEstimator;
//! use mcde_core::nnet::{train, Arch, ArchConfig, TrainConfig};
//!
//! # fn main() -> mcde_core::Result<()> {
//! let data = gen_dataset(&GenConfig { n_scenes: 50, pool: Pool::BandA, ..Default::default() })?;
//! let scenes: Vec<_> = data.scenes.iter().collect();
//! let net = Arch::GNet.build(&ArchConfig::default(), 1)?;
//! let net = train(net, &scenes, &TrainConfig { epochs: 30, learning_rate: 0.5, ..Default::default() })?.network;
//! let models: [&dyn StochasticEstimator; 1] = [&net];
//! let out = mcde(&models, &data.scenes[0], &McdeConfig::default())?;
//! assert!((out.weights[0] - 1.0).abs() < 1e-12);
//! # Ok(())
//! # }
//! ```

pub mod baselines;
pub mod bench;
pub mod colorcore;
pub mod datagen;
pub mod ensemble;
pub mod error;
pub mod mcdropout;
pub mod nnet;
pub mod seed;

pub use colorcore::{Illuminant, Scene, SphericalDir};
pub use error::{CoreError, Result};
