//! MC-dropout reduction: run a stochastic model `nu` times on one scene and
//! summarize the outputs by their mean direction, per-channel spread and
//! total uncertainty.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colorcore::{normalize, Illuminant, Scene};
use crate::error::{CoreError, Result};
use crate::nnet::{ForwardMode, Network, PassSeed};

/// Passes per model used unless configured otherwise.
pub const DEFAULT_PASSES: usize = 30;

/// Anything that can produce one stochastic illuminant sample per pass.
pub trait StochasticEstimator: Sync {
    fn sample(&self, scene: &Scene, seed: PassSeed) -> Result<Illuminant>;
}

impl StochasticEstimator for Network {
    fn sample(&self, scene: &Scene, seed: PassSeed) -> Result<Illuminant> {
        self.forward(scene, ForwardMode::Mc, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Component-wise mean of the passes, rescaled to unit length.
    pub mean: Illuminant,
    /// Component-wise mean before rescaling.
    pub raw_mean: [f64; 3],
    /// Population standard deviation per channel, about `raw_mean`.
    pub sigma: [f64; 3],
    /// `sigma_r * sigma_g * sigma_b`.
    pub mu: f64,
    pub passes: usize,
}

/// Runs `nu` passes keyed `(base_seed, 0..nu)` and reduces them.
///
/// Passes may run on any number of threads; they are reduced in pass order.
pub fn mc_estimate<M: StochasticEstimator + ?Sized>(
    model: &M,
    scene: &Scene,
    nu: usize,
    base_seed: u64,
) -> Result<McEstimate> {
    if nu == 0 {
        return Err(CoreError::Domain("need at least one forward pass".into()));
    }
    let samples = (0..nu as u64)
        .into_par_iter()
        .map(|p| model.sample(scene, PassSeed::new(base_seed, p)))
        .collect::<Result<Vec<_>>>()?;
    reduce(&samples)
}

/// Mean, population spread and total uncertainty of a list of samples.
pub fn reduce(samples: &[Illuminant]) -> Result<McEstimate> {
    let first = samples
        .first()
        .ok_or_else(|| CoreError::Domain("no samples to reduce".into()))?
        .to_array();
    let n = samples.len() as f64;
    // Shifted by the first sample: identical samples give exactly zero spread.
    let mut shift = [0.0; 3];
    for s in samples {
        let v = s.to_array();
        for c in 0..3 {
            shift[c] += v[c] - first[c];
        }
    }
    let raw_mean: [f64; 3] = std::array::from_fn(|c| first[c] + shift[c] / n);
    let mut sq = [0.0; 3];
    for s in samples {
        let v = s.to_array();
        for c in 0..3 {
            let d = v[c] - raw_mean[c];
            sq[c] += d * d;
        }
    }
    let sigma = sq.map(|s| (s / n).sqrt());
    let mean = if sigma == [0.0; 3] {
        samples[0]
    } else {
        normalize(raw_mean)?
    };
    Ok(McEstimate {
        mean,
        raw_mean,
        sigma,
        mu: sigma[0] * sigma[1] * sigma[2],
        passes: samples.len(),
    })
}

/// Total uncertainty of a model on one scene.
pub fn uncertainty_scalar(e: &McEstimate) -> f64 {
    e.mu
}

/// The dropout-free estimate, for comparison with the MC mean.
pub fn deterministic_estimate(net: &Network, scene: &Scene) -> Result<Illuminant> {
    net.forward(scene, ForwardMode::Deterministic, PassSeed::new(0, 0))
}
