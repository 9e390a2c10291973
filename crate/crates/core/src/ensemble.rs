//! Uncertainty-weighted fusion of several models' illuminant estimates.
//!
//! Each model's total uncertainty is turned into a confidence score
//! `g(1 / mu)`, the scores are normalized to sum to one, and the model means
//! are averaged in spherical coordinates so the fused estimate stays on the
//! unit sphere.

use serde::{Deserialize, Serialize};

use crate::colorcore::{from_spherical, to_spherical, Illuminant, Metric, Scene, SphericalDir};
use crate::error::{CoreError, Result};
use crate::mcdropout::{
    mc_estimate, uncertainty_scalar, McEstimate, StochasticEstimator, DEFAULT_PASSES,
};
use crate::seed;

/// Uncertainties below this are treated as this value before inversion.
pub const SIGMA_FLOOR: f64 = 1e-12;
/// Smallest raw confidence score; keeps log scores positive when `mu > 1`.
pub const CONFIDENCE_FLOOR: f64 = 1e-6;

/// The monotone map `g` applied to inverse uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `g(x) = x`
    Linear,
    /// `g(x) = ln x`
    Log,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Linear, Variant::Log];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Linear => "linear",
            Variant::Log => "log",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Variant::Linear),
            "log" => Ok(Variant::Log),
            other => Err(CoreError::Domain(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceFn {
    pub variant: Variant,
    pub sigma_floor: f64,
    pub confidence_floor: f64,
}

impl ConfidenceFn {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            sigma_floor: SIGMA_FLOOR,
            confidence_floor: CONFIDENCE_FLOOR,
        }
    }

    /// Score before normalization.
    pub fn raw(&self, uncertainty: f64) -> f64 {
        let inv = 1.0 / uncertainty.max(self.sigma_floor);
        let g = match self.variant {
            Variant::Linear => inv,
            Variant::Log => inv.ln(),
        };
        g.max(self.confidence_floor)
    }
}

/// Raw confidence score per model.
pub fn raw_confidences(uncertainties: &[f64], f: &ConfidenceFn) -> Vec<f64> {
    uncertainties.iter().map(|u| f.raw(*u)).collect()
}

/// Confidence scores normalized onto the probability simplex.
pub fn confidence_scores(uncertainties: &[f64], f: &ConfidenceFn) -> Result<Vec<f64>> {
    if uncertainties.is_empty() {
        return Err(CoreError::Domain("need at least one model".into()));
    }
    let raw = raw_confidences(uncertainties, f);
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|r| r / total).collect())
}

/// Weighted angular average of unit directions.
pub fn aggregate(estimates: &[Illuminant], weights: &[f64]) -> Result<Illuminant> {
    if estimates.is_empty() || estimates.len() != weights.len() {
        return Err(CoreError::Domain(format!(
            "{} estimates with {} weights",
            estimates.len(),
            weights.len()
        )));
    }
    let mut phi = 0.0;
    let mut varphi = 0.0;
    for (e, w) in estimates.iter().zip(weights) {
        let s = to_spherical(e);
        phi += w * s.phi;
        varphi += w * s.varphi;
    }
    from_spherical(&SphericalDir { phi, varphi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McdeConfig {
    pub nu: usize,
    pub base_seed: u64,
    pub variant: Variant,
}

impl Default for McdeConfig {
    fn default() -> Self {
        Self {
            nu: DEFAULT_PASSES,
            base_seed: 0,
            variant: Variant::Log,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McdeOutput {
    pub fused: Illuminant,
    pub per_model: Vec<McEstimate>,
    pub weights: Vec<f64>,
}

/// MC seed for model `index`; depends only on the run seed and the index.
pub fn model_seed(base_seed: u64, index: usize) -> u64 {
    seed::derive(seed::derive_str(base_seed, "mc-dropout"), index as u64)
}

/// Fuses per-model MC estimates with the given confidence variant.
pub fn fuse(per_model: &[McEstimate], variant: Variant) -> Result<(Illuminant, Vec<f64>)> {
    let mus: Vec<f64> = per_model.iter().map(uncertainty_scalar).collect();
    let weights = confidence_scores(&mus, &ConfidenceFn::new(variant))?;
    let means: Vec<Illuminant> = per_model.iter().map(|e| e.mean).collect();
    Ok((aggregate(&means, &weights)?, weights))
}

/// Per-model MC estimates for one scene, model `i` keyed by
/// [`model_seed`]`(base_seed, i)`.
pub fn estimate_all(
    models: &[&dyn StochasticEstimator],
    scene: &Scene,
    nu: usize,
    base_seed: u64,
) -> Result<Vec<McEstimate>> {
    models
        .iter()
        .enumerate()
        .map(|(i, m)| mc_estimate(*m, scene, nu, model_seed(base_seed, i)))
        .collect()
}

/// The full pipeline for one scene.
pub fn mcde(
    models: &[&dyn StochasticEstimator],
    scene: &Scene,
    config: &McdeConfig,
) -> Result<McdeOutput> {
    if models.is_empty() {
        return Err(CoreError::Domain("need at least one model".into()));
    }
    let per_model = estimate_all(models, scene, config.nu, config.base_seed)?;
    let (fused, weights) = fuse(&per_model, config.variant)?;
    Ok(McdeOutput {
        fused,
        per_model,
        weights,
    })
}

/// Per-sample oracle: the index and value of the estimate with the lowest
/// error against ground truth. Ties go to the lowest index.
pub fn ideal_combine(
    estimates: &[Illuminant],
    gt: &Illuminant,
    metric: Metric,
) -> Result<(usize, Illuminant)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in estimates.iter().enumerate() {
        let err = metric.eval(gt, e)?;
        if best.is_none_or(|(_, b)| err < b) {
            best = Some((i, err));
        }
    }
    let (i, _) = best.ok_or_else(|| CoreError::Domain("need at least one estimate".into()))?;
    Ok((i, estimates[i]))
}
