//! Statistics-based illuminant estimators.

use crate::colorcore::{normalize, Illuminant, Scene};
use crate::error::{CoreError, Result};

pub const DEFAULT_MINKOWSKI_P: f64 = 6.0;

/// Grey-World: the illuminant is the direction of the mean pixel.
pub fn grey_world(scene: &Scene) -> Result<Illuminant> {
    shades_of_grey(scene, 1.0)
}

/// Shades-of-Grey: the per-channel Minkowski `p`-mean of the pixels.
pub fn shades_of_grey(scene: &Scene, p: f64) -> Result<Illuminant> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(CoreError::Domain(format!(
            "Minkowski order must be a finite value >= 1, got {p}"
        )));
    }
    // Pixels are scaled by their maximum first so large p cannot overflow;
    // the estimate is a direction, so the scale drops out.
    let peak = scene.pixels().iter().fold(0.0f32, |m, v| m.max(*v)) as f64;
    if peak <= 0.0 {
        return Err(CoreError::Domain("scene has no positive pixel".into()));
    }
    let mut acc = [0.0f64; 3];
    for px in scene.pixels().chunks_exact(3) {
        for c in 0..3 {
            let v = px[c] as f64 / peak;
            acc[c] += if p == 1.0 { v } else { v.powf(p) };
        }
    }
    let n = scene.pixel_count() as f64;
    let est = acc.map(|a| (a / n).powf(1.0 / p));
    if est.iter().any(|e| *e <= 0.0) {
        return Err(CoreError::Domain("a channel has zero mean".into()));
    }
    normalize(est)
}
