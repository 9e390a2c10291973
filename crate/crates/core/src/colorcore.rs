//! Color and geometry primitives: illuminant directions, spherical
//! coordinates, angular error metrics and von Kries correction.
//!
//! Angles are carried in radians internally; the error metrics report
//! degrees, which is how results are tabulated.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Guard below which an estimate component is treated as zero when it is
/// used as a divisor.
pub const DIV_EPS: f64 = 1e-12;

/// Tolerance on the norm of a vector that claims to be unit length.
pub const UNIT_NORM_TOL: f64 = 1e-9;

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

/// A global light color: a strictly positive RGB direction of unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Illuminant {
    r: f64,
    g: f64,
    b: f64,
}

impl Illuminant {
    /// The achromatic direction `(1, 1, 1) / sqrt(3)`.
    pub const NEUTRAL: Illuminant = Illuminant {
        r: INV_SQRT3,
        g: INV_SQRT3,
        b: INV_SQRT3,
    };

    /// Normalizes a strictly positive vector to unit length.
    pub fn new(r: f64, g: f64, b: f64) -> Result<Self> {
        normalize([r, g, b])
    }

    /// Accepts components that are already unit length, without touching
    /// their bits. Used when reading stored labels back.
    pub fn from_unit(r: f64, g: f64, b: f64) -> Result<Self> {
        check_positive([r, g, b])?;
        let norm = (r * r + g * g + b * b).sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(CoreError::Domain(format!(
                "illuminant ({r}, {g}, {b}) has norm {norm}, expected 1"
            )));
        }
        Ok(Self { r, g, b })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    pub fn dot(&self, other: &Illuminant) -> f64 {
        self.r * other.r + self.g * other.g + self.b * other.b
    }
}

fn check_positive(v: [f64; 3]) -> Result<()> {
    if v.iter().all(|c| c.is_finite() && *c > 0.0) {
        Ok(())
    } else {
        Err(CoreError::Domain(format!(
            "illuminant components must be finite and strictly positive, got {v:?}"
        )))
    }
}

/// Scales a strictly positive 3-vector to unit length.
pub fn normalize(v: [f64; 3]) -> Result<Illuminant> {
    check_positive(v)?;
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(CoreError::Domain(format!("cannot normalize {v:?}")));
    }
    Ok(Illuminant {
        r: v[0] / norm,
        g: v[1] / norm,
        b: v[2] / norm,
    })
}

/// Angle between two unit directions in degrees, with the cosine clamped
/// to `[-1, 1]`.
fn angle_deg(cos: f64) -> f64 {
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Recovery angular error: the angle between ground truth and estimate.
pub fn recovery_error(gt: &Illuminant, est: &Illuminant) -> f64 {
    angle_deg(gt.dot(est))
}

/// Reproduction angular error: the angle between the element-wise ratio
/// `gt / est` and the neutral direction.
pub fn reproduction_error(gt: &Illuminant, est: &Illuminant) -> Result<f64> {
    let e = est.to_array();
    if e.iter().any(|c| *c <= DIV_EPS) {
        return Err(CoreError::Domain(format!(
            "estimate {e:?} has a component at or below {DIV_EPS}"
        )));
    }
    if *est == Illuminant::NEUTRAL {
        // gt / n is parallel to gt, so both metrics agree bit for bit here.
        return Ok(recovery_error(gt, est));
    }
    let g = gt.to_array();
    let ratio = [g[0] / e[0], g[1] / e[1], g[2] / e[2]];
    let norm = (ratio[0] * ratio[0] + ratio[1] * ratio[1] + ratio[2] * ratio[2]).sqrt();
    let cos = (ratio[0] + ratio[1] + ratio[2]) * INV_SQRT3 / norm;
    Ok(angle_deg(cos))
}

/// Which angular error to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Recovery,
    Reproduction,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Recovery, Metric::Reproduction];

    pub fn eval(&self, gt: &Illuminant, est: &Illuminant) -> Result<f64> {
        match self {
            Metric::Recovery => Ok(recovery_error(gt, est)),
            Metric::Reproduction => reproduction_error(gt, est),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Recovery => "recovery",
            Metric::Reproduction => "reproduction",
        }
    }
}

/// An illuminant direction in spherical coordinates, in radians.
///
/// `phi` is the azimuth in the r-g plane measured from the r axis and
/// `varphi` is the inclination measured from the b axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalDir {
    pub phi: f64,
    pub varphi: f64,
}

impl SphericalDir {
    pub fn from_degrees(phi: f64, varphi: f64) -> Self {
        Self {
            phi: phi.to_radians(),
            varphi: varphi.to_radians(),
        }
    }
}

/// Converts a direction to `(phi, varphi)`.
///
/// The inclination uses `sqrt(r^2 + g^2)`, the length of the projection
/// onto the r-g plane, so that [`from_spherical`] inverts it exactly.
pub fn to_spherical(i: &Illuminant) -> SphericalDir {
    SphericalDir {
        phi: (i.g / i.r).atan(),
        varphi: (i.r * i.r + i.g * i.g).sqrt().atan2(i.b),
    }
}

/// Maps spherical coordinates inside the open positive octant back to a
/// unit direction.
pub fn from_spherical(s: &SphericalDir) -> Result<Illuminant> {
    let open = |a: f64| a > 0.0 && a < std::f64::consts::FRAC_PI_2;
    if !open(s.phi) || !open(s.varphi) {
        return Err(CoreError::Domain(format!(
            "spherical angles ({}, {}) outside the open positive octant",
            s.phi, s.varphi
        )));
    }
    let (sin_v, cos_v) = s.varphi.sin_cos();
    let (sin_p, cos_p) = s.phi.sin_cos();
    let (r, g, b) = (sin_v * cos_p, sin_v * sin_p, cos_v);
    if r <= 0.0 || g <= 0.0 || b <= 0.0 {
        return Err(CoreError::Domain(format!(
            "spherical angles ({}, {}) too close to the octant boundary",
            s.phi, s.varphi
        )));
    }
    Ok(Illuminant { r, g, b })
}

/// A linear-RGB image under a single global illuminant.
///
/// Pixels are stored row-major with interleaved channels, as 32-bit floats
/// so that scenes round-trip through the dataset format unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
    label: Illuminant,
}

impl Scene {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>, label: Illuminant) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CoreError::Domain(
                "scene must have at least one pixel".into(),
            ));
        }
        if pixels.len() != width * height * 3 {
            return Err(CoreError::Domain(format!(
                "expected {} pixel values for {width}x{height}, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(CoreError::Domain(
                "pixel values must be finite and non-negative".into(),
            ));
        }
        for c in 0..3 {
            if !pixels.iter().skip(c).step_by(3).any(|p| *p > 0.0) {
                return Err(CoreError::Domain(format!(
                    "channel {c} has no positive pixel"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
            label,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn label(&self) -> Illuminant {
        self.label
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Divides every pixel by the estimated illuminant, channel by channel, then
/// rescales globally so the largest value in the image is unchanged.
pub fn apply_von_kries(scene: &Scene, est: &Illuminant) -> Vec<f32> {
    let gains = est.to_array().map(|c| 1.0 / c);
    let mut out: Vec<f64> = scene
        .pixels()
        .chunks_exact(3)
        .flat_map(|px| (0..3).map(move |c| px[c] as f64 * gains[c]))
        .collect();
    let max_in = scene.pixels().iter().fold(0.0f32, |m, p| m.max(*p)) as f64;
    let max_out = out.iter().fold(0.0f64, |m, p| m.max(*p));
    if max_out > 0.0 {
        let scale = max_in / max_out;
        out.iter_mut().for_each(|p| *p *= scale);
    }
    out.into_iter().map(|p| p as f32).collect()
}
