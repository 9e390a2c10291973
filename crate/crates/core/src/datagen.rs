//! Synthetic labeled scenes, the on-disk dataset format and fold splits.
//!
//! A scene is a Voronoi mosaic of flat reflectance patches lit by one
//! global illuminant: `pixel = reflectance * light + noise`, clamped at
//! zero. Illuminants are drawn uniformly by solid angle from a rectangular
//! region in `(phi, varphi)`, see [`Pool`].
//!
//! Dataset directory layout:
//!
//! ```text
//! manifest            TOML: format version, generator config, scene count,
//!                     per-scene file name and SHA-256 of the pixel blob
//! labels.csv          index,r,g,b with 17 significant digits
//! scene_NNNNNN.f32    width*height*3 little-endian f32, row-major RGB
//! ```

use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::colorcore::{from_spherical, to_spherical, Illuminant, Scene, SphericalDir};
use crate::error::{CoreError, Result};
use crate::seed;

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest";
pub const LABELS_FILE: &str = "labels.csv";

/// Where illuminants are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pool {
    /// Most of the positive octant, 5 degrees clear of its boundary.
    Full,
    /// Blue-shifted cap.
    BandA,
    /// Red-shifted cap, disjoint from band A.
    BandB,
    /// Band A for even scene indices, band B for odd ones.
    BandAb,
}

/// A rectangle in `(phi, varphi)`, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cap {
    pub phi: (f64, f64),
    pub varphi: (f64, f64),
}

impl Cap {
    pub fn contains(&self, i: &Illuminant) -> bool {
        let s = to_spherical(i);
        let (p, v) = (s.phi.to_degrees(), s.varphi.to_degrees());
        let tol = 1e-9;
        p >= self.phi.0 - tol
            && p <= self.phi.1 + tol
            && v >= self.varphi.0 - tol
            && v <= self.varphi.1 + tol
    }

    /// Uniform by solid angle: `phi` uniform, `cos(varphi)` uniform.
    pub fn sample(&self, rng: &mut impl Rng) -> Illuminant {
        let phi = rng.gen_range(self.phi.0..=self.phi.1).to_radians();
        let (c_hi, c_lo) = (
            self.varphi.0.to_radians().cos(),
            self.varphi.1.to_radians().cos(),
        );
        let varphi = rng.gen_range(c_lo..=c_hi).acos();
        from_spherical(&SphericalDir { phi, varphi }).expect("cap lies inside the open octant")
    }
}

impl Pool {
    pub const BAND_A: Cap = Cap {
        phi: (35.0, 55.0),
        varphi: (30.0, 45.0),
    };
    pub const BAND_B: Cap = Cap {
        phi: (20.0, 40.0),
        varphi: (60.0, 75.0),
    };
    pub const FULL: Cap = Cap {
        phi: (5.0, 85.0),
        varphi: (5.0, 85.0),
    };

    /// The cap used for scene `index`.
    pub fn cap_for(&self, index: usize) -> Cap {
        match self {
            Pool::Full => Self::FULL,
            Pool::BandA => Self::BAND_A,
            Pool::BandB => Self::BAND_B,
            Pool::BandAb if index.is_multiple_of(2) => Self::BAND_A,
            Pool::BandAb => Self::BAND_B,
        }
    }

    /// Whether `i` could have been drawn from this pool.
    pub fn contains(&self, i: &Illuminant) -> bool {
        match self {
            Pool::BandAb => Self::BAND_A.contains(i) || Self::BAND_B.contains(i),
            other => other.cap_for(0).contains(i),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Pool::Full => "full",
            Pool::BandA => "band-a",
            Pool::BandB => "band-b",
            Pool::BandAb => "band-ab",
        }
    }
}

impl std::str::FromStr for Pool {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Pool::Full),
            "band-a" => Ok(Pool::BandA),
            "band-b" => Ok(Pool::BandB),
            "band-ab" => Ok(Pool::BandAb),
            other => Err(CoreError::Domain(format!("unknown pool `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reflectance {
    /// Independent uniform channels in `[0.05, 1]`.
    Colored,
    /// Achromatic patches with a uniform level in `[0.05, 1]`.
    Grey,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_scenes: usize,
    pub width: usize,
    pub height: usize,
    pub n_patches: usize,
    pub pool: Pool,
    pub reflectance: Reflectance,
    pub noise_std: f64,
    pub base_seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_scenes: 100,
            width: 8,
            height: 8,
            n_patches: 6,
            pool: Pool::Full,
            reflectance: Reflectance::Colored,
            noise_std: 0.005,
            base_seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(CoreError::Domain("scenes must be at least 8x8".into()));
        }
        if self.n_patches == 0 {
            return Err(CoreError::Domain("need at least one patch".into()));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(CoreError::Domain(
                "noise_std must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

const REFLECTANCE_MIN: f64 = 0.05;

/// Renders scene `index`; a pure function of `(config, index)`.
pub fn gen_scene(config: &GenConfig, index: usize) -> Result<Scene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(
        seed::derive_str(config.base_seed, "scene"),
        index as u64,
    ));
    let light = config.pool.cap_for(index).sample(&mut rng);
    let l = light.to_array();

    let (w, h) = (config.width, config.height);
    let sites: Vec<(f64, f64, [f64; 3])> = (0..config.n_patches)
        .map(|_| {
            let x = rng.gen_range(0.0..w as f64);
            let y = rng.gen_range(0.0..h as f64);
            let refl = match config.reflectance {
                Reflectance::Colored => {
                    std::array::from_fn(|_| rng.gen_range(REFLECTANCE_MIN..=1.0))
                }
                Reflectance::Grey => [rng.gen_range(REFLECTANCE_MIN..=1.0); 3],
            };
            (x, y, refl)
        })
        .collect();

    let noise = Normal::new(0.0, config.noise_std).map_err(|e| CoreError::Domain(e.to_string()))?;
    let mut pixels = Vec::with_capacity(w * h * 3);
    for py in 0..h {
        for px in 0..w {
            let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
            let nearest = sites
                .iter()
                .map(|(x, y, _)| (x - cx).powi(2) + (y - cy).powi(2))
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |best, (i, d)| if d < best.1 { (i, d) } else { best },
                )
                .0;
            let refl = sites[nearest].2;
            for c in 0..3 {
                let n = if config.noise_std > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                pixels.push((refl[c] * l[c] + n).max(0.0) as f32);
            }
        }
    }
    Scene::new(w, h, pixels, light)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: GenConfig,
    pub scenes: Vec<Scene>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }
}

pub fn gen_dataset(config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let scenes = (0..config.n_scenes)
        .into_par_iter()
        .map(|i| gen_scene(config, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        config: *config,
        scenes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    scene_count: usize,
    config: GenConfig,
    scenes: Vec<SceneEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SceneEntry {
    index: usize,
    file: String,
    sha256: String,
}

fn scene_file(index: usize) -> String {
    format!("scene_{index:06}.f32")
}

fn pixel_blob(scene: &Scene) -> Vec<u8> {
    scene
        .pixels()
        .iter()
        .flat_map(|p| p.to_le_bytes())
        .collect()
}

/// Writes the dataset directory, creating it if needed.
pub fn save(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let mut entries = Vec::with_capacity(dataset.len());
    let mut labels = String::from("index,r,g,b\n");
    for (i, scene) in dataset.scenes.iter().enumerate() {
        let blob = pixel_blob(scene);
        let file = scene_file(i);
        let path = dir.join(&file);
        fs::write(&path, &blob).map_err(|e| CoreError::io(&path, e))?;
        entries.push(SceneEntry {
            index: i,
            file,
            sha256: hex::encode(Sha256::digest(&blob)),
        });
        let l = scene.label();
        labels.push_str(&format!(
            "{i},{:.16e},{:.16e},{:.16e}\n",
            l.r(),
            l.g(),
            l.b()
        ));
    }
    let manifest = Manifest {
        format_version: DATASET_FORMAT_VERSION,
        scene_count: dataset.len(),
        config: dataset.config,
        scenes: entries,
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| CoreError::format(dir.join(MANIFEST_FILE), e.to_string()))?;
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, text).map_err(|e| CoreError::io(&mpath, e))?;
    let lpath = dir.join(LABELS_FILE);
    fs::write(&lpath, labels).map_err(|e| CoreError::io(&lpath, e))
}

/// Reads a dataset directory, verifying sizes and checksums.
pub fn load(dir: &Path) -> Result<Dataset> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| CoreError::io(&mpath, e))?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| CoreError::format(&mpath, e.to_string()))?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(CoreError::format(
            &mpath,
            format!("unsupported format version {}", manifest.format_version),
        ));
    }
    if manifest.scene_count != manifest.scenes.len() {
        return Err(CoreError::format(
            &mpath,
            "scene count does not match the scene table",
        ));
    }
    let config = manifest.config;

    let lpath = dir.join(LABELS_FILE);
    let labels_text = fs::read_to_string(&lpath).map_err(|e| CoreError::io(&lpath, e))?;
    let labels = parse_labels(&labels_text, &lpath)?;
    if labels.len() != manifest.scene_count {
        return Err(CoreError::format(
            &lpath,
            format!(
                "expected {} labels, found {}",
                manifest.scene_count,
                labels.len()
            ),
        ));
    }

    let expected_len = config.width * config.height * 3 * 4;
    let mut scenes = Vec::with_capacity(manifest.scene_count);
    for (i, (entry, label)) in manifest.scenes.iter().zip(labels).enumerate() {
        if entry.index != i {
            return Err(CoreError::format(
                &mpath,
                format!("scene table out of order at {i}"),
            ));
        }
        // Only plain file names are accepted.
        if entry.file.contains(['/', '\\']) || entry.file.starts_with('.') {
            return Err(CoreError::format(
                &mpath,
                format!("bad scene file name `{}`", entry.file),
            ));
        }
        let path = dir.join(&entry.file);
        let blob = fs::read(&path).map_err(|e| CoreError::io(&path, e))?;
        if blob.len() != expected_len {
            return Err(CoreError::format(
                &path,
                format!("expected {expected_len} bytes, found {}", blob.len()),
            ));
        }
        if hex::encode(Sha256::digest(&blob)) != entry.sha256 {
            return Err(CoreError::format(&path, "checksum mismatch"));
        }
        let pixels = blob
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let scene = Scene::new(config.width, config.height, pixels, label)
            .map_err(|e| CoreError::format(&path, e.to_string()))?;
        scenes.push(scene);
    }
    Ok(Dataset { config, scenes })
}

fn parse_labels(text: &str, path: &Path) -> Result<Vec<Illuminant>> {
    let mut lines = text.lines();
    if lines.next() != Some("index,r,g,b") {
        return Err(CoreError::format(path, "missing or wrong header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |why: &str| CoreError::format(path, format!("row {i}: {why}"));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            if fields[0].parse::<usize>().ok() != Some(i) {
                return Err(bad("index out of sequence"));
            }
            let v: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad("unparsable number")))
                .collect::<Result<_>>()?;
            Illuminant::from_unit(v[0], v[1], v[2]).map_err(|e| bad(&e.to_string()))
        })
        .collect()
}

/// Contiguous, order-preserving folds whose sizes differ by at most one;
/// the first `n % k` folds take the extra element.
pub fn folds(n_scenes: usize, k: usize) -> Result<Vec<Range<usize>>> {
    if k < 2 {
        return Err(CoreError::Domain("need at least two folds".into()));
    }
    if k > n_scenes {
        return Err(CoreError::Domain(format!(
            "{k} folds for {n_scenes} scenes"
        )));
    }
    let (base, extra) = (n_scenes / k, n_scenes % k);
    let mut start = 0;
    Ok((0..k)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}
