use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use mcde_core::bench::{self, BenchConfig};
use mcde_core::colorcore::{
    apply_von_kries, recovery_error, reproduction_error, to_spherical, Illuminant,
};
use mcde_core::datagen::{self, Dataset, GenConfig, Pool};
use mcde_core::ensemble::{mcde, McdeConfig};
use mcde_core::mcdropout::{McEstimate, StochasticEstimator};
use mcde_core::nnet::{self, Arch, ArchConfig, ModelCard, Network, TrainConfig};
use mcde_core::seed;

use crate::{BenchArgs, EstimateArgs, GenDataArgs, TrainArgs};

/// Invalid invocation: reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

fn write_echo<T: Serialize>(dir: &Path, config: &T) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("config.toml");
    fs::write(&path, toml::to_string_pretty(config)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn load_dataset(path: Option<&PathBuf>) -> Result<Dataset> {
    let path =
        path.ok_or_else(|| usage("a dataset is required (--data or `data` in the config)"))?;
    datagen::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

pub fn gen_data(a: GenDataArgs) -> Result<()> {
    let mut cfg: GenConfig = read_config(a.config.as_deref())?;
    if let Some(v) = a.scenes {
        cfg.n_scenes = v;
    }
    if let Some(v) = a.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = a.pool {
        cfg.pool = v;
    }
    if let Some(v) = a.width {
        cfg.width = v;
    }
    if let Some(v) = a.height {
        cfg.height = v;
    }
    if let Some(v) = a.patches {
        cfg.n_patches = v;
    }
    if let Some(v) = a.noise {
        cfg.noise_std = v;
    }
    if let Some(v) = a.reflectance {
        cfg.reflectance = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let dataset = datagen::gen_dataset(&cfg)?;
    datagen::save(&dataset, &a.out)
        .with_context(|| format!("writing dataset {}", a.out.display()))?;
    let (mut phi, mut varphi) = (
        (f64::INFINITY, f64::NEG_INFINITY),
        (f64::INFINITY, f64::NEG_INFINITY),
    );
    for s in &dataset.scenes {
        let d = to_spherical(&s.label());
        let (p, v) = (d.phi.to_degrees(), d.varphi.to_degrees());
        phi = (phi.0.min(p), phi.1.max(p));
        varphi = (varphi.0.min(v), varphi.1.max(v));
    }
    println!(
        "wrote {} scenes ({}) to {}",
        dataset.len(),
        cfg.pool.name(),
        a.out.display()
    );
    println!(
        "label phi {:.2}..{:.2} deg, varphi {:.2}..{:.2} deg",
        phi.0, phi.1, varphi.0, varphi.1
    );
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct TrainRun {
    data: Option<PathBuf>,
    arch: Option<Arch>,
    train_pool: Option<Pool>,
    arch_config: ArchConfig,
    train: TrainConfig,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut run: TrainRun = read_config(a.config.as_deref())?;
    if a.data.is_some() {
        run.data = a.data;
    }
    if a.arch.is_some() {
        run.arch = a.arch;
    }
    if a.train_pool.is_some() {
        run.train_pool = a.train_pool;
    }
    if let Some(v) = a.seed {
        run.train.seed = v;
    }
    if let Some(v) = a.epochs {
        run.train.epochs = v;
    }
    if let Some(v) = a.lr {
        run.train.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        run.train.batch_size = v;
    }
    if let Some(v) = a.channels {
        run.arch_config.channels = v;
    }
    if let Some(v) = a.hidden {
        run.arch_config.hidden = v;
    }
    if let Some(v) = a.dropout {
        run.arch_config.dropout = v;
    }
    let arch = run
        .arch
        .ok_or_else(|| usage("an architecture is required (--arch g-net|m-net)"))?;
    let dataset = load_dataset(run.data.as_ref())?;
    let scenes: Vec<_> = dataset
        .scenes
        .iter()
        .filter(|s| run.train_pool.is_none_or(|p| p.contains(&s.label())))
        .collect();
    if scenes.is_empty() {
        return Err(usage("no training scenes match the pool filter"));
    }

    let net = arch
        .build(
            &run.arch_config,
            seed::derive_str(run.train.seed, "model-init"),
        )
        .map_err(|e| usage(e.to_string()))?;
    let outcome = nnet::train(net, &scenes, &run.train)?;

    write_echo(&a.out, &run)?;
    let card = ModelCard {
        arch: Some(arch.name().to_string()),
        arch_config: Some(run.arch_config),
        training: Some(run.train),
        ..ModelCard::describe(&outcome.network)
    };
    let model_path = a.out.join("network.bin");
    nnet::save_network(&model_path, &outcome.network, &card)?;
    let mut trace = String::from("epoch,loss\n");
    for (i, l) in outcome.loss_trace.iter().enumerate() {
        trace.push_str(&format!("{i},{l}\n"));
    }
    fs::write(a.out.join("loss.csv"), trace)?;
    println!(
        "trained {} on {} scenes, final loss {:.6}, wrote {}",
        arch.name(),
        scenes.len(),
        outcome.loss_trace.last().copied().unwrap_or(f64::NAN),
        model_path.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct EstimateRun {
    data: Option<PathBuf>,
    models: Vec<PathBuf>,
    corrected: bool,
    mcde: McdeConfig,
}

/// One line of estimate output.
#[derive(Debug, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub sample: usize,
    pub label: Illuminant,
    pub fused: Illuminant,
    pub variant: String,
    pub weights: Vec<f64>,
    pub per_model: Vec<McEstimate>,
    pub recovery_error: f64,
    pub reproduction_error: f64,
}

pub fn estimate(a: EstimateArgs) -> Result<()> {
    let mut run: EstimateRun = read_config(a.config.as_deref())?;
    if a.data.is_some() {
        run.data = a.data;
    }
    if !a.models.is_empty() {
        run.models = a.models;
    }
    if a.corrected {
        run.corrected = true;
    }
    if let Some(v) = a.seed {
        run.mcde.base_seed = v;
    }
    if let Some(v) = a.nu {
        run.mcde.nu = v;
    }
    if let Some(v) = a.variant {
        run.mcde.variant = v;
    }
    if run.models.is_empty() {
        return Err(usage("at least one --model is required"));
    }
    if run.mcde.nu == 0 {
        return Err(usage("--nu must be at least 1"));
    }
    if run.corrected && a.out.is_none() {
        return Err(usage("corrected output needs --out"));
    }
    let dataset = load_dataset(run.data.as_ref())?;
    let nets: Vec<Network> = run
        .models
        .iter()
        .map(|p| {
            Ok(nnet::load_network(p)
                .with_context(|| format!("loading model {}", p.display()))?
                .0)
        })
        .collect::<Result<_>>()?;
    let models: Vec<&dyn StochasticEstimator> =
        nets.iter().map(|n| n as &dyn StochasticEstimator).collect();

    let mut lines = String::new();
    let mut corrected = Vec::new();
    for (i, scene) in dataset.scenes.iter().enumerate() {
        let cfg = McdeConfig {
            base_seed: bench::eval_seed(run.mcde.base_seed, i),
            ..run.mcde
        };
        let out = mcde(&models, scene, &cfg).with_context(|| format!("scene {i}"))?;
        let gt = scene.label();
        let rec = EstimateRecord {
            sample: i,
            label: gt,
            fused: out.fused,
            variant: run.mcde.variant.name().to_string(),
            weights: out.weights,
            per_model: out.per_model,
            recovery_error: recovery_error(&gt, &out.fused),
            reproduction_error: reproduction_error(&gt, &out.fused)?,
        };
        lines.push_str(&serde_json::to_string(&rec)?);
        lines.push('\n');
        if run.corrected {
            corrected.push(apply_von_kries(scene, &out.fused));
        }
    }

    match &a.out {
        None => std::io::stdout().lock().write_all(lines.as_bytes())?,
        Some(dir) => {
            write_echo(dir, &run)?;
            fs::write(dir.join("estimates.jsonl"), &lines)?;
            if run.corrected {
                let cdir = dir.join("corrected");
                fs::create_dir_all(&cdir)?;
                for (i, px) in corrected.iter().enumerate() {
                    let bytes: Vec<u8> = px.iter().flat_map(|v| v.to_le_bytes()).collect();
                    fs::write(cdir.join(format!("scene_{i:06}.f32")), bytes)?;
                }
            }
            println!("wrote {} records to {}", dataset.len(), dir.display());
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct BenchRun {
    data: Option<PathBuf>,
    bench: BenchConfig,
    dataset: GenConfig,
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let mut run: BenchRun = match &a.config {
        Some(p) => read_config(Some(p))?,
        None => {
            let (dataset, bench) =
                bench::two_band_scenario(a.seed.unwrap_or(0), a.scenes.unwrap_or(400));
            BenchRun {
                data: None,
                bench,
                dataset,
            }
        }
    };
    if a.data.is_some() {
        run.data = a.data;
    }
    if let Some(v) = a.seed {
        run.bench.seed = v;
        run.dataset.base_seed = v;
    }
    if let Some(v) = a.scenes {
        if run.data.is_some() {
            return Err(usage("--scenes only applies to generated datasets"));
        }
        run.dataset.n_scenes = v;
    }
    if let Some(v) = a.k {
        run.bench.k = v;
    }
    if let Some(v) = a.nu {
        run.bench.nu = v;
    }
    if run.bench.k < 2 {
        return Err(usage("--k must be at least 2"));
    }
    if run.bench.nu == 0 {
        return Err(usage("--nu must be at least 1"));
    }
    let dataset = match &run.data {
        Some(p) => load_dataset(Some(p))?,
        None => {
            run.dataset.validate().map_err(|e| usage(e.to_string()))?;
            datagen::gen_dataset(&run.dataset)?
        }
    };
    let report = bench::crossval(&dataset, &run.bench)?;
    bench::write_report(&report, &a.out)
        .with_context(|| format!("writing report {}", a.out.display()))?;
    print!("{}", bench::render_text(&report));
    Ok(())
}
