//! Cross-validated evaluation and report files.
//!
//! [`crossval`] trains every configured model on `k - 1` contiguous folds,
//! evaluates all methods on the held-out fold and concatenates the
//! per-sample errors. Methods always appear in this order: baselines,
//! single models (their MC mean), `mcde-linear`, `mcde-log`, `ideal`.
//!
//! Report directory:
//!
//! ```text
//! config.toml                 resolved bench config and dataset config
//! summary.csv                 method,metric,best25,mean,median,trimean,worst25,worst10,worst5
//! summary_<metric>.csv        the rows of summary.csv for one metric
//! per_sample.csv              sample,method,metric,error_deg
//! per_model.csv               sample,model,mu,raw_log_confidence,weight_linear,weight_log
//! scatter_<metric>_<a>_vs_<b>.csv          sample,x,y  (x: error of a, y: error of b)
//! scatter_<metric>_<model>_confidence.csv  sample,x,y  (x: raw log-inverse score, y: error)
//! report.txt                  tables rounded to one decimal
//! ```
//!
//! Numbers in the CSV files use the shortest decimal form that parses back
//! to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{grey_world, shades_of_grey, DEFAULT_MINKOWSKI_P};
use crate::colorcore::{Illuminant, Metric, Scene};
use crate::datagen::{folds, Dataset, GenConfig, Pool};
use crate::ensemble::{fuse, ideal_combine, model_seed, raw_confidences, ConfidenceFn, Variant};
use crate::error::{CoreError, Result};
use crate::mcdropout::{mc_estimate, McEstimate, DEFAULT_PASSES};
use crate::nnet::{train, Arch, ArchConfig, Network, TrainConfig};
use crate::seed;

pub const IDEAL: &str = "ideal";

/// Summary statistics of a list of angular errors, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub best25_mean: f64,
    pub mean: f64,
    pub median: f64,
    pub trimean: f64,
    pub worst25_mean: f64,
    pub worst10_mean: f64,
    pub worst5_mean: f64,
}

impl ErrorStats {
    pub const COLUMNS: [&'static str; 7] = [
        "best25", "mean", "median", "trimean", "worst25", "worst10", "worst5",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.best25_mean,
            self.mean,
            self.median,
            self.trimean,
            self.worst25_mean,
            self.worst10_mean,
            self.worst5_mean,
        ]
    }
}

/// Linear interpolation between order statistics at position `(n - 1) q`.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    (1.0 - frac) * sorted[lo] + frac * sorted[hi]
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `ceil(n * percent / 100)`, at least one.
fn tail_len(n: usize, percent: usize) -> usize {
    (n * percent).div_ceil(100).max(1)
}

/// Error statistics. The best/worst `Q%` means average `ceil(Q n / 100)`
/// elements at the respective end of the sorted list; quartiles use
/// linear interpolation; trimean is `(Q1 + 2 Q2 + Q3) / 4`.
pub fn stats(errors: &[f64]) -> Result<ErrorStats> {
    if errors.is_empty() {
        return Err(CoreError::Domain("no errors to summarize".into()));
    }
    if errors.iter().any(|e| e.is_nan()) {
        return Err(CoreError::Domain("error list contains NaN".into()));
    }
    let mut s = errors.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let worst = |p: usize| mean_of(&s[n - tail_len(n, p)..]);
    let (q1, q2, q3) = (quantile(&s, 0.25), quantile(&s, 0.5), quantile(&s, 0.75));
    Ok(ErrorStats {
        best25_mean: mean_of(&s[..tail_len(n, 25)]),
        mean: mean_of(&s),
        median: q2,
        trimean: (q1 + 2.0 * q2 + q3) / 4.0,
        worst25_mean: worst(25),
        worst10_mean: worst(10),
        worst5_mean: worst(5),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    GreyWorld,
    ShadesOfGrey,
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::GreyWorld => "grey-world",
            Baseline::ShadesOfGrey => "shades-of-grey",
        }
    }

    fn estimate(&self, scene: &Scene) -> Result<Illuminant> {
        match self {
            Baseline::GreyWorld => grey_world(scene),
            Baseline::ShadesOfGrey => shades_of_grey(scene, DEFAULT_MINKOWSKI_P),
        }
    }
}

/// One trainable model in the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub arch: Arch,
    #[serde(default)]
    pub arch_config: ArchConfig,
    /// Train only on scenes whose label lies in this pool.
    #[serde(default)]
    pub train_pool: Option<Pool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub k: usize,
    pub nu: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub baselines: Vec<Baseline>,
    pub models: Vec<ModelSpec>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            k: 10,
            nu: DEFAULT_PASSES,
            seed: 0,
            train: TrainConfig::default(),
            baselines: vec![Baseline::GreyWorld, Baseline::ShadesOfGrey],
            models: vec![],
        }
    }
}

impl BenchConfig {
    /// Names of all methods in report order.
    pub fn method_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .baselines
            .iter()
            .map(|b| b.name().to_string())
            .collect();
        names.extend(self.models.iter().map(|m| m.name.clone()));
        if !self.models.is_empty() {
            names.extend(["mcde-linear", "mcde-log", IDEAL].map(String::from));
        }
        names
    }

    fn validate(&self) -> Result<()> {
        let names = self.method_names();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(CoreError::Domain(format!("duplicate method name `{n}`")));
            }
            if n.is_empty() || n.contains([',', '/', '\\', '\n']) {
                return Err(CoreError::Domain(format!("invalid method name `{n}`")));
            }
        }
        if self.nu == 0 {
            return Err(CoreError::Domain("nu must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything measured on one test sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleResult {
    pub sample: usize,
    pub fold: usize,
    /// `[recovery, reproduction]` per method, in report order.
    pub errors: Vec<[f64; 2]>,
    pub per_model: Vec<McEstimate>,
    pub raw_log_confidence: Vec<f64>,
    pub weights_linear: Vec<f64>,
    pub weights_log: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub metric: Metric,
    pub stats: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub dataset: GenConfig,
    pub methods: Vec<String>,
    pub samples: Vec<SampleResult>,
    pub summary: Vec<SummaryRow>,
    /// Final training loss per fold and model.
    pub final_train_loss: Vec<Vec<f64>>,
}

fn metric_slot(m: Metric) -> usize {
    match m {
        Metric::Recovery => 0,
        Metric::Reproduction => 1,
    }
}

impl BenchReport {
    pub fn method_index(&self, name: &str) -> Result<usize> {
        self.methods
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| CoreError::UnknownMethod(name.to_string()))
    }

    pub fn errors(&self, method: &str, metric: Metric) -> Result<Vec<f64>> {
        let i = self.method_index(method)?;
        Ok(self
            .samples
            .iter()
            .map(|s| s.errors[i][metric_slot(metric)])
            .collect())
    }

    pub fn stats_for(&self, method: &str, metric: Metric) -> Result<ErrorStats> {
        self.summary
            .iter()
            .find(|r| r.method == method && r.metric == metric)
            .map(|r| r.stats)
            .ok_or_else(|| CoreError::UnknownMethod(method.to_string()))
    }

    pub fn model_names(&self) -> Vec<String> {
        self.config.models.iter().map(|m| m.name.clone()).collect()
    }
}

/// Seeds for fold `fold`, model `model`.
fn model_seeds(run_seed: u64, fold: usize, model: usize) -> (u64, u64) {
    let key = ((fold as u64) << 32) | model as u64;
    (
        seed::derive(seed::derive_str(run_seed, "model-init"), key),
        seed::derive(seed::derive_str(run_seed, "model-train"), key),
    )
}

/// MC seed base for test sample `sample`; model `i` then uses
/// [`model_seed`]`(base, i)`.
pub fn eval_seed(run_seed: u64, sample: usize) -> u64 {
    seed::derive(seed::derive_str(run_seed, "eval"), sample as u64)
}

/// Trains model `spec` on the given scenes with the seeds the benchmark
/// uses for `(fold, model_index)`.
pub fn train_model(
    spec: &ModelSpec,
    scenes: &[&Scene],
    config: &BenchConfig,
    fold: usize,
    model_index: usize,
) -> Result<(Network, f64)> {
    let subset: Vec<&Scene> = scenes
        .iter()
        .copied()
        .filter(|s| spec.train_pool.is_none_or(|p| p.contains(&s.label())))
        .collect();
    if subset.is_empty() {
        return Err(CoreError::Domain(format!(
            "no training scenes for model `{}`",
            spec.name
        )));
    }
    let (init_seed, train_seed) = model_seeds(config.seed, fold, model_index);
    let net = spec.arch.build(&spec.arch_config, init_seed)?;
    let tc = TrainConfig {
        seed: train_seed,
        ..config.train
    };
    let out = train(net, &subset, &tc)?;
    let last = out.loss_trace.last().copied().unwrap_or(f64::NAN);
    Ok((out.network, last))
}

/// Evaluates every method on one scene.
pub fn evaluate_sample(
    config: &BenchConfig,
    nets: &[Network],
    scene: &Scene,
    sample: usize,
    fold: usize,
) -> Result<SampleResult> {
    let gt = scene.label();
    let mut estimates: Vec<Illuminant> = Vec::new();
    for b in &config.baselines {
        estimates.push(b.estimate(scene)?);
    }
    let mut errors: Vec<[f64; 2]> = Vec::new();
    let mut per_model = Vec::with_capacity(nets.len());
    let mut raw_log_confidence = Vec::new();
    let mut weights_linear = Vec::new();
    let mut weights_log = Vec::new();

    if !nets.is_empty() {
        let base = eval_seed(config.seed, sample);
        for (i, net) in nets.iter().enumerate() {
            per_model.push(mc_estimate(net, scene, config.nu, model_seed(base, i))?);
        }
        estimates.extend(per_model.iter().map(|e| e.mean));
        let (fused_lin, w_lin) = fuse(&per_model, Variant::Linear)?;
        let (fused_log, w_log) = fuse(&per_model, Variant::Log)?;
        estimates.push(fused_lin);
        estimates.push(fused_log);
        weights_linear = w_lin;
        weights_log = w_log;
        let mus: Vec<f64> = per_model.iter().map(|e| e.mu).collect();
        raw_log_confidence = raw_confidences(&mus, &ConfidenceFn::new(Variant::Log));
    }
    for e in &estimates {
        errors.push([
            Metric::Recovery.eval(&gt, e)?,
            Metric::Reproduction.eval(&gt, e)?,
        ]);
    }
    if !nets.is_empty() {
        let means: Vec<Illuminant> = per_model.iter().map(|e| e.mean).collect();
        let mut ideal = [0.0; 2];
        for metric in Metric::ALL {
            let (_, chosen) = ideal_combine(&means, &gt, metric)?;
            ideal[metric_slot(metric)] = metric.eval(&gt, &chosen)?;
        }
        errors.push(ideal);
    }
    Ok(SampleResult {
        sample,
        fold,
        errors,
        per_model,
        raw_log_confidence,
        weights_linear,
        weights_log,
    })
}

/// Non-random `k`-fold cross-validation over the dataset.
///
/// Folds run in parallel on the current rayon pool; results are merged in
/// fold order, so the report does not depend on the thread count.
pub fn crossval(dataset: &Dataset, config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let ranges = folds(dataset.len(), config.k)?;
    let per_fold: Vec<(Vec<SampleResult>, Vec<f64>)> = ranges
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            run_fold(dataset, config, f, test.clone()).map_err(|e| CoreError::Fold {
                fold: f,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut samples = Vec::with_capacity(dataset.len());
    let mut final_train_loss = Vec::with_capacity(per_fold.len());
    for (s, l) in per_fold {
        samples.extend(s);
        final_train_loss.push(l);
    }
    let methods = config.method_names();
    let mut summary = Vec::new();
    for (i, m) in methods.iter().enumerate() {
        for metric in Metric::ALL {
            let errs: Vec<f64> = samples
                .iter()
                .map(|s| s.errors[i][metric_slot(metric)])
                .collect();
            summary.push(SummaryRow {
                method: m.clone(),
                metric,
                stats: stats(&errs)?,
            });
        }
    }
    Ok(BenchReport {
        config: config.clone(),
        dataset: dataset.config,
        methods,
        samples,
        summary,
        final_train_loss,
    })
}

fn run_fold(
    dataset: &Dataset,
    config: &BenchConfig,
    fold: usize,
    test: std::ops::Range<usize>,
) -> Result<(Vec<SampleResult>, Vec<f64>)> {
    let train_scenes: Vec<&Scene> = dataset
        .scenes
        .iter()
        .enumerate()
        .filter(|(i, _)| !test.contains(i))
        .map(|(_, s)| s)
        .collect();
    let trained = config
        .models
        .par_iter()
        .enumerate()
        .map(|(j, spec)| train_model(spec, &train_scenes, config, fold, j))
        .collect::<Result<Vec<_>>>()?;
    let (nets, losses): (Vec<Network>, Vec<f64>) = trained.into_iter().unzip();
    let results = test
        .into_par_iter()
        .map(|i| evaluate_sample(config, &nets, &dataset.scenes[i], i, fold))
        .collect::<Result<Vec<_>>>()?;
    Ok((results, losses))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScatterKind {
    /// Error of method `a` (x) against error of method `b` (y).
    ErrVsErr {
        a: String,
        b: String,
        metric: Metric,
    },
    /// Raw log-inverse confidence score of `model` (x) against its error (y).
    ErrorVsConfidence { model: String, metric: Metric },
}

impl ScatterKind {
    pub fn file_name(&self) -> String {
        match self {
            ScatterKind::ErrVsErr { a, b, metric } => {
                format!("scatter_{}_{a}_vs_{b}.csv", metric.name())
            }
            ScatterKind::ErrorVsConfidence { model, metric } => {
                format!("scatter_{}_{model}_confidence.csv", metric.name())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterRow {
    pub sample: usize,
    pub x: f64,
    pub y: f64,
}

/// Plot-ready points, one per test sample.
pub fn scatter_export(report: &BenchReport, kind: &ScatterKind) -> Result<Vec<ScatterRow>> {
    match kind {
        ScatterKind::ErrVsErr { a, b, metric } => {
            let xa = report.errors(a, *metric)?;
            let yb = report.errors(b, *metric)?;
            Ok(report
                .samples
                .iter()
                .zip(xa.into_iter().zip(yb))
                .map(|(s, (x, y))| ScatterRow {
                    sample: s.sample,
                    x,
                    y,
                })
                .collect())
        }
        ScatterKind::ErrorVsConfidence { model, metric } => {
            let j = report
                .config
                .models
                .iter()
                .position(|m| &m.name == model)
                .ok_or_else(|| CoreError::UnknownMethod(model.clone()))?;
            let errs = report.errors(model, *metric)?;
            Ok(report
                .samples
                .iter()
                .zip(errs)
                .map(|(s, y)| ScatterRow {
                    sample: s.sample,
                    x: s.raw_log_confidence[j],
                    y,
                })
                .collect())
        }
    }
}

/// Scatter files written with every report.
pub fn default_scatters(report: &BenchReport) -> Vec<ScatterKind> {
    let models = report.model_names();
    let mut kinds = Vec::new();
    for metric in Metric::ALL {
        for (i, a) in models.iter().enumerate() {
            for b in &models[i + 1..] {
                kinds.push(ScatterKind::ErrVsErr {
                    a: a.clone(),
                    b: b.clone(),
                    metric,
                });
            }
        }
        for m in &models {
            kinds.push(ScatterKind::ErrorVsConfidence {
                model: m.clone(),
                metric,
            });
        }
    }
    kinds
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    bench: &'a BenchConfig,
    dataset: &'a GenConfig,
}

pub fn summary_csv(report: &BenchReport) -> String {
    summary_rows_csv(report.summary.iter())
}

/// Summary rows of one metric.
pub fn metric_csv(report: &BenchReport, metric: Metric) -> String {
    summary_rows_csv(report.summary.iter().filter(|r| r.metric == metric))
}

fn summary_rows_csv<'a>(rows: impl Iterator<Item = &'a SummaryRow>) -> String {
    let mut out = format!("method,metric,{}\n", ErrorStats::COLUMNS.join(","));
    for row in rows {
        let vals: Vec<String> = row.stats.values().iter().map(f64::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{}",
            row.method,
            row.metric.name(),
            vals.join(",")
        );
    }
    out
}

pub fn per_sample_csv(report: &BenchReport) -> String {
    let mut out = String::from("sample,method,metric,error_deg\n");
    for s in &report.samples {
        for (i, m) in report.methods.iter().enumerate() {
            for metric in Metric::ALL {
                let _ = writeln!(
                    out,
                    "{},{m},{},{}",
                    s.sample,
                    metric.name(),
                    s.errors[i][metric_slot(metric)]
                );
            }
        }
    }
    out
}

fn per_model_csv(report: &BenchReport) -> String {
    let mut out = String::from("sample,model,mu,raw_log_confidence,weight_linear,weight_log\n");
    for s in &report.samples {
        for (j, m) in report.config.models.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.sample,
                m.name,
                s.per_model[j].mu,
                s.raw_log_confidence[j],
                s.weights_linear[j],
                s.weights_log[j]
            );
        }
    }
    out
}

fn scatter_csv(rows: &[ScatterRow]) -> String {
    let mut out = String::from("sample,x,y\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.sample, r.x, r.y);
    }
    out
}

/// Human-readable tables, one decimal.
pub fn render_text(report: &BenchReport) -> String {
    let mut out = String::new();
    let width = report
        .methods
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(6)
        .max(6);
    for metric in Metric::ALL {
        let _ = writeln!(
            out,
            "{} angular error (degrees), n = {}",
            metric.name(),
            report.samples.len()
        );
        let _ = write!(out, "{:<width$}", "method");
        for c in ErrorStats::COLUMNS {
            let _ = write!(out, " {c:>8}");
        }
        out.push('\n');
        for row in report.summary.iter().filter(|r| r.metric == metric) {
            let _ = write!(out, "{:<width$}", row.method);
            for v in row.stats.values() {
                let _ = write!(out, " {v:>8.1}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CoreError::io(&path, e))
}

/// Writes all report files into `dir`, creating it if needed.
pub fn write_report(report: &BenchReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let echo = ConfigEcho {
        bench: &report.config,
        dataset: &report.dataset,
    };
    let cfg = toml::to_string_pretty(&echo)
        .map_err(|e| CoreError::format(dir.join("config.toml"), e.to_string()))?;
    write_file(dir, "config.toml", &cfg)?;
    write_file(dir, "summary.csv", &summary_csv(report))?;
    for metric in Metric::ALL {
        write_file(
            dir,
            &format!("summary_{}.csv", metric.name()),
            &metric_csv(report, metric),
        )?;
    }
    write_file(dir, "per_sample.csv", &per_sample_csv(report))?;
    if !report.config.models.is_empty() {
        write_file(dir, "per_model.csv", &per_model_csv(report))?;
    }
    for kind in default_scatters(report) {
        write_file(
            dir,
            &kind.file_name(),
            &scatter_csv(&scatter_export(report, &kind)?),
        )?;
    }
    write_file(dir, "report.txt", &render_text(report))
}

/// The two-band experiment: a mean-pooling model trained only on band A
/// scenes and a max-pooling model trained only on band B scenes, evaluated
/// on a dataset alternating between the two bands.
pub fn two_band_scenario(seed: u64, n_scenes: usize) -> (GenConfig, BenchConfig) {
    let data = GenConfig {
        n_scenes,
        pool: Pool::BandAb,
        base_seed: seed,
        ..GenConfig::default()
    };
    let arch_config = ArchConfig::default();
    let bench = BenchConfig {
        k: 10,
        nu: DEFAULT_PASSES,
        seed,
        train: TrainConfig {
            epochs: 60,
            learning_rate: 0.5,
            batch_size: 8,
            seed: 0,
        },
        baselines: vec![Baseline::GreyWorld, Baseline::ShadesOfGrey],
        models: vec![
            ModelSpec {
                name: Arch::GNet.name().into(),
                arch: Arch::GNet,
                arch_config,
                train_pool: Some(Pool::BandA),
            },
            ModelSpec {
                name: Arch::MNet.name().into(),
                arch: Arch::MNet,
                arch_config,
                train_pool: Some(Pool::BandB),
            },
        ],
    };
    (data, bench)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_dataset, Reflectance};
    use proptest::prelude::*;

    #[test]
    fn stats_of_one_to_eight() {
        let xs: Vec<f64> = (1..=8).map(f64::from).collect();
        let s = stats(&xs).unwrap();
        assert_eq!(s.best25_mean, 1.5);
        assert_eq!(s.mean, 4.5);
        assert_eq!(s.median, 4.5);
        assert_eq!(s.trimean, 4.5);
        assert_eq!(s.worst25_mean, 7.5);
        assert_eq!(s.worst10_mean, 8.0);
        assert_eq!(s.worst5_mean, 8.0);
        assert_eq!(quantile(&xs, 0.25), 2.75);
        assert_eq!(quantile(&xs, 0.75), 6.25);
    }

    #[test]
    fn stats_single_and_constant() {
        let s = stats(&[3.7]).unwrap();
        assert!(s.values().iter().all(|v| *v == 3.7));
        let s = stats(&[2.5; 12]).unwrap();
        assert!(s.values().iter().all(|v| *v == 2.5));
        let s = stats(&[0.1; 7]).unwrap();
        assert!(s.values().iter().all(|v| (v - 0.1).abs() < 1e-15));
        assert!(stats(&[]).is_err());
    }

    #[test]
    fn tail_sizes_round_up() {
        assert_eq!(tail_len(8, 25), 2);
        assert_eq!(tail_len(9, 25), 3);
        assert_eq!(tail_len(20, 5), 1);
        assert_eq!(tail_len(21, 5), 2);
        assert_eq!(tail_len(3, 10), 1);
    }

    proptest! {
        #[test]
        fn stats_permutation_invariant_and_ordered(mut xs in proptest::collection::vec(0.0f64..40.0, 1..60), rot in 0usize..60) {
            let a = stats(&xs).unwrap();
            let k = rot % xs.len();
            xs.rotate_left(k);
            xs.reverse();
            let b = stats(&xs).unwrap();
            prop_assert_eq!(a, b);
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(a.best25_mean <= a.mean + 1e-12 && a.mean <= a.worst25_mean + 1e-12);
            prop_assert!(a.median >= lo && a.median <= hi);
            prop_assert!(a.trimean >= lo - 1e-12 && a.trimean <= hi + 1e-12);
            prop_assert!(a.worst25_mean <= a.worst10_mean + 1e-12 && a.worst10_mean <= a.worst5_mean + 1e-12);
        }

        #[test]
        fn stats_monotone_under_pointwise_minimum(pairs in proptest::collection::vec((0.0f64..30.0, 0.0f64..30.0), 1..50)) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let min: Vec<f64> = pairs.iter().map(|p| p.0.min(p.1)).collect();
            let sa = stats(&a).unwrap().values();
            let sm = stats(&min).unwrap().values();
            for (m, x) in sm.iter().zip(sa) {
                prop_assert!(*m <= x);
            }
        }
    }

    fn grey_dataset(n: usize) -> Dataset {
        gen_dataset(&GenConfig {
            n_scenes: n,
            n_patches: 4,
            reflectance: Reflectance::Grey,
            noise_std: 0.0,
            base_seed: 3,
            ..GenConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn grey_world_is_exact_on_grey_scenes() {
        let d = grey_dataset(20);
        let cfg = BenchConfig {
            k: 4,
            baselines: vec![Baseline::GreyWorld],
            ..BenchConfig::default()
        };
        let r = crossval(&d, &cfg).unwrap();
        assert_eq!(r.methods, vec!["grey-world"]);
        for metric in Metric::ALL {
            assert!(r
                .errors("grey-world", metric)
                .unwrap()
                .iter()
                .all(|e| *e < 1e-3));
        }
    }

    fn tiny_models_config() -> BenchConfig {
        let arch_config = ArchConfig {
            channels: 3,
            hidden: 4,
            dropout: 0.3,
        };
        BenchConfig {
            k: 2,
            nu: 4,
            seed: 11,
            train: TrainConfig {
                epochs: 2,
                learning_rate: 0.2,
                batch_size: 4,
                seed: 0,
            },
            baselines: vec![Baseline::GreyWorld],
            models: vec![
                ModelSpec {
                    name: "a".into(),
                    arch: Arch::GNet,
                    arch_config,
                    train_pool: None,
                },
                ModelSpec {
                    name: "b".into(),
                    arch: Arch::MNet,
                    arch_config,
                    train_pool: None,
                },
            ],
        }
    }

    fn small_dataset() -> Dataset {
        gen_dataset(&GenConfig {
            n_scenes: 20,
            pool: Pool::BandAb,
            base_seed: 5,
            ..GenConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn two_fold_run_matches_manual_sequence() {
        let d = small_dataset();
        let cfg = tiny_models_config();
        let report = crossval(&d, &cfg).unwrap();
        assert_eq!(
            report.methods,
            vec!["grey-world", "a", "b", "mcde-linear", "mcde-log", "ideal"]
        );

        for (fold, test) in [(0usize, 0..10usize), (1, 10..20)] {
            let train_set: Vec<&Scene> = d
                .scenes
                .iter()
                .enumerate()
                .filter(|(i, _)| !test.contains(i))
                .map(|(_, s)| s)
                .collect();
            let nets: Vec<Network> = cfg
                .models
                .iter()
                .enumerate()
                .map(|(j, m)| train_model(m, &train_set, &cfg, fold, j).unwrap().0)
                .collect();
            for i in test {
                let scene = &d.scenes[i];
                let gt = scene.label();
                let base = eval_seed(cfg.seed, i);
                let ests: Vec<McEstimate> = nets
                    .iter()
                    .enumerate()
                    .map(|(j, n)| mc_estimate(n, scene, cfg.nu, model_seed(base, j)).unwrap())
                    .collect();
                let row = &report.samples[i];
                assert_eq!(row.fold, fold);
                assert_eq!(row.per_model, ests);
                let (fused_log, _) = fuse(&ests, Variant::Log).unwrap();
                let want = crate::colorcore::recovery_error(&gt, &fused_log);
                assert_eq!(
                    report.errors("mcde-log", Metric::Recovery).unwrap()[i],
                    want
                );
                let gw = crate::colorcore::recovery_error(&gt, &grey_world(scene).unwrap());
                assert_eq!(
                    report.errors("grey-world", Metric::Recovery).unwrap()[i],
                    gw
                );
                let a = crate::colorcore::recovery_error(&gt, &ests[0].mean);
                let b = crate::colorcore::recovery_error(&gt, &ests[1].mean);
                assert_eq!(
                    report.errors("ideal", Metric::Recovery).unwrap()[i],
                    a.min(b)
                );
            }
        }
    }

    #[test]
    fn ideal_dominates_single_models() {
        let report = crossval(&small_dataset(), &tiny_models_config()).unwrap();
        for metric in Metric::ALL {
            let ideal = report.stats_for(IDEAL, metric).unwrap().values();
            for m in report.model_names() {
                let single = report.stats_for(&m, metric).unwrap().values();
                for (a, b) in ideal.iter().zip(single) {
                    assert!(*a <= b);
                }
            }
        }
    }

    #[test]
    fn report_is_independent_of_thread_count() {
        let d = small_dataset();
        let cfg = tiny_models_config();
        let run = |t: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap()
                .install(|| crossval(&d, &cfg).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a, b);
        assert_eq!(per_sample_csv(&a), per_sample_csv(&b));
    }

    #[test]
    fn scatter_rows_join_the_per_sample_table() {
        let report = crossval(&small_dataset(), &tiny_models_config()).unwrap();
        let kind = ScatterKind::ErrVsErr {
            a: "a".into(),
            b: "b".into(),
            metric: Metric::Recovery,
        };
        let rows = scatter_export(&report, &kind).unwrap();
        assert_eq!(rows.len(), 20);
        let ea = report.errors("a", Metric::Recovery).unwrap();
        let eb = report.errors("b", Metric::Recovery).unwrap();
        for r in &rows {
            assert_eq!(r.x, ea[r.sample]);
            assert_eq!(r.y, eb[r.sample]);
        }
        let same = scatter_export(
            &report,
            &ScatterKind::ErrVsErr {
                a: "a".into(),
                b: "a".into(),
                metric: Metric::Reproduction,
            },
        )
        .unwrap();
        assert!(same.iter().all(|r| r.x == r.y));

        let conf = scatter_export(
            &report,
            &ScatterKind::ErrorVsConfidence {
                model: "b".into(),
                metric: Metric::Recovery,
            },
        )
        .unwrap();
        for r in &conf {
            let mu = report.samples[r.sample].per_model[1].mu;
            assert_eq!(r.x, ConfidenceFn::new(Variant::Log).raw(mu));
            assert_eq!(r.y, eb[r.sample]);
        }
        assert!(matches!(
            scatter_export(
                &report,
                &ScatterKind::ErrorVsConfidence {
                    model: "grey-world".into(),
                    metric: Metric::Recovery
                }
            ),
            Err(CoreError::UnknownMethod(_))
        ));
        assert!(scatter_export(
            &report,
            &ScatterKind::ErrVsErr {
                a: "nope".into(),
                b: "a".into(),
                metric: Metric::Recovery
            }
        )
        .is_err());
    }

    #[test]
    fn every_method_has_non_negative_errors() {
        let report = crossval(&small_dataset(), &tiny_models_config()).unwrap();
        for s in &report.samples {
            assert_eq!(s.errors.len(), report.methods.len());
            assert!(s
                .errors
                .iter()
                .flatten()
                .all(|e| *e >= 0.0 && e.is_finite()));
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let d = small_dataset();
        let mut cfg = tiny_models_config();
        cfg.models[1].name = "a".into();
        assert!(crossval(&d, &cfg).is_err());
        let mut cfg = tiny_models_config();
        cfg.k = 25;
        assert!(crossval(&d, &cfg).is_err());
        let mut cfg = tiny_models_config();
        cfg.models[0].train_pool = Some(Pool::Full);
        cfg.models[0].train_pool = Some(Pool::BandA);
        let only_b = gen_dataset(&GenConfig {
            n_scenes: 10,
            pool: Pool::BandB,
            ..GenConfig::default()
        })
        .unwrap();
        assert!(matches!(
            crossval(&only_b, &cfg),
            Err(CoreError::Fold { .. })
        ));
    }

    #[test]
    fn text_rendering_rounds_to_one_decimal() {
        let report = crossval(
            &grey_dataset(8),
            &BenchConfig {
                k: 2,
                ..BenchConfig::default()
            },
        )
        .unwrap();
        let text = render_text(&report);
        assert!(text.contains("grey-world"));
        assert!(text.contains("     0.0"));
    }
}
