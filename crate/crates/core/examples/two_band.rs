//! Runs the two-band benchmark and prints the summary tables.
//!
//! Usage: `cargo run --release -p mcde-core --example two_band [seed] [n_scenes]`

use std::time::Instant;

use mcde_core::bench::{crossval, render_text, two_band_scenario};
use mcde_core::colorcore::Metric;
use mcde_core::datagen::gen_dataset;

fn main() -> mcde_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map_or(7, |s| s.parse().expect("seed"));
    let n = args.next().map_or(400, |s| s.parse().expect("n_scenes"));
    let (data, bench) = two_band_scenario(seed, n);
    let t = Instant::now();
    let dataset = gen_dataset(&data)?;
    let report = crossval(&dataset, &bench)?;
    print!("{}", render_text(&report));

    // How often the more accurate single model also gets the larger weight.
    let models = report.model_names();
    if models.len() == 2 {
        let a = report.errors(&models[0], Metric::Recovery)?;
        let b = report.errors(&models[1], Metric::Recovery)?;
        for (label, pick) in [("linear", 0usize), ("log", 1)] {
            let hits = report
                .samples
                .iter()
                .filter(|s| {
                    let w = if pick == 0 {
                        &s.weights_linear
                    } else {
                        &s.weights_log
                    };
                    (a[s.sample] < b[s.sample]) == (w[0] > w[1])
                })
                .count();
            let mean_max: f64 = report
                .samples
                .iter()
                .map(|s| {
                    if pick == 0 {
                        &s.weights_linear
                    } else {
                        &s.weights_log
                    }
                })
                .map(|w| w[0].max(w[1]))
                .sum::<f64>()
                / report.samples.len() as f64;
            println!(
                "{label}: better model has the larger weight on {hits}/{} samples; mean largest weight {mean_max:.3}",
                report.samples.len()
            );
        }
    }
    eprintln!("elapsed {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
