use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Gradients, Network, PassSeed, Tensor};
use crate::colorcore::Scene;
use crate::error::{CoreError, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.01,
            batch_size: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    /// Mean training loss per epoch, measured with dropout active.
    pub loss_trace: Vec<f64>,
}

/// Minibatch SGD on `1 - cos` between prediction and label.
///
/// The example order is reshuffled every epoch from `config.seed`, and each
/// example's dropout masks are keyed by its position in the epoch, so the
/// result does not depend on how many threads evaluate a batch.
pub fn train(mut net: Network, dataset: &[&Scene], config: &TrainConfig) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(CoreError::Domain("cannot train on an empty dataset".into()));
    }
    if config.batch_size == 0 {
        return Err(CoreError::Domain("batch size must be positive".into()));
    }
    let inputs: Vec<Tensor> = dataset.iter().map(|s| Tensor::from_scene(s)).collect();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(
            seed::derive_str(config.seed, "shuffle"),
            epoch as u64,
        ));
        order.shuffle(&mut rng);
        let dropout_seed = seed::derive(seed::derive_str(config.seed, "dropout"), epoch as u64);

        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let start = batch_no * config.batch_size;
            let results: Vec<Result<(f64, Gradients)>> = batch
                .par_iter()
                .enumerate()
                .map(|(k, &i)| {
                    let pass = PassSeed::new(dropout_seed, (start + k) as u64);
                    net.backward_tensor(inputs[i].clone(), &dataset[i].label(), pass)
                })
                .collect();

            let mut total = Gradients::zeros_for(&net);
            for r in results {
                let (l, g) = r.map_err(|e| match e {
                    CoreError::Numeric { .. } => CoreError::Diverged {
                        epoch,
                        loss: f64::NAN,
                    },
                    other => other,
                })?;
                epoch_loss += l;
                total.add_assign(&g);
            }
            total.scale(config.learning_rate / batch.len() as f64);
            for (p, g) in net.params_mut().iter_mut().zip(&total.0) {
                for (w, d) in p.iter_mut().zip(g) {
                    *w -= d;
                }
            }
        }
        let mean_loss = epoch_loss / dataset.len() as f64;
        if !mean_loss.is_finite() || net.params().iter().flatten().any(|w| !w.is_finite()) {
            return Err(CoreError::Diverged {
                epoch,
                loss: mean_loss,
            });
        }
        loss_trace.push(mean_loss);
    }
    Ok(TrainOutcome {
        network: net,
        loss_trace,
    })
}
