use serde::{Deserialize, Serialize};

use super::InvNetModel;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Minibatch SGD settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_dim: usize,
    pub num_blocks: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            epochs: 50,
            batch_size: 8,
            seed: 0,
            hidden_dim: 64,
            num_blocks: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::input("batch_size must be >= 1"));
        }
        if self.hidden_dim == 0 || self.num_blocks == 0 {
            return Err(Error::input("hidden_dim and num_blocks must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: InvNetModel,
    /// Mean binary cross-entropy per epoch, measured during the epoch.
    pub loss_history: Vec<f64>,
}

/// Binary cross-entropy of `sigmoid(logit)` against `label`, computed stably.
pub(crate) fn bce_with_logit(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - label * logit + (-logit.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Trains a freshly initialized model with minibatch SGD on sigmoid
/// cross-entropy. Initialization uses the `"init"` child stream of the seed and
/// shuffling the `"shuffle"` stream.
pub fn train(dataset: &LabeledDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    let root = SeededRng::new(config.seed);
    let mut init_rng = root.child("init");
    let mut shuffle_rng = root.child("shuffle");
    let mut model = InvNetModel::init(
        dataset.dim(),
        config.num_blocks,
        config.hidden_dim,
        &mut init_rng,
    )?;

    let n = dataset.len();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let order = shuffle_rng.permutation(n);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zeros_like();
            for &i in batch {
                let label = f64::from(dataset.labels()[i]);
                let tape = model.forward_taped(dataset.features().row(i))?;
                let logit = model.feature_logit(&tape.features);
                epoch_loss += bce_with_logit(logit, label);
                model.backward(&tape, sigmoid(logit) - label, Some(&mut grads));
            }
            model.apply_update(&grads, config.learning_rate / batch.len() as f64);
        }
        let mean_loss = epoch_loss / n as f64;
        if !mean_loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss diverged at epoch {}",
                loss_history.len() + 1
            )));
        }
        loss_history.push(mean_loss);
    }
    Ok(TrainOutcome {
        model,
        loss_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_matches_naive_formula() {
        for &(l, y) in &[(0.3, 1.0), (-2.0, 0.0), (4.0, 0.0), (-0.7, 1.0)] {
            let p = 1.0 / (1.0 + f64::exp(-l));
            let naive = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((bce_with_logit(l, y) - naive).abs() < 1e-12);
        }
        assert!(bce_with_logit(800.0, 0.0).is_finite());
        assert!(bce_with_logit(-800.0, 1.0).is_finite());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-1000.0) >= 0.0);
        assert!(sigmoid(1000.0) <= 1.0);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = [
            TrainConfig { learning_rate: -1.0, ..Default::default() },
            TrainConfig { learning_rate: f64::NAN, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { num_blocks: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}
