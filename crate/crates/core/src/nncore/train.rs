//! Minibatch training loop with early stopping on a validation set.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState, TrainConfig};
use super::mlp::{Gradients, Mlp, Tape};
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Indexed supervised samples. Implementations may assemble inputs lazily.
pub trait Dataset<T> {
    fn len(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn target_dim(&self) -> usize;
    fn fill_input(&self, index: usize, out: &mut [T]);
    fn fill_target(&self, index: usize, out: &mut [T]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Samples held as two contiguous row-major matrices.
#[derive(Debug, Clone)]
pub struct MemoryDataset<T> {
    inputs: Vec<T>,
    targets: Vec<T>,
    input_dim: usize,
    target_dim: usize,
}

impl<T: Scalar> MemoryDataset<T> {
    pub fn new(inputs: Vec<T>, input_dim: usize, targets: Vec<T>, target_dim: usize) -> Result<Self> {
        if input_dim == 0 || target_dim == 0 || inputs.len() % input_dim != 0 {
            return Err(Error::shape("dataset inputs", format!("multiple of {input_dim}"), inputs.len()));
        }
        let n = inputs.len() / input_dim;
        if targets.len() != n * target_dim {
            return Err(Error::shape("dataset targets", n * target_dim, targets.len()));
        }
        Ok(MemoryDataset {
            inputs,
            targets,
            input_dim,
            target_dim,
        })
    }

    pub fn from_rows(inputs: &[Vec<T>], targets: &[Vec<T>]) -> Result<Self> {
        let din = inputs.first().map_or(0, Vec::len);
        let dout = targets.first().map_or(0, Vec::len);
        if inputs.len() != targets.len() {
            return Err(Error::shape("dataset rows", inputs.len(), targets.len()));
        }
        if inputs.iter().any(|r| r.len() != din) || targets.iter().any(|r| r.len() != dout) {
            return Err(Error::shape("dataset rows", "uniform row lengths", "ragged rows"));
        }
        Self::new(inputs.concat(), din, targets.concat(), dout)
    }
}

impl<T: Scalar> Dataset<T> for MemoryDataset<T> {
    fn len(&self) -> usize {
        self.inputs.len() / self.input_dim
    }
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn target_dim(&self) -> usize {
        self.target_dim
    }
    fn fill_input(&self, index: usize, out: &mut [T]) {
        let d = self.input_dim;
        out.copy_from_slice(&self.inputs[index * d..(index + 1) * d]);
    }
    fn fill_target(&self, index: usize, out: &mut [T]) {
        let d = self.target_dim;
        out.copy_from_slice(&self.targets[index * d..(index + 1) * d]);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 0 is the untrained model.
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Snapshot with the lowest validation loss (training loss without a validation set).
    pub model: Mlp<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl<T> TrainOutcome<T> {
    pub fn best_loss(&self) -> f64 {
        let r = &self.history[self.best_epoch];
        r.valid_loss.unwrap_or(r.train_loss)
    }
}

pub fn train<T: Scalar>(
    model: Mlp<T>,
    train_set: &dyn Dataset<T>,
    valid_set: Option<&dyn Dataset<T>>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    train_with_observer(model, train_set, valid_set, cfg, &mut |_| {})
}

/// Like [`train`], calling `observer` after every epoch record is produced.
pub fn train_with_observer<T: Scalar>(
    mut model: Mlp<T>,
    train_set: &dyn Dataset<T>,
    valid_set: Option<&dyn Dataset<T>>,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("training set"));
    }
    if valid_set.is_some_and(|v| v.is_empty()) {
        return Err(Error::EmptyDataset("validation set"));
    }
    for ds in std::iter::once(train_set).chain(valid_set) {
        if ds.input_dim() != model.input_dim() || ds.target_dim() != model.output_dim() {
            return Err(Error::shape(
                "dataset vs model",
                format!("{} -> {}", model.input_dim(), model.output_dim()),
                format!("{} -> {}", ds.input_dim(), ds.target_dim()),
            ));
        }
    }
    let batch_size = cfg.batch_size.min(train_set.len());

    let initial_train = dataset_loss(&model, train_set, batch_size)?;
    let initial_valid = valid_set.map(|v| dataset_loss(&model, v, batch_size)).transpose()?;
    let first = EpochRecord {
        epoch: 0,
        train_loss: initial_train,
        valid_loss: initial_valid,
        improved: true,
    };
    observer(&first);
    let mut best_score = initial_valid.unwrap_or(initial_train);
    if !best_score.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: 0,
            batch: 0,
            value: best_score,
        });
    }
    let mut history = vec![first];
    let mut best_model = model.clone();
    let mut best_epoch = 0;
    let mut stale = 0usize;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut adam = AdamState::new(&model);
    let mut tape = Tape::new();
    let mut grads = Gradients::zeros_like(&model);
    let (din, dout) = (model.input_dim(), model.output_dim());
    let mut xb = vec![T::zero(); batch_size * din];
    let mut yb = vec![T::zero(); batch_size * dout];

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (bi, chunk) in order.chunks(batch_size).enumerate() {
            let b = chunk.len();
            for (row, &idx) in chunk.iter().enumerate() {
                train_set.fill_input(idx, &mut xb[row * din..(row + 1) * din]);
                train_set.fill_target(idx, &mut yb[row * dout..(row + 1) * dout]);
            }
            model.forward_traced(&xb[..b * din], b, &mut tape)?;
            let loss = model.backward_batch(&xb[..b * din], &yb[..b * dout], cfg.l2_lambda, &mut tape, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    value: loss,
                });
            }
            adam_step(&mut model, &mut adam, &grads, cfg)?;
            weighted += loss * b as f64;
        }
        let train_loss = weighted / train_set.len() as f64;
        let valid_loss = valid_set.map(|v| dataset_loss(&model, v, batch_size)).transpose()?;
        let score = valid_loss.unwrap_or(train_loss);
        if !score.is_finite() || !model.all_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
                value: score,
            });
        }
        let improved = score < best_score;
        if improved {
            best_score = score;
            best_model.clone_from(&model);
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            valid_loss,
            improved,
        };
        observer(&record);
        history.push(record);
        if stale > cfg.patience {
            break;
        }
    }

    Ok(TrainOutcome {
        model: best_model,
        history,
        best_epoch,
    })
}

/// Mean squared error of `model` over a whole dataset (no regularization term).
pub fn dataset_loss<T: Scalar>(model: &Mlp<T>, ds: &dyn Dataset<T>, batch_size: usize) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset("loss evaluation"));
    }
    let (din, dout) = (ds.input_dim(), ds.target_dim());
    let batch_size = batch_size.max(1);
    let mut xb = vec![T::zero(); batch_size * din];
    let mut yb = vec![T::zero(); batch_size * dout];
    let mut sse = 0.0;
    let mut start = 0;
    while start < ds.len() {
        let b = batch_size.min(ds.len() - start);
        for row in 0..b {
            ds.fill_input(start + row, &mut xb[row * din..(row + 1) * din]);
            ds.fill_target(start + row, &mut yb[row * dout..(row + 1) * dout]);
        }
        let pred = model.forward_batch(&xb[..b * din], b)?;
        sse += pred
            .iter()
            .zip(&yb[..b * dout])
            .map(|(&p, &t)| (p - t).to_f64().unwrap().powi(2))
            .sum::<f64>();
        start += b;
    }
    Ok(sse / (ds.len() * dout) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::mlp::{chain_specs, Activation};

    fn toy_set(n: usize) -> MemoryDataset<f32> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let a = (i as f32 * 0.37).sin();
            let b = (i as f32 * 0.11).cos();
            xs.push(vec![a, b]);
            ys.push(vec![a * b, a - b]);
        }
        MemoryDataset::from_rows(&xs, &ys).unwrap()
    }

    fn toy_model(seed: u64) -> Mlp<f32> {
        Mlp::new(&chain_specs(&[2, 8, 2], Activation::SILU, Activation::Linear), seed).unwrap()
    }

    #[test]
    fn overfits_a_single_sample() {
        let ds = MemoryDataset::from_rows(&[vec![0.3f32, -0.6]], &[vec![1.5f32, -0.5]]).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            l2_lambda: 0.0,
            batch_size: 1,
            max_epochs: 2000,
            patience: 2000,
            ..Default::default()
        };
        let out = train(toy_model(3), &ds, None, &cfg).unwrap();
        assert!(out.best_loss() < 1e-6, "loss {}", out.best_loss());
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let ds = toy_set(20);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            batch_size: 4,
            max_epochs: 3,
            ..Default::default()
        };
        let init = toy_model(5);
        let out = train(init.clone(), &ds, Some(&ds), &cfg).unwrap();
        assert_eq!(out.model, init);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let ds = toy_set(50);
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 8,
            max_epochs: 10,
            seed: 42,
            ..Default::default()
        };
        let a = train(toy_model(1), &ds, Some(&ds), &cfg).unwrap();
        let b = train(toy_model(1), &ds, Some(&ds), &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn empty_and_mismatched_datasets_fail() {
        let empty = MemoryDataset::<f32>::new(vec![], 2, vec![], 2).unwrap();
        assert!(matches!(
            train(toy_model(0), &empty, None, &TrainConfig::default()),
            Err(Error::EmptyDataset(_))
        ));
        let wrong = MemoryDataset::from_rows(&[vec![1.0f32; 3]], &[vec![0.0f32; 2]]).unwrap();
        assert!(train(toy_model(0), &wrong, None, &TrainConfig::default()).is_err());
    }

    #[test]
    fn diverging_run_reports_non_finite_loss() {
        let ds = MemoryDataset::from_rows(&[vec![1e30f32, 1e30]], &[vec![0.0f32, 0.0]]).unwrap();
        let err = train(toy_model(0), &ds, None, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }), "{err}");
    }

    #[test]
    fn early_stopping_keeps_best_snapshot() {
        let ds = toy_set(40);
        let cfg = TrainConfig {
            learning_rate: 5e-2,
            batch_size: 8,
            max_epochs: 60,
            patience: 3,
            ..Default::default()
        };
        let out = train(toy_model(2), &ds, Some(&ds), &cfg).unwrap();
        let best = out.history.iter().filter_map(|r| r.valid_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_loss(), best);
        let recomputed = dataset_loss(&out.model, &ds, 8).unwrap();
        assert!((recomputed - best).abs() < 1e-9);
    }
}
