//! Mini-batch training with early stopping on validation loss.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::Loss;
use super::network::{Network, Sample};
use super::optim::{Optimizer, OptimizerKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: Loss,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub dropout: f64,
    pub l1: f64,
    /// Global gradient-norm ceiling; `0` disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: Loss::Mse,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-5,
            batch_size: 8,
            max_epochs: 200,
            patience: 10,
            dropout: 0.0,
            l1: 0.0,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.l1 >= 0.0 && self.l1.is_finite()) {
            return bad("l1 must be non-negative");
        }
        if !(self.clip_norm >= 0.0) {
            return bad("clip_norm must be non-negative");
        }
        Ok(())
    }
}

/// `l1 · Σ|w|` over weight tensors (biases excluded).
pub fn l1_penalty<N: Network>(net: &N, l1: f64) -> f64 {
    if l1 == 0.0 {
        return 0.0;
    }
    let sum: f64 = net
        .tensors()
        .iter()
        .filter(|(role, _)| role.is_weight())
        .flat_map(|(_, t)| t.iter())
        .map(|w| libm::fabs(*w))
        .sum();
    l1 * sum
}

fn add_l1_gradient<N: Network>(net: &N, grad: &mut N, l1: f64) {
    if l1 == 0.0 {
        return;
    }
    for ((role, w), (_, g)) in net.tensors().into_iter().zip(grad.tensors_mut()) {
        if role.is_weight() {
            for (w, g) in w.iter().zip(g.iter_mut()) {
                if *w > 0.0 {
                    *g += l1;
                } else if *w < 0.0 {
                    *g -= l1;
                }
            }
        }
    }
}

/// Mean data loss plus the L1 penalty over `samples`, without dropout.
pub fn objective<N: Network>(net: &N, samples: &[Sample], loss: Loss, l1: f64) -> Result<f64> {
    let data = mean_loss(net, samples, loss)?;
    let penalty = l1_penalty(net, l1);
    Ok(if l1 == 0.0 { data } else { data + penalty })
}

/// Mean data loss over `samples` in inference mode.
pub fn mean_loss<N: Network>(net: &N, samples: &[Sample], loss: Loss) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut total = 0.0;
    for s in samples {
        total += loss.value(&net.predict(s)?, &s.target)?;
    }
    Ok(total / samples.len() as f64)
}

/// Gradient of [`objective`] over `samples`; dropout applies when `dropout > 0`.
pub fn objective_gradient<N: Network>(
    net: &N,
    samples: &[&Sample],
    loss: Loss,
    l1: f64,
    dropout: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, N)> {
    if samples.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut grad = net.zeroed();
    let mut total = 0.0;
    for s in samples {
        total += net.accumulate_gradient(s, loss, dropout, rng, &mut grad)?;
    }
    let scale = 1.0 / samples.len() as f64;
    for (_, g) in grad.tensors_mut() {
        g.iter_mut().for_each(|v| *v *= scale);
    }
    add_l1_gradient(net, &mut grad, l1);
    Ok((total * scale + l1_penalty(net, l1), grad))
}

fn clip_global_norm<N: Network>(grad: &mut N, ceiling: f64) {
    if ceiling <= 0.0 {
        return;
    }
    let sq: f64 = grad.tensors().iter().flat_map(|(_, t)| t.iter()).map(|g| g * g).sum();
    let norm = libm::sqrt(sq);
    if norm > ceiling {
        let k = ceiling / norm;
        for (_, g) in grad.tensors_mut() {
            g.iter_mut().for_each(|v| *v *= k);
        }
    }
}

/// Outcome of feeding one validation loss to [`EarlyStopping`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

/// Stops once the validation loss has failed to improve on the best value
/// for more than `patience` consecutive epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    streak: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, best_epoch: 0, streak: 0 }
    }

    pub fn update(&mut self, epoch: usize, val_loss: f64) -> Verdict {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.streak = 0;
            Verdict::Improved
        } else {
            self.streak += 1;
            if self.streak > self.patience {
                Verdict::Stop
            } else {
                Verdict::Continue
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights were kept; 0 if none improved.
    pub best_epoch: usize,
}

/// Trains `net` and returns the weights of the best validation epoch.
///
/// Epochs are 1-based. Train loss is measured after each epoch in inference
/// mode and includes the L1 penalty; validation loss is the data loss only.
pub fn fit_network<N: Network>(
    mut net: N,
    train: &[Sample],
    validation: &[Sample],
    config: &TrainConfig,
) -> Result<(N, History)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if validation.is_empty() {
        return Err(Error::EmptySplit("validation"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut history = History::default();
    let mut best = net.clone();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch: Vec<&Sample> = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &train[i]));
            let (value, mut grad) = objective_gradient(&net, &batch, config.loss, config.l1, config.dropout, &mut rng)?;
            if !value.is_finite() {
                return Err(Error::DivergedLoss(epoch));
            }
            clip_global_norm(&mut grad, config.clip_norm);
            let grads = grad.tensors();
            let grads: Vec<&[f64]> = grads.into_iter().map(|(_, g)| g).collect();
            optimizer.step(net.tensors_mut().into_iter().map(|(_, t)| t).collect(), &grads);
        }
        let train_loss = objective(&net, train, config.loss, config.l1)?;
        let val_loss = mean_loss(&net, validation, config.loss)?;
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(Error::DivergedLoss(epoch));
        }
        history.epochs.push(EpochRecord { epoch, train_loss, val_loss });
        match stopper.update(epoch, val_loss) {
            Verdict::Improved => {
                best = net.clone();
                history.best_epoch = epoch;
            }
            Verdict::Continue => {}
            Verdict::Stop => break,
        }
    }
    Ok((best, history))
}
