//! Seeded random search over training hyperparameters.

use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecasters::mean_mae;
use crate::recurrent::loss::Loss;
use crate::recurrent::model::{ModelSpec, SerialModel, TrainReport};
use crate::recurrent::optim::OptimizerKind;
use crate::recurrent::train::TrainConfig;
use crate::segment::Fold;

/// Ranges sampled by [`SearchSpace::sample`]. Continuous ranges are
/// inclusive; the learning rate is drawn log-uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub learning_rate: (f64, f64),
    pub batch_size: Vec<usize>,
    pub dropout: (f64, f64),
    pub l1: (f64, f64),
    pub loss: Vec<Loss>,
    pub optimizer: Vec<OptimizerKind>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: (1e-5, 1e-2),
            batch_size: alloc::vec![4, 8, 16],
            dropout: (0.0, 0.3),
            l1: (0.0, 1e-4),
            loss: alloc::vec![Loss::Mae, Loss::Mse],
            optimizer: alloc::vec![OptimizerKind::Adam],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if self.batch_size.is_empty()
            || self.loss.is_empty()
            || self.optimizer.is_empty()
            || !range_ok(self.learning_rate)
            || !range_ok(self.dropout)
            || !range_ok(self.l1)
            || self.learning_rate.0 <= 0.0
        {
            return Err(Error::EmptySpace);
        }
        Ok(())
    }

    /// Draws one configuration; fields outside the space come from `base`.
    pub fn sample<R: Rng>(&self, base: &TrainConfig, rng: &mut R) -> TrainConfig {
        let uniform = |(lo, hi): (f64, f64), rng: &mut R| if lo < hi { rng.random_range(lo..=hi) } else { lo };
        let (lr_lo, lr_hi) = self.learning_rate;
        let log_lr = uniform((libm::log(lr_lo), libm::log(lr_hi)), rng);
        TrainConfig {
            learning_rate: libm::exp(log_lr),
            batch_size: *self.batch_size.choose(rng).unwrap_or(&base.batch_size),
            dropout: uniform(self.dropout, rng),
            l1: uniform(self.l1, rng),
            loss: *self.loss.choose(rng).unwrap_or(&base.loss),
            optimizer: *self.optimizer.choose(rng).unwrap_or(&base.optimizer),
            ..*base
        }
    }
}

/// Every trial of a search plus the index of the winner.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome<C, M> {
    pub trials: Vec<(C, f64)>,
    pub best: usize,
    pub model: M,
}

impl<C, M> SearchOutcome<C, M> {
    pub fn best_config(&self) -> &C {
        &self.trials[self.best].0
    }

    pub fn best_score(&self) -> f64 {
        self.trials[self.best].1
    }
}

/// Samples `budget` candidates with `draw`, scores each with `score`
/// (lower is better) and keeps the first minimiser.
pub fn random_search<C, M, D, S>(budget: usize, seed: u64, mut draw: D, mut score: S) -> Result<SearchOutcome<C, M>>
where
    D: FnMut(&mut ChaCha8Rng) -> C,
    S: FnMut(&C) -> Result<(f64, M)>,
{
    if budget == 0 {
        return Err(Error::InvalidParameter("search budget must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials: Vec<(C, f64)> = Vec::with_capacity(budget);
    let mut best: Option<(usize, M)> = None;
    for i in 0..budget {
        let candidate = draw(&mut rng);
        let (value, model) = score(&candidate)?;
        let better = match &best {
            None => true,
            Some((b, _)) => value < trials[*b].1,
        };
        trials.push((candidate, value));
        if better {
            best = Some((i, model));
        }
    }
    let (best, model) = best.expect("budget is non-zero");
    Ok(SearchOutcome { trials, best, model })
}

/// Random search over training configurations of a serial model, scored by
/// validation MAE in original units.
pub fn search_serial(
    spec: &ModelSpec,
    fold: &Fold,
    space: &SearchSpace,
    base: &TrainConfig,
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome<TrainConfig, (SerialModel, TrainReport)>> {
    space.validate()?;
    random_search(budget, seed, |rng| space.sample(base, rng), |config| {
        let (model, report) = SerialModel::train(spec, fold, config)?;
        Ok((mean_mae(&model, &fold.validation)?, (model, report)))
    })
}
