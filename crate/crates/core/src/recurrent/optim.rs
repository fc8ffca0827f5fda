use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
    Rmsprop,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const RMS_DECAY: f64 = 0.9;
const EPS: f64 = 1e-8;

/// First-order optimiser with per-tensor state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self { kind, learning_rate, step: 0, first: Vec::new(), second: Vec::new() }
    }

    /// Applies one update; `grads[i]` pairs with `params[i]`.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[&[f64]]) {
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| alloc::vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    p.iter_mut().zip(g.iter()).for_each(|(w, d)| *w -= lr * d);
                }
            }
            OptimizerKind::Rmsprop => {
                for ((p, g), v) in params.into_iter().zip(grads).zip(&mut self.second) {
                    for ((w, d), s) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                        *s = RMS_DECAY * *s + (1.0 - RMS_DECAY) * d * d;
                        *w -= lr * d / (libm::sqrt(*s) + EPS);
                    }
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - libm::pow(ADAM_BETA1, f64::from(self.step));
                let c2 = 1.0 - libm::pow(ADAM_BETA2, f64::from(self.step));
                for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    for (((w, d), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * d;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * d * d;
                        *w -= lr * (*m / c1) / (libm::sqrt(*v / c2) + EPS);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd, OptimizerKind::Rmsprop] {
            let mut opt = Optimizer::new(kind, 0.1);
            let mut w = vec![0.5, -2.0, 3.0];
            for _ in 0..5 {
                opt.step(vec![w.as_mut_slice()], &[&[0.0, 0.0, 0.0]]);
            }
            assert_eq!(w, vec![0.5, -2.0, 3.0]);
        }
    }

    #[test]
    fn minimises_a_quadratic() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd, OptimizerKind::Rmsprop] {
            let mut opt = Optimizer::new(kind, 0.05);
            let mut w = vec![3.0];
            for _ in 0..500 {
                let g = [2.0 * (w[0] - 1.0)];
                opt.step(vec![w.as_mut_slice()], &[&g]);
            }
            assert!((w[0] - 1.0).abs() < 0.05, "{kind:?}: {}", w[0]);
        }
    }

    #[test]
    fn first_adam_step_moves_by_learning_rate() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01);
        let mut w = vec![1.0];
        opt.step(vec![w.as_mut_slice()], &[&[4.0]]);
        assert!((w[0] - 0.99).abs() < 1e-9);
    }
}
