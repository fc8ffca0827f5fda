//! Finite-difference verification of backpropagated gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::Loss;
use super::network::{Network, Sample};
use super::train::{objective, objective_gradient};
use crate::error::Result;

/// Which parameters are perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckScope {
    #[default]
    All,
    /// Only the dense readout; recurrent weights stay frozen.
    ReadoutOnly,
}

/// Maximum over checked parameters of `|g_a − g_n| / max(|g_a|, |g_n|, 1e-8)`,
/// where `g_n` is the central difference with step `eps` of the objective
/// (data loss plus L1 penalty) on `sample`, dropout disabled. With `l1 > 0`
/// a nonzero parameter closer to zero than `eps` is stepped by half its
/// magnitude so the difference stays on one side of the penalty's kink.
pub fn gradient_check<N: Network>(
    net: &N,
    sample: &Sample,
    loss: Loss,
    l1: f64,
    eps: f64,
    scope: CheckScope,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, analytic) = objective_gradient(net, &[sample], loss, l1, 0.0, &mut rng)?;
    let analytic = analytic.tensors();
    let samples = core::slice::from_ref(sample);
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (k, (role, grads)) in analytic.iter().enumerate() {
        if scope == CheckScope::ReadoutOnly && !role.is_readout() {
            continue;
        }
        for (i, &ga) in grads.iter().enumerate() {
            let original = probe.tensors()[k].1[i];
            let step = if l1 > 0.0 && original != 0.0 { eps.min(libm::fabs(original) / 2.0) } else { eps };
            probe.tensors_mut()[k].1[i] = original + step;
            let up = objective(&probe, samples, loss, l1)?;
            probe.tensors_mut()[k].1[i] = original - step;
            let down = objective(&probe, samples, loss, l1)?;
            probe.tensors_mut()[k].1[i] = original;
            let gn = (up - down) / (2.0 * step);
            let denom = libm::fabs(ga).max(libm::fabs(gn)).max(1e-8);
            worst = worst.max(libm::fabs(ga - gn) / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recurrent::cell::CellKind;
    use crate::recurrent::network::{Encoder, Refiner};
    use alloc::vec::Vec;

    fn sample(len: usize, m: usize, h: usize, rng: &mut ChaCha8Rng) -> Sample {
        use rand::Rng;
        Sample {
            input: (0..len * m).map(|_| rng.random_range(-1.0..1.0)).collect(),
            context: Vec::new(),
            target: (0..h).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn encoder_gradients_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [CellKind::Lstm, CellKind::Gru] {
            let net = Encoder::new(kind, 2, &[5, 3], 4, &mut rng).unwrap();
            let s = sample(7, 2, 4, &mut rng);
            let err = gradient_check(&net, &s, Loss::Mse, 0.0, 1e-5, CheckScope::All).unwrap();
            assert!(err < 1e-4, "{kind:?}: {err}");
        }
    }

    #[test]
    fn refiner_gradients_agree() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Refiner::new(CellKind::Gru, 2, 4, &mut rng).unwrap();
        let s = Sample {
            input: (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
            context: (0..10).map(|_| rng.random_range(-1.0..1.0)).collect(),
            target: (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let err = gradient_check(&net, &s, Loss::Cosine, 1e-3, 1e-5, CheckScope::All).unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
