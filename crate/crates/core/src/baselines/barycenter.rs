//! Euclidean and DTW barycenter averaging (DBA) of univariate series.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dtw::Dtw;
use crate::error::{Error, Result};

/// Pointwise arithmetic mean of equal-length series, summed in set order.
pub fn euclidean_barycenter<S: AsRef<[f64]>>(set: &[S]) -> Result<Vec<f64>> {
    let first = set.first().ok_or(Error::EmptySet)?.as_ref();
    let mut mean = alloc::vec![0.0; first.len()];
    for s in set {
        let s = s.as_ref();
        if s.len() != first.len() {
            return Err(Error::LengthMismatch { expected: first.len(), actual: s.len() });
        }
        for (acc, v) in mean.iter_mut().zip(s) {
            *acc += v;
        }
    }
    let n = set.len() as f64;
    mean.iter_mut().for_each(|v| *v /= n);
    Ok(mean)
}

/// DBA output together with its objective trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DbaResult {
    pub barycenter: Vec<f64>,
    /// `Σ dtw(member, barycenter)²` for the initial barycenter and after each
    /// accepted iteration.
    pub objective: Vec<f64>,
}

fn dba_objective<S: AsRef<[f64]>>(dtw: &Dtw, set: &[S], center: &[f64]) -> Result<f64> {
    set.iter().map(|s| dtw.align(s.as_ref(), center, 1).map(|a| a.cost)).sum()
}

/// DTW barycenter averaging.
///
/// Starts from a member chosen by `seed`, then repeatedly aligns every member
/// to the current barycenter and replaces each barycenter point with the mean
/// of the member points warped onto it. Stops after `max_iters` updates or as
/// soon as an update fails to lower the objective (that update is discarded).
pub fn dba<S: AsRef<[f64]>>(set: &[S], max_iters: usize, seed: u64) -> Result<DbaResult> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
    }
    if set.iter().any(|s| s.as_ref().is_empty()) {
        return Err(Error::EmptySeries);
    }
    let dtw = Dtw::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut center = set[rng.random_range(0..set.len())].as_ref().to_vec();
    let mut objective = alloc::vec![dba_objective(&dtw, set, &center)?];

    for _ in 0..max_iters {
        let mut sums = alloc::vec![0.0; center.len()];
        let mut counts = alloc::vec![0usize; center.len()];
        for s in set {
            let s = s.as_ref();
            for (i, j) in dtw.align(s, &center, 1)?.path {
                sums[j] += s[i];
                counts[j] += 1;
            }
        }
        let next: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / *c as f64).collect();
        let cost = dba_objective(&dtw, set, &next)?;
        let previous = *objective.last().unwrap_or(&f64::INFINITY);
        if cost >= previous {
            break;
        }
        center = next;
        objective.push(cost);
    }
    Ok(DbaResult { barycenter: center, objective })
}
