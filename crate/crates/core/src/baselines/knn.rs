//! k-nearest-neighbour forecasting with barycenter combination of the
//! neighbours' output windows.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::barycenter::{dba, euclidean_barycenter};
use super::dtw::{euclidean, Dtw};
use crate::error::{Error, Result};
use crate::segment::Instance;
use crate::series::TimeSeries;

/// Similarity used to rank training inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    Euclidean,
    Dtw,
}

/// How neighbour outputs are merged into a forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinerKind {
    EuclideanMean,
    DtwDba,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    pub distance: DistanceKind,
    pub combiner: CombinerKind,
    pub dba_iters: usize,
    pub seed: u64,
}

impl KnnConfig {
    pub fn new(k: usize, distance: DistanceKind, combiner: CombinerKind) -> Self {
        Self { k, distance, combiner, dba_iters: 10, seed: 0 }
    }
}

fn input_distance(kind: DistanceKind, a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    if a.width() != b.width() {
        return Err(Error::ShapeMismatch("query and training inputs differ in channels".into()));
    }
    match kind {
        DistanceKind::Euclidean => euclidean(a.values(), b.values()),
        DistanceKind::Dtw => Dtw::default().distance(a.values(), b.values(), a.width()),
    }
}

/// Indices of the `k` training instances nearest to `query`, ties going to
/// the earlier origin.
pub fn nearest(train: &[Instance], query: &TimeSeries, k: usize, distance: DistanceKind) -> Result<Vec<usize>> {
    if train.is_empty() {
        return Err(Error::EmptyTrain);
    }
    if k == 0 || k > train.len() {
        return Err(Error::KTooLarge { k, available: train.len() });
    }
    let mut ranked = train
        .iter()
        .enumerate()
        .map(|(i, inst)| Ok((input_distance(distance, &inst.input, query)?, inst.origin, i)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().take(k).map(|(_, _, i)| i).collect())
}

/// Forecast from the combined outputs of the `k` nearest training instances.
pub fn knn_forecast(train: &[Instance], query: &TimeSeries, config: &KnnConfig) -> Result<Vec<f64>> {
    let mut idx = nearest(train, query, config.k, config.distance)?;
    // Combine in training order so k = |train| reproduces the plain barycenter bit for bit.
    idx.sort_unstable();
    let outputs: Vec<&[f64]> = idx.iter().map(|&i| train[i].output.values()).collect();
    match config.combiner {
        CombinerKind::EuclideanMean => euclidean_barycenter(&outputs),
        CombinerKind::DtwDba => Ok(dba(&outputs, config.dba_iters.max(1), config.seed)?.barycenter),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::{segment_instances, SegmentSpec};
    use alloc::vec;
    use chrono::{TimeDelta, TimeZone, Utc};

    fn train() -> Vec<Instance> {
        let start = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
        let v: Vec<f64> = (0..40).map(|t| ((t * 7) % 11) as f64).collect();
        let s = TimeSeries::univariate(start, TimeDelta::minutes(30), "y", v).unwrap();
        segment_instances(&s, &SegmentSpec::new("y", 3).input_len(6).slide(2)).unwrap()
    }

    #[test]
    fn k_one_returns_nearest_output() {
        let tr = train();
        let query = tr[4].input.clone();
        let f = knn_forecast(&tr, &query, &KnnConfig::new(1, DistanceKind::Euclidean, CombinerKind::EuclideanMean)).unwrap();
        assert_eq!(f, tr[4].target());
    }

    #[test]
    fn full_k_is_the_mean_of_all_outputs() {
        let tr = train();
        let cfg = KnnConfig::new(tr.len(), DistanceKind::Dtw, CombinerKind::EuclideanMean);
        let f = knn_forecast(&tr, &tr[0].input, &cfg).unwrap();
        let outputs: Vec<Vec<f64>> = tr.iter().map(|i| i.target()).collect();
        assert_eq!(f, euclidean_barycenter(&outputs).unwrap());
    }

    #[test]
    fn rejects_bad_k() {
        let tr = train();
        let cfg = KnnConfig::new(tr.len() + 1, DistanceKind::Euclidean, CombinerKind::EuclideanMean);
        assert_eq!(knn_forecast(&tr, &tr[0].input, &cfg), Err(Error::KTooLarge { k: tr.len() + 1, available: tr.len() }));
        assert_eq!(knn_forecast(&[], &tr[0].input, &cfg), Err(Error::EmptyTrain));
    }

    #[test]
    fn ties_prefer_earlier_origin() {
        let mut tr = train();
        let dup = tr[1].clone();
        tr[5].input = dup.input.clone();
        let idx = nearest(&tr, &dup.input, 2, DistanceKind::Euclidean).unwrap();
        assert_eq!(idx, vec![1, 5]);
    }

    #[test]
    fn dba_combiner_has_horizon_length() {
        let tr = train();
        let cfg = KnnConfig::new(4, DistanceKind::Dtw, CombinerKind::DtwDba);
        assert_eq!(knn_forecast(&tr, &tr[2].input, &cfg).unwrap().len(), 3);
    }
}
