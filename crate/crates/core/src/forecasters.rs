//! [`Forecaster`] adapters for every model family.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::baselines::holt_winters::{holt_winters_fit, HoltWintersParams};
use crate::baselines::knn::{knn_forecast, KnnConfig};
use crate::error::{Error, Result};
use crate::eval::Forecaster;
use crate::recurrent::model::SerialModel;
use crate::segment::{Fold, Instance};
use crate::series::{Direction, ScalerParams};

impl Forecaster for SerialModel {
    fn forecast(&self, instance: &Instance) -> Result<Vec<f64>> {
        SerialModel::forecast(self, instance)
    }
}

fn target_history(instance: &Instance) -> Result<Vec<f64>> {
    let name = instance.output.channels().first().ok_or(Error::EmptySeries)?;
    instance.input.channel(name).ok_or_else(|| Error::MissingVariable(name.clone()))
}

/// Repeats the last `period` observed target values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonalNaive {
    pub period: usize,
}

impl Forecaster for SeasonalNaive {
    fn forecast(&self, instance: &Instance) -> Result<Vec<f64>> {
        let history = target_history(instance)?;
        if self.period == 0 || history.len() < self.period {
            return Err(Error::SeriesTooShort { len: history.len(), required: self.period.max(1) });
        }
        let last = &history[history.len() - self.period..];
        Ok((0..instance.horizon()).map(|j| last[j % self.period]).collect())
    }
}

/// Holt-Winters fitted afresh on each instance's input window. `offset` is
/// added before fitting and removed afterwards so that the multiplicative
/// form tolerates zero demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoltWintersForecaster {
    pub params: HoltWintersParams,
    pub offset: f64,
}

impl Forecaster for HoltWintersForecaster {
    fn forecast(&self, instance: &Instance) -> Result<Vec<f64>> {
        let history: Vec<f64> = target_history(instance)?.into_iter().map(|v| v + self.offset).collect();
        let state = holt_winters_fit(&history, self.params)?;
        Ok(state.forecast(instance.horizon())?.into_iter().map(|v| v - self.offset).collect())
    }
}

impl HoltWintersForecaster {
    /// Picks the smoothing factors from `grid` with the lowest validation
    /// MAE; the first candidate wins ties.
    pub fn tune(fold: &Fold, base: HoltWintersParams, offset: f64, grid: &[(f64, f64, f64)]) -> Result<Self> {
        let mut best: Option<(f64, Self)> = None;
        for &(alpha, beta, gamma) in grid {
            let candidate = Self { params: HoltWintersParams { alpha, beta, gamma, ..base }, offset };
            let mae = mean_mae(&candidate, &fold.validation)?;
            if best.as_ref().is_none_or(|(b, _)| mae < *b) {
                best = Some((mae, candidate));
            }
        }
        best.map(|(_, m)| m).ok_or(Error::EmptySpace)
    }
}

/// Default smoothing grid used by [`HoltWintersForecaster::tune`].
pub fn default_smoothing_grid() -> Vec<(f64, f64, f64)> {
    let mut grid = Vec::new();
    for alpha in [0.05, 0.2, 0.5, 0.8] {
        for beta in [0.0, 0.01, 0.1] {
            for gamma in [0.05, 0.2, 0.5] {
                grid.push((alpha, beta, gamma));
            }
        }
    }
    grid
}

/// Mean absolute error of `model` over the instances in original units.
pub fn mean_mae<F: Forecaster>(model: &F, set: &[Instance]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for inst in set {
        let f = model.forecast(inst)?;
        for (p, y) in f.iter().zip(inst.output.values()) {
            total += libm::fabs(p - y);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// kNN over min-max scaled training windows.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnForecaster {
    pub config: KnnConfig,
    pub scaler: ScalerParams,
    pub target: String,
    pub train: Vec<Instance>,
}

impl KnnForecaster {
    /// Uses the training split of `fold`; `k = 0` selects every training
    /// instance (the barycenter forecaster).
    pub fn fit(fold: &Fold, mut config: KnnConfig) -> Result<Self> {
        let scaler = fold.fit_scaler()?;
        let scaled = fold.scaled(&scaler)?;
        if config.k == 0 {
            config.k = scaled.train.len();
        }
        let target = fold.train[0].output.channels()[0].clone();
        Ok(Self { config, scaler, target, train: scaled.train })
    }
}

impl Forecaster for KnnForecaster {
    fn forecast(&self, instance: &Instance) -> Result<Vec<f64>> {
        let query = instance.scaled(&self.scaler, Direction::Forward)?;
        let out = knn_forecast(&self.train, &query.input, &self.config)?;
        let j = self.scaler.channel_index(&self.target).ok_or_else(|| Error::MissingVariable(self.target.clone()))?;
        Ok(out.into_iter().map(|v| self.scaler.inverse(j, v)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::{segment_instances, temporal_split, SegmentSpec};
    use crate::series::TimeSeries;
    use chrono::{TimeDelta, TimeZone, Utc};

    fn fold() -> Fold {
        let start = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
        let y: Vec<f64> = (0..240).map(|t| [0.0, 2.0, 5.0, 3.0, 1.0, 0.0][t % 6] * 2.0).collect();
        let ts = TimeSeries::univariate(start, TimeDelta::hours(4), "y", y).unwrap();
        temporal_split(segment_instances(&ts, &SegmentSpec::new("y", 6).input_len(18).slide(6)).unwrap(), (0.6, 0.2, 0.2))
            .unwrap()
    }

    #[test]
    fn seasonal_naive_is_exact_on_periodic_data() {
        let f = fold();
        assert_eq!(mean_mae(&SeasonalNaive { period: 6 }, &f.test).unwrap(), 0.0);
    }

    #[test]
    fn holt_winters_handles_zero_demand_with_offset() {
        let f = fold();
        let hw = HoltWintersForecaster::tune(&f, HoltWintersParams::new(0.5, 0.0, 0.1, 6), 1.0, &default_smoothing_grid())
            .unwrap();
        assert!(mean_mae(&hw, &f.test).unwrap() < 1e-9);
    }

    #[test]
    fn knn_on_periodic_data_is_exact() {
        let f = fold();
        let knn = KnnForecaster::fit(
            &f,
            KnnConfig::new(3, crate::baselines::knn::DistanceKind::Euclidean, crate::baselines::knn::CombinerKind::EuclideanMean),
        )
        .unwrap();
        assert!(mean_mae(&knn, &f.test).unwrap() < 1e-12);
    }
}
