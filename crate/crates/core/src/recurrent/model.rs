//! The serial C1 → C2 forecaster.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cell::CellKind;
use super::network::{Encoder, Network, Refiner, Sample};
use super::train::{fit_network, History, TrainConfig};
use crate::error::{Error, Result};
use crate::segment::{Fold, Instance};
use crate::series::{Direction, ScalerParams, TimeSeries};

/// Architecture of a serial model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub c1_cell: CellKind,
    /// Hidden units of each stacked C1 layer.
    pub c1_hidden: Vec<usize>,
    /// C2 is built only when this is set.
    pub c2_hidden: Option<usize>,
    pub c2_cell: CellKind,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { c1_cell: CellKind::Lstm, c1_hidden: alloc::vec![64], c2_hidden: None, c2_cell: CellKind::Lstm }
    }
}

impl ModelSpec {
    pub fn with_refiner(mut self, hidden: usize) -> Self {
        self.c2_hidden = Some(hidden);
        self
    }
}

/// Loss histories of the two training stages.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub c1: History,
    pub c2: Option<History>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerialModel {
    pub spec: ModelSpec,
    pub config: TrainConfig,
    pub target: String,
    pub input_channels: Vec<String>,
    pub prospective_channels: Vec<String>,
    pub input_len: usize,
    pub horizon: usize,
    pub scaler: ScalerParams,
    pub c1: Encoder,
    pub c2: Option<Refiner>,
}

fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

impl SerialModel {
    /// Randomly initialised model shaped after the fold's instances, with
    /// the scaler fitted on the training split.
    pub fn initialise(spec: &ModelSpec, fold: &Fold, config: &TrainConfig) -> Result<Self> {
        fold.check_non_empty()?;
        let first = &fold.train[0];
        let scaler = fold.fit_scaler()?;
        let target = first
            .output
            .channels()
            .first()
            .cloned()
            .ok_or_else(|| Error::ShapeMismatch("instance without a target channel".into()))?;
        let prospective_channels = first.prospective.as_ref().map(|p| p.channels().to_vec()).unwrap_or_default();
        let mut rng = init_rng(config.seed);
        let c1 = Encoder::new(spec.c1_cell, first.input.width(), &spec.c1_hidden, first.horizon(), &mut rng)?;
        let c2 = spec
            .c2_hidden
            .map(|h| Refiner::new(spec.c2_cell, prospective_channels.len(), h, &mut rng))
            .transpose()?;
        Ok(Self {
            spec: spec.clone(),
            config: *config,
            target,
            input_channels: first.input.channels().to_vec(),
            prospective_channels,
            input_len: first.input.len(),
            horizon: first.horizon(),
            scaler,
            c1,
            c2,
        })
    }

    fn check_input(&self, input: &TimeSeries) -> Result<()> {
        if input.channels() != self.input_channels.as_slice() || input.len() != self.input_len {
            return Err(Error::ShapeMismatch(format!(
                "expected {} × {:?} input, got {} × {:?}",
                self.input_len,
                self.input_channels,
                input.len(),
                input.channels()
            )));
        }
        Ok(())
    }

    /// C1 forecast in scaled space from a scaled input window.
    pub fn c1_forecast(&self, input: &TimeSeries) -> Result<Vec<f64>> {
        self.check_input(input)?;
        self.c1.predict(&Sample { input: input.values().to_vec(), context: Vec::new(), target: Vec::new() })
    }

    /// Refines a scaled C1 forecast with scaled `h × p` prospective values
    /// (row-major). Without a C2 component the forecast is returned as is.
    pub fn c2_refine(&self, c1_forecast: &[f64], prospective: &[f64]) -> Result<Vec<f64>> {
        match &self.c2 {
            Some(c2) => c2.predict(&Sample {
                input: c1_forecast.to_vec(),
                context: prospective.to_vec(),
                target: Vec::new(),
            }),
            None => Ok(c1_forecast.to_vec()),
        }
    }

    fn scaled_prospective(&self, instance: &Instance) -> Result<Vec<f64>> {
        match (&instance.prospective, self.prospective_channels.is_empty()) {
            (_, true) => Ok(Vec::new()),
            (Some(p), false) if p.channels() == self.prospective_channels.as_slice() => Ok(p.values().to_vec()),
            _ => Err(Error::ChannelMismatch(format!("instance lacks prospective {:?}", self.prospective_channels))),
        }
    }

    /// Forecast in original units for a raw (unscaled) instance.
    pub fn forecast(&self, instance: &Instance) -> Result<Vec<f64>> {
        let scaled = instance.scaled(&self.scaler, Direction::Forward)?;
        let c1 = self.c1_forecast(&scaled.input)?;
        let out = if self.c2.is_some() { self.c2_refine(&c1, &self.scaled_prospective(&scaled)?)? } else { c1 };
        let j = self
            .scaler
            .channel_index(&self.target)
            .ok_or_else(|| Error::ChannelMismatch(format!("no scaler for `{}`", self.target)))?;
        Ok(out.into_iter().map(|v| self.scaler.inverse(j, v)).collect())
    }

    fn c1_samples(set: &[Instance]) -> Vec<Sample> {
        set.iter()
            .map(|i| Sample { input: i.input.values().to_vec(), context: Vec::new(), target: i.target() })
            .collect()
    }

    fn c2_samples(&self, set: &[Instance]) -> Result<Vec<Sample>> {
        set.iter()
            .map(|i| {
                Ok(Sample {
                    input: self.c1_forecast(&i.input)?,
                    context: self.scaled_prospective(i)?,
                    target: i.target(),
                })
            })
            .collect()
    }

    /// Trains C1 on the fold, then C2 on C1's inference-mode forecasts.
    pub fn train(spec: &ModelSpec, fold: &Fold, config: &TrainConfig) -> Result<(Self, TrainReport)> {
        let mut model = Self::initialise(spec, fold, config)?;
        let scaled = fold.scaled(&model.scaler)?;
        let (c1, c1_history) = fit_network(
            model.c1.clone(),
            &Self::c1_samples(&scaled.train),
            &Self::c1_samples(&scaled.validation),
            config,
        )?;
        model.c1 = c1;
        let mut report = TrainReport { c1: c1_history, c2: None };
        if let Some(c2) = model.c2.clone() {
            let c2_config = TrainConfig { seed: config.seed.wrapping_add(1), ..*config };
            let train = model.c2_samples(&scaled.train)?;
            let validation = model.c2_samples(&scaled.validation)?;
            let (c2, history) = fit_network(c2, &train, &validation, &c2_config)?;
            model.c2 = Some(c2);
            report.c2 = Some(history);
        }
        Ok((model, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recurrent::loss::Loss;
    use crate::segment::{segment_instances, temporal_split, SegmentSpec};
    use crate::series::TimeSeries;
    use chrono::{TimeDelta, TimeZone, Utc};

    fn fold(prospective: bool) -> Fold {
        let start = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
        let n = 200;
        let y: Vec<f64> = (0..n).map(|t| 5.0 + 3.0 * libm::sin(t as f64 * 0.5)).collect();
        let w: Vec<f64> = (0..n).map(|t| (t % 5) as f64).collect();
        let ts = TimeSeries::from_columns(start, TimeDelta::minutes(30), alloc::vec![("y".into(), y), ("w".into(), w)]).unwrap();
        let mut spec = SegmentSpec::new("y", 4).input_len(8).slide(3);
        if prospective {
            spec = spec.prospective(alloc::vec!["w".into()]);
        }
        temporal_split(segment_instances(&ts, &spec).unwrap(), (0.6, 0.2, 0.2)).unwrap()
    }

    fn config() -> TrainConfig {
        TrainConfig { learning_rate: 1e-2, max_epochs: 30, patience: 5, loss: Loss::Mse, ..TrainConfig::default() }
    }

    #[test]
    fn forecasts_have_horizon_length_and_are_deterministic() {
        let f = fold(true);
        let spec = ModelSpec { c1_hidden: alloc::vec![6], ..ModelSpec::default() }.with_refiner(4);
        let (a, ra) = SerialModel::train(&spec, &f, &config()).unwrap();
        let (b, rb) = SerialModel::train(&spec, &f, &config()).unwrap();
        assert_eq!(ra, rb);
        assert!(ra.c2.is_some());
        for inst in &f.test {
            let fa = a.forecast(inst).unwrap();
            assert_eq!(fa.len(), 4);
            assert_eq!(fa, b.forecast(inst).unwrap());
        }
    }

    #[test]
    fn refine_rejects_short_prospective() {
        let f = fold(true);
        let spec = ModelSpec { c1_hidden: alloc::vec![3], ..ModelSpec::default() }.with_refiner(3);
        let m = SerialModel::initialise(&spec, &f, &config()).unwrap();
        assert!(matches!(m.c2_refine(&[0.1; 4], &[0.0; 3]), Err(Error::LengthMismatch { .. })));
        assert_eq!(m.c2_refine(&[0.1; 4], &[0.0; 4]).unwrap().len(), 4);
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let f = fold(false);
        let m = SerialModel::initialise(&ModelSpec::default(), &f, &config()).unwrap();
        let short = f.train[0].input.slice(0..5).unwrap();
        assert!(matches!(m.c1_forecast(&short), Err(Error::ShapeMismatch(_))));
    }
}
