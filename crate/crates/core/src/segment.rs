//! Overlapping sub-datasets, (input, output) instance segmentation and
//! temporally ordered train/validation/test splits.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Direction, ScalerParams, TimeSeries};

/// Length and stride of sub-datasets, both in days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubdatasetSpec {
    pub window_days: usize,
    pub step_days: usize,
}

fn steps_per_day(series: &TimeSeries) -> Result<usize> {
    series.grid().steps_per_day().ok_or_else(|| {
        Error::InvalidParameter(format!(
            "resolution of {}s does not divide a day",
            series.resolution().num_seconds()
        ))
    })
}

/// Number of sub-datasets produced for a series of `days` days.
pub fn subdataset_count(days: usize, window_days: usize, step_days: usize) -> usize {
    if window_days > days || step_days == 0 {
        0
    } else {
        (days - window_days) / step_days + 1
    }
}

/// Contiguous windows of `window_days` days, advancing `step_days` days each.
pub fn create_subdatasets(series: &TimeSeries, spec: SubdatasetSpec) -> Result<Vec<TimeSeries>> {
    if spec.window_days == 0 || spec.step_days == 0 {
        return Err(Error::InvalidParameter("window and step must be at least one day".into()));
    }
    let spd = steps_per_day(series)?;
    let days = series.len() / spd;
    if spec.window_days > days {
        return Err(Error::WindowTooLarge { window: spec.window_days, days });
    }
    (0..subdataset_count(days, spec.window_days, spec.step_days))
        .map(|k| {
            let begin = k * spec.step_days * spd;
            series.slice(begin..begin + spec.window_days * spd)
        })
        .collect()
}

/// An (input, output) pair cut from a series.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Timestamp of the first forecast step.
    pub origin: DateTime<Utc>,
    /// Row of the source series where the input window starts.
    pub offset: usize,
    /// `L × m` input window.
    pub input: TimeSeries,
    /// `h × 1` target window, starting one step after the input ends.
    pub output: TimeSeries,
    /// `h × p` context known over the horizon, when declared.
    pub prospective: Option<TimeSeries>,
}

impl Instance {
    pub fn horizon(&self) -> usize {
        self.output.len()
    }

    pub fn target(&self) -> Vec<f64> {
        self.output.values().to_vec()
    }

    /// Scales (or unscales) every window of the instance with matching channels of `p`.
    pub fn scaled(&self, p: &ScalerParams, direction: Direction) -> Result<Self> {
        let apply = |ts: &TimeSeries| crate::series::scale(ts, &p.select(ts.channels())?, direction);
        Ok(Self {
            origin: self.origin,
            offset: self.offset,
            input: apply(&self.input)?,
            output: apply(&self.output)?,
            prospective: self.prospective.as_ref().map(apply).transpose()?,
        })
    }
}

/// How a series is cut into instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSpec {
    /// Channel forecast over the horizon.
    pub target: String,
    /// Horizon `h` in steps.
    pub horizon: usize,
    /// Input length in steps; defaults to `7 × h`.
    pub input_len: Option<usize>,
    /// Offset between consecutive instances in steps; defaults to one day.
    pub slide: Option<usize>,
    /// Channels of the input window; defaults to every channel of the series.
    pub input_channels: Option<Vec<String>>,
    /// Channels exposed over the horizon as prospective context.
    pub prospective: Vec<String>,
}

impl SegmentSpec {
    pub fn new(target: impl Into<String>, horizon: usize) -> Self {
        Self {
            target: target.into(),
            horizon,
            input_len: None,
            slide: None,
            input_channels: None,
            prospective: Vec::new(),
        }
    }

    pub fn input_len(mut self, steps: usize) -> Self {
        self.input_len = Some(steps);
        self
    }

    pub fn slide(mut self, steps: usize) -> Self {
        self.slide = Some(steps);
        self
    }

    pub fn input_channels(mut self, channels: Vec<String>) -> Self {
        self.input_channels = Some(channels);
        self
    }

    pub fn prospective(mut self, channels: Vec<String>) -> Self {
        self.prospective = channels;
        self
    }

    pub fn resolved_input_len(&self) -> usize {
        self.input_len.unwrap_or(7 * self.horizon)
    }
}

/// Closed-form instance count; zero when the series cannot hold one instance.
pub fn instance_count(len: usize, input_len: usize, horizon: usize, slide: usize) -> usize {
    if len < input_len + horizon || slide == 0 {
        0
    } else {
        (len - input_len - horizon) / slide + 1
    }
}

pub fn segment_instances(series: &TimeSeries, spec: &SegmentSpec) -> Result<Vec<Instance>> {
    let h = spec.horizon;
    if h == 0 {
        return Err(Error::InvalidParameter("horizon must be at least one step".into()));
    }
    let input_len = spec.resolved_input_len();
    if input_len < 2 * h {
        return Err(Error::InputTooShort { input_len, horizon: h });
    }
    let slide = match spec.slide {
        Some(0) => return Err(Error::InvalidParameter("slide must be at least one step".into())),
        Some(s) => s,
        None => steps_per_day(series)?,
    };
    if series.len() < input_len + h {
        return Err(Error::SeriesTooShort { len: series.len(), required: input_len + h });
    }
    if series.channel_index(&spec.target).is_none() {
        return Err(Error::MissingVariable(spec.target.clone()));
    }
    let inputs = match &spec.input_channels {
        Some(channels) => series.select(channels)?,
        None => series.clone(),
    };
    let target = series.select(core::slice::from_ref(&spec.target))?;
    let prospective = (!spec.prospective.is_empty())
        .then(|| series.select(&spec.prospective))
        .transpose()?;

    (0..instance_count(series.len(), input_len, h, slide))
        .map(|k| {
            let offset = k * slide;
            let out = offset + input_len..offset + input_len + h;
            Ok(Instance {
                origin: series.timestamp(out.start),
                offset,
                input: inputs.slice(offset..out.start)?,
                output: target.slice(out.clone())?,
                prospective: prospective.as_ref().map(|p| p.slice(out)).transpose()?,
            })
        })
        .collect()
}

/// A temporally ordered partition of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub train: Vec<Instance>,
    pub validation: Vec<Instance>,
    pub test: Vec<Instance>,
}

impl Fold {
    /// Min-max parameters over every window of the training instances and
    /// nothing else.
    pub fn fit_scaler(&self) -> Result<ScalerParams> {
        let first = self.train.first().ok_or(Error::EmptySplit("train"))?;
        let mut params = ScalerParams { channels: Vec::new(), min: Vec::new(), max: Vec::new() };
        let windows = |inst: &Instance| {
            let mut w: Vec<TimeSeries> = alloc::vec![inst.input.clone(), inst.output.clone()];
            w.extend(inst.prospective.clone());
            w
        };
        for ts in windows(first) {
            for name in ts.channels() {
                if params.channel_index(name).is_none() {
                    params.channels.push(name.clone());
                    params.min.push(f64::INFINITY);
                    params.max.push(f64::NEG_INFINITY);
                }
            }
        }
        for inst in &self.train {
            for ts in windows(inst) {
                for (j, name) in ts.channels().iter().enumerate() {
                    let k = params
                        .channel_index(name)
                        .ok_or_else(|| Error::ChannelMismatch(format!("`{name}` not in every instance")))?;
                    for row in ts.rows() {
                        params.min[k] = params.min[k].min(row[j]);
                        params.max[k] = params.max[k].max(row[j]);
                    }
                }
            }
        }
        Ok(params)
    }

    pub fn scaled(&self, p: &ScalerParams) -> Result<Self> {
        let apply = |set: &[Instance]| {
            set.iter().map(|i| i.scaled(p, Direction::Forward)).collect::<Result<Vec<_>>>()
        };
        Ok(Self { train: apply(&self.train)?, validation: apply(&self.validation)?, test: apply(&self.test)? })
    }

    pub fn check_non_empty(&self) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::EmptySplit("train"));
        }
        if self.validation.is_empty() {
            return Err(Error::EmptySplit("validation"));
        }
        if self.test.is_empty() {
            return Err(Error::EmptySplit("test"));
        }
        Ok(())
    }
}

fn ceil_count(fraction: f64, n: usize) -> usize {
    libm::ceil(fraction * n as f64 - 1e-9).max(0.0) as usize
}

/// Earliest `⌈f_train·n⌉` instances train, the next `⌈f_val·n⌉` validate, the rest test.
pub fn temporal_split(mut instances: Vec<Instance>, fractions: (f64, f64, f64)) -> Result<Fold> {
    let (ft, fv, fs) = fractions;
    if ft <= 0.0 || fv <= 0.0 || fs <= 0.0 || libm::fabs(ft + fv + fs - 1.0) > 1e-9 {
        return Err(Error::BadFractions);
    }
    let n = instances.len();
    if instances.windows(2).any(|w| w[0].origin >= w[1].origin) {
        instances.sort_by_key(|i| i.origin);
    }
    let n_train = ceil_count(ft, n);
    let n_val = ceil_count(fv, n);
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::TooFewInstances(n));
    }
    let test = instances.split_off(n_train + n_val);
    let validation = instances.split_off(n_train);
    Ok(Fold { train: instances, validation, test })
}

/// Sub-datasets → instances → temporal split, one fold per sub-dataset.
pub fn build_folds(
    series: &TimeSeries,
    subdatasets: SubdatasetSpec,
    segments: &SegmentSpec,
    fractions: (f64, f64, f64),
) -> Result<Vec<Fold>> {
    create_subdatasets(series, subdatasets)?
        .iter()
        .map(|sub| temporal_split(segment_instances(sub, segments)?, fractions))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use chrono::{TimeDelta, TimeZone};
    use proptest::prelude::*;

    fn series(len: usize, mins: i64) -> TimeSeries {
        let start = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
        let values = (0..len).flat_map(|t| [t as f64, (t % 7) as f64]).collect();
        TimeSeries::new(start, TimeDelta::minutes(mins), vec!["y".into(), "w".into()], values).unwrap()
    }

    #[test]
    fn subdataset_counts() {
        let daily = series(10, 1440);
        let spec = |w, s| SubdatasetSpec { window_days: w, step_days: s };
        assert_eq!(create_subdatasets(&daily, spec(8, 1)).unwrap().len(), 3);
        assert_eq!(create_subdatasets(&daily, spec(4, 2)).unwrap().len(), 4);
        assert_eq!(create_subdatasets(&daily, spec(10, 3)).unwrap().len(), 1);
        assert_eq!(create_subdatasets(&daily, spec(11, 1)), Err(Error::WindowTooLarge { window: 11, days: 10 }));
        let subs = create_subdatasets(&daily, spec(4, 2)).unwrap();
        assert_eq!(subs[1].column(0), vec![2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn sixteen_days_half_hourly_gives_nine_instances() {
        let s = series(768, 30);
        let inst = segment_instances(&s, &SegmentSpec::new("y", 48)).unwrap();
        assert_eq!(inst.len(), 9);
        let first = &inst[0];
        assert_eq!(first.input.len(), 336);
        assert_eq!(first.output.len(), 48);
        assert_eq!(first.output.start(), first.input.grid().end());
        assert_eq!(inst[1].offset, 48);
    }

    #[test]
    fn segmentation_boundaries() {
        let s = series(30, 30);
        let spec = SegmentSpec::new("y", 10).input_len(20).slide(5);
        assert_eq!(segment_instances(&s, &spec).unwrap().len(), 1);
        let short = series(29, 30);
        assert_eq!(segment_instances(&short, &spec), Err(Error::SeriesTooShort { len: 29, required: 30 }));
        let bad = SegmentSpec::new("y", 10).input_len(19).slide(5);
        assert_eq!(segment_instances(&s, &bad), Err(Error::InputTooShort { input_len: 19, horizon: 10 }));
    }

    #[test]
    fn prospective_covers_horizon_only() {
        let s = series(30, 30);
        let spec = SegmentSpec::new("y", 5)
            .input_len(10)
            .slide(5)
            .input_channels(vec!["y".into()])
            .prospective(vec!["w".into()]);
        let inst = segment_instances(&s, &spec).unwrap();
        let i = &inst[2];
        assert_eq!(i.input.channels(), &["y".to_string()]);
        let p = i.prospective.as_ref().unwrap();
        assert_eq!(p.start(), i.output.start());
        assert_eq!(p.column(0), (20..25).map(|t| (t % 7) as f64).collect::<Vec<_>>());
    }

    fn instances(n: usize) -> Vec<Instance> {
        let s = series(n + 29, 30);
        segment_instances(&s, &SegmentSpec::new("y", 10).input_len(20).slide(1)).unwrap()[..n].to_vec()
    }

    #[test]
    fn split_examples() {
        let fold = temporal_split(instances(10), (0.6, 0.2, 0.2)).unwrap();
        assert_eq!((fold.train.len(), fold.validation.len(), fold.test.len()), (6, 2, 2));
        assert!(fold.train.last().unwrap().origin < fold.validation[0].origin);
        assert!(fold.validation.last().unwrap().origin < fold.test[0].origin);
        assert_eq!(temporal_split(instances(10), (0.5, 0.5, 0.5)), Err(Error::BadFractions));
        assert_eq!(temporal_split(instances(2), (0.6, 0.2, 0.2)), Err(Error::TooFewInstances(2)));
    }

    #[test]
    fn scaler_sees_training_windows_only() {
        let mut fold = temporal_split(instances(10), (0.6, 0.2, 0.2)).unwrap();
        let p = fold.fit_scaler().unwrap();
        // train instances 0..6 span rows 0..35 of `y = t`
        assert_eq!(p.channels, vec!["y".to_string(), "w".to_string()]);
        assert_eq!((p.min[0], p.max[0]), (0.0, 34.0));
        let t = fold.test[0].output.clone();
        fold.test[0].output = TimeSeries::univariate(t.start(), t.resolution(), "y", vec![1e6; t.len()]).unwrap();
        assert_eq!(fold.fit_scaler().unwrap(), p);
    }

    proptest! {
        #[test]
        fn subdataset_count_law(days in 1usize..40, window in 1usize..40, step in 1usize..10) {
            prop_assume!(window <= days);
            let subs = create_subdatasets(&series(days, 1440), SubdatasetSpec { window_days: window, step_days: step }).unwrap();
            prop_assert_eq!(subs.len(), (days - window) / step + 1);
            for pair in subs.windows(2) {
                // consecutive windows overlap by window - step days
                let overlap = pair[0].grid().end().signed_duration_since(pair[1].start()).num_days();
                prop_assert_eq!(overlap, window as i64 - step as i64);
            }
        }

        #[test]
        fn instance_windows_are_ordered(len in 30usize..120, h in 1usize..10, extra in 0usize..10, slide in 1usize..8) {
            let input_len = 2 * h + extra;
            prop_assume!(len >= input_len + h);
            let inst = segment_instances(&series(len, 30), &SegmentSpec::new("y", h).input_len(input_len).slide(slide)).unwrap();
            prop_assert_eq!(inst.len(), (len - input_len - h) / slide + 1);
            for i in &inst {
                prop_assert_eq!(i.output.start(), i.input.grid().end());
                prop_assert_eq!(i.output.start(), i.origin);
            }
        }

        #[test]
        fn fold_order_invariant(n in 3usize..60, a in 1u32..8, b in 1u32..8, c in 1u32..8) {
            let total = f64::from(a + b + c);
            let fr = (f64::from(a) / total, f64::from(b) / total, f64::from(c) / total);
            if let Ok(fold) = temporal_split(instances(n), fr) {
                let max_train = fold.train.iter().map(|i| i.origin).max().unwrap();
                let min_val = fold.validation.iter().map(|i| i.origin).min().unwrap();
                let min_test = fold.test.iter().map(|i| i.origin).min().unwrap();
                prop_assert!(max_train < min_val && min_val < min_test);
                prop_assert_eq!(fold.train.len() + fold.validation.len() + fold.test.len(), n);
            }
        }
    }
}
