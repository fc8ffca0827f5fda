//! Uniformly sampled multivariate series, resampling, alignment, min-max
//! scaling, spatial aggregation and flow inference from station load.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Start, resolution and length of a regular time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    pub start: DateTime<Utc>,
    pub resolution: TimeDelta,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(start: DateTime<Utc>, resolution: TimeDelta, len: usize) -> Self {
        Self { start, resolution, len }
    }

    pub fn timestamp(&self, t: usize) -> DateTime<Utc> {
        self.start + self.resolution * t as i32
    }

    pub fn timestamps(&self) -> Vec<DateTime<Utc>> {
        (0..self.len).map(|t| self.timestamp(t)).collect()
    }

    /// Instant just after the last observation.
    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp(self.len)
    }

    /// Number of steps in one day, if the resolution divides a day.
    pub fn steps_per_day(&self) -> Option<usize> {
        let secs = self.resolution.num_seconds();
        (secs > 0 && 86_400 % secs == 0).then(|| (86_400 / secs) as usize)
    }
}

/// A uniformly sampled, timestamped multivariate series stored row-major
/// (row `t` holds observation `x_t` across all channels).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    start: DateTime<Utc>,
    resolution: TimeDelta,
    channels: Vec<String>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(
        start: DateTime<Utc>,
        resolution: TimeDelta,
        channels: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if resolution <= TimeDelta::zero() {
            return Err(Error::InvalidParameter("resolution must be positive".into()));
        }
        if channels.is_empty() {
            return Err(Error::ShapeMismatch("series needs at least one channel".into()));
        }
        for (i, name) in channels.iter().enumerate() {
            if channels[..i].contains(name) {
                return Err(Error::DuplicateChannel(name.clone()));
            }
        }
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if values.len() % channels.len() != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not fill rows of {} channels",
                values.len(),
                channels.len()
            )));
        }
        Ok(Self { start, resolution, channels, values })
    }

    pub fn univariate(
        start: DateTime<Utc>,
        resolution: TimeDelta,
        name: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        Self::new(start, resolution, alloc::vec![name.into()], values)
    }

    /// Builds a series from named columns of equal length.
    pub fn from_columns(
        start: DateTime<Utc>,
        resolution: TimeDelta,
        columns: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let len = columns.first().map(|(_, c)| c.len()).ok_or(Error::EmptySeries)?;
        if let Some((_, c)) = columns.iter().find(|(_, c)| c.len() != len) {
            return Err(Error::LengthMismatch { expected: len, actual: c.len() });
        }
        let width = columns.len();
        let mut values = alloc::vec![0.0; len * width];
        for (j, (_, col)) in columns.iter().enumerate() {
            for (t, v) in col.iter().enumerate() {
                values[t * width + j] = *v;
            }
        }
        let names = columns.into_iter().map(|(n, _)| n).collect();
        Self::new(start, resolution, names, values)
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn resolution(&self) -> TimeDelta {
        self.resolution
    }

    /// Number of observations `T`.
    pub fn len(&self) -> usize {
        self.values.len() / self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multivariate order `m`.
    pub fn width(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.start, self.resolution, self.len())
    }

    pub fn timestamp(&self, t: usize) -> DateTime<Utc> {
        self.grid().timestamp(t)
    }

    pub fn timestamps(&self) -> Vec<DateTime<Utc>> {
        self.grid().timestamps()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let m = self.width();
        &self.values[t * m..(t + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width())
    }

    pub fn value(&self, t: usize, channel: usize) -> f64 {
        self.values[t * self.width() + channel]
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn column(&self, channel: usize) -> Vec<f64> {
        self.rows().map(|r| r[channel]).collect()
    }

    pub fn channel(&self, name: &str) -> Option<Vec<f64>> {
        self.channel_index(name).map(|j| self.column(j))
    }

    /// Sub-series over an index range of rows.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::EmptyRange);
        }
        let m = self.width();
        Ok(Self {
            start: self.timestamp(range.start),
            resolution: self.resolution,
            channels: self.channels.clone(),
            values: self.values[range.start * m..range.end * m].to_vec(),
        })
    }

    /// Keeps the named channels in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.channel_index(n.as_ref())
                    .ok_or_else(|| Error::MissingVariable(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(self.len() * idx.len());
        for row in self.rows() {
            values.extend(idx.iter().map(|&j| row[j]));
        }
        Self::new(
            self.start,
            self.resolution,
            names.iter().map(|n| n.as_ref().to_string()).collect(),
            values,
        )
    }

    pub fn rename(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.width() {
            return Err(Error::ChannelMismatch(format!(
                "{} names for {} channels",
                names.len(),
                self.width()
            )));
        }
        self.channels = names;
        Self::new(self.start, self.resolution, self.channels, self.values)
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.start == other.start
            && self.resolution == other.resolution
            && self.len() == other.len()
    }
}

/// Aggregation applied by [`resample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Bin sums when downsampling; even split across sub-steps when upsampling,
    /// so channel totals are preserved both ways.
    Sum,
    /// Bin means when downsampling; repetition when upsampling.
    Mean,
    /// Repetition across sub-steps; downsampling keeps the first value of each bin.
    Repeat,
}

/// Changes the resolution of `ts` to `target`, which must be an integer
/// multiple or divisor of the current resolution. Incomplete trailing bins
/// are dropped when downsampling.
pub fn resample(ts: &TimeSeries, target: TimeDelta, agg: Aggregation) -> Result<TimeSeries> {
    let from = ts.resolution.num_seconds();
    let to = target.num_seconds();
    if to <= 0 {
        return Err(Error::InvalidParameter("target resolution must be positive".into()));
    }
    if from == to {
        return Ok(ts.clone());
    }
    let m = ts.width();
    let mut values = Vec::new();
    if to % from == 0 {
        let factor = (to / from) as usize;
        let bins = ts.len() / factor;
        if bins == 0 {
            return Err(Error::SeriesTooShort { len: ts.len(), required: factor });
        }
        values.reserve(bins * m);
        for b in 0..bins {
            for j in 0..m {
                let bin = (b * factor..(b + 1) * factor).map(|t| ts.value(t, j));
                values.push(match agg {
                    Aggregation::Sum => bin.sum(),
                    Aggregation::Mean => bin.sum::<f64>() / factor as f64,
                    Aggregation::Repeat => ts.value(b * factor, j),
                });
            }
        }
    } else if from % to == 0 {
        let factor = (from / to) as usize;
        values.reserve(ts.len() * factor * m);
        for row in ts.rows() {
            for _ in 0..factor {
                values.extend(row.iter().map(|v| match agg {
                    Aggregation::Sum => v / factor as f64,
                    Aggregation::Mean | Aggregation::Repeat => *v,
                }));
            }
        }
    } else {
        return Err(Error::NonCommensurableResolution { from_secs: from, to_secs: to });
    }
    TimeSeries::new(ts.start, target, ts.channels.clone(), values)
}

/// Concatenates the channels of aligned series in argument order.
pub fn join_channels(list: &[&TimeSeries]) -> Result<TimeSeries> {
    let first = list.first().ok_or(Error::EmptySeries)?;
    let mut names: Vec<String> = Vec::new();
    for ts in list {
        if !ts.same_grid(first) {
            return Err(Error::Alignment(format!(
                "expected start {} / {}s / T={}, got {} / {}s / T={}",
                first.start,
                first.resolution.num_seconds(),
                first.len(),
                ts.start,
                ts.resolution.num_seconds(),
                ts.len()
            )));
        }
        for name in &ts.channels {
            if names.contains(name) {
                return Err(Error::DuplicateChannel(name.clone()));
            }
            names.push(name.clone());
        }
    }
    let mut values = Vec::with_capacity(first.len() * names.len());
    for t in 0..first.len() {
        for ts in list {
            values.extend_from_slice(ts.row(t));
        }
    }
    TimeSeries::new(first.start, first.resolution, names, values)
}

/// Per-channel min-max parameters, learned from a training index range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub channels: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl ScalerParams {
    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    /// Maps a value of channel `j` to `[0, 1]` over the training range.
    /// Constant channels map to 0; no clipping is applied.
    pub fn forward(&self, j: usize, v: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span > 0.0 {
            (v - self.min[j]) / span
        } else {
            0.0
        }
    }

    pub fn inverse(&self, j: usize, v: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span > 0.0 {
            v * span + self.min[j]
        } else {
            self.min[j]
        }
    }

    /// Parameters restricted to the named channels, in that order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let mut out = Self { channels: Vec::new(), min: Vec::new(), max: Vec::new() };
        for name in names {
            let j = self
                .channel_index(name.as_ref())
                .ok_or_else(|| Error::ChannelMismatch(format!("no scaler for `{}`", name.as_ref())))?;
            out.channels.push(self.channels[j].clone());
            out.min.push(self.min[j]);
            out.max.push(self.max[j]);
        }
        Ok(out)
    }
}

/// Learns per-channel extrema over `train_range` only.
pub fn fit_minmax(ts: &TimeSeries, train_range: Range<usize>) -> Result<ScalerParams> {
    if train_range.start >= train_range.end || train_range.end > ts.len() {
        return Err(Error::EmptyRange);
    }
    let m = ts.width();
    let mut min = alloc::vec![f64::INFINITY; m];
    let mut max = alloc::vec![f64::NEG_INFINITY; m];
    for t in train_range {
        for (j, &v) in ts.row(t).iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(ScalerParams { channels: ts.channels.clone(), min, max })
}

/// Applies (or inverts) min-max scaling. Channels are matched by position
/// and must carry the names the parameters were fitted on.
pub fn scale(ts: &TimeSeries, p: &ScalerParams, direction: Direction) -> Result<TimeSeries> {
    if p.channels != ts.channels {
        return Err(Error::ChannelMismatch(format!(
            "series channels {:?} vs scaler channels {:?}",
            ts.channels, p.channels
        )));
    }
    let m = ts.width();
    let values = ts
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| match direction {
            Direction::Forward => p.forward(i % m, v),
            Direction::Inverse => p.inverse(i % m, v),
        })
        .collect();
    TimeSeries::new(ts.start, ts.resolution, ts.channels.clone(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StationId(pub u32);

impl core::fmt::Display for StationId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A docking station with its dock-count history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: StationId,
    pub latitude: f64,
    pub longitude: f64,
    /// `(effective from, dock count)`, strictly increasing in time.
    pub capacity: Vec<(DateTime<Utc>, u32)>,
}

impl Station {
    pub fn new(
        id: StationId,
        latitude: f64,
        longitude: f64,
        capacity: Vec<(DateTime<Utc>, u32)>,
    ) -> Result<Self> {
        if capacity.is_empty() {
            return Err(Error::InvalidParameter(format!("station {id} has no capacity record")));
        }
        if capacity.iter().any(|(_, c)| *c == 0) {
            return Err(Error::InvalidParameter(format!("station {id} has a zero capacity")));
        }
        if capacity.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParameter(format!(
                "station {id} capacity timestamps are not strictly increasing"
            )));
        }
        Ok(Self { id, latitude, longitude, capacity })
    }

    /// Dock count in effect at `ts`; the first record applies before its own timestamp.
    pub fn capacity_at(&self, ts: DateTime<Utc>) -> u32 {
        let idx = self.capacity.partition_point(|(from, _)| *from <= ts);
        self.capacity[idx.saturating_sub(1)].1
    }

    pub fn location(&self) -> (f64, f64) {
        (self.latitude, self.longitude)
    }
}

/// Pointwise sum of the per-station series over `subset`.
pub fn aggregate_stations(
    per_station: &BTreeMap<StationId, TimeSeries>,
    subset: &[StationId],
) -> Result<TimeSeries> {
    let first_id = subset.first().ok_or(Error::EmptySubset)?;
    let lookup = |id: &StationId| {
        per_station
            .get(id)
            .ok_or_else(|| Error::Alignment(format!("no series for station {id}")))
    };
    let first = lookup(first_id)?;
    let mut values = alloc::vec![0.0; first.values.len()];
    // Sum in ascending id order so the result does not depend on subset order.
    let mut ids: Vec<StationId> = subset.to_vec();
    ids.sort_unstable();
    ids.dedup();
    for id in &ids {
        let ts = lookup(id)?;
        if !ts.same_grid(first) || ts.channels != first.channels {
            return Err(Error::Alignment(format!("station {id} is not aligned with {first_id}")));
        }
        for (acc, v) in values.iter_mut().zip(&ts.values) {
            *acc += v;
        }
    }
    TimeSeries::new(first.start, first.resolution, first.channels.clone(), values)
}

/// Check-ins and check-outs inferred from consecutive load differences.
#[derive(Debug, Clone, PartialEq)]
pub struct Flows {
    pub checkins: TimeSeries,
    pub checkouts: TimeSeries,
}

/// Splits load differences into positive (check-in) and negative
/// (check-out) parts. The first step and steps at which the station's
/// capacity changes contribute zero to both flows.
pub fn infer_flows(load: &TimeSeries, station: &Station) -> Result<Flows> {
    if load.width() != 1 {
        return Err(Error::ChannelMismatch("load series must be univariate".into()));
    }
    let grid = load.grid();
    let mut capacity_prev = station.capacity_at(grid.timestamp(0));
    let mut checkins = Vec::with_capacity(load.len());
    let mut checkouts = Vec::with_capacity(load.len());
    for t in 0..load.len() {
        let capacity = station.capacity_at(grid.timestamp(t));
        let current = load.values[t];
        if current < 0.0 || current > f64::from(capacity) || !current.is_finite() {
            return Err(Error::LoadExceedsCapacity { step: t, load: current, capacity });
        }
        let delta = if t == 0 || capacity != capacity_prev {
            0.0
        } else {
            current - load.values[t - 1]
        };
        checkins.push(delta.max(0.0));
        checkouts.push((-delta).max(0.0));
        capacity_prev = capacity;
    }
    Ok(Flows {
        checkins: TimeSeries::univariate(load.start, load.resolution, "checkins", checkins)?,
        checkouts: TimeSeries::univariate(load.start, load.resolution, "checkouts", checkouts)?,
    })
}
