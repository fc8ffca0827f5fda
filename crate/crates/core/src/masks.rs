//! Context channels appended to demand series: calendrical, situational,
//! meteorological and spatial (nearby-station occupation) masks.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{join_channels, resample, Aggregation, Station, StationId, TimeGrid, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    CategoricalCode,
    Binary,
    Magnitude,
    Ratio,
    Continuous,
}

/// A derived context channel, one value per observation of the target grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskChannel {
    pub name: String,
    pub values: Vec<f64>,
    pub kind: MaskKind,
}

impl MaskChannel {
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Expands a categorical channel into `codes` binary indicator channels.
    pub fn one_hot(&self, codes: usize) -> Result<Vec<MaskChannel>> {
        if self.kind != MaskKind::CategoricalCode {
            return Err(Error::InvalidParameter(format!("`{}` is not categorical", self.name)));
        }
        if let Some(v) = self.values.iter().find(|v| **v < 0.0 || **v >= codes as f64) {
            return Err(Error::InvalidParameter(format!("code {v} outside 0..{codes}")));
        }
        Ok((0..codes)
            .map(|c| MaskChannel {
                name: format!("{}={c}", self.name),
                values: self.values.iter().map(|v| f64::from(*v as usize == c)).collect(),
                kind: MaskKind::Binary,
            })
            .collect())
    }
}

/// Appends mask channels to `ts`; every mask must have exactly `T` values.
pub fn append_masks(ts: &TimeSeries, masks: &[MaskChannel]) -> Result<TimeSeries> {
    let mut parts = Vec::with_capacity(masks.len());
    for mask in masks {
        if mask.values.len() != ts.len() {
            return Err(Error::LengthMismatch { expected: ts.len(), actual: mask.values.len() });
        }
        parts.push(TimeSeries::univariate(ts.start(), ts.resolution(), mask.name.clone(), mask.values.clone())?);
    }
    let mut all = Vec::with_capacity(parts.len() + 1);
    all.push(ts);
    all.extend(parts.iter());
    join_channels(&all)
}

fn local(ts: DateTime<Utc>, tz: FixedOffset) -> DateTime<FixedOffset> {
    ts.with_timezone(&tz)
}

/// Weekday → code mapping, indexed Monday = 0 … Sunday = 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekdayMapping(pub [u32; 7]);

impl WeekdayMapping {
    pub const IDENTITY: Self = Self([0, 1, 2, 3, 4, 5, 6]);
    /// `{weekday: 0, saturday: 1, sunday: 2}`.
    pub const WEEKDAY_SATURDAY_SUNDAY: Self = Self([0, 0, 0, 0, 0, 1, 2]);

    pub fn code(&self, weekday: chrono::Weekday) -> u32 {
        self.0[weekday.num_days_from_monday() as usize]
    }
}

pub fn day_mask(grid: &TimeGrid, mapping: &WeekdayMapping, tz: FixedOffset) -> MaskChannel {
    MaskChannel {
        name: "day".into(),
        values: grid
            .timestamps()
            .into_iter()
            .map(|ts| f64::from(mapping.code(local(ts, tz).weekday())))
            .collect(),
        kind: MaskKind::CategoricalCode,
    }
}

pub fn holiday_mask(grid: &TimeGrid, holidays: &[NaiveDate], tz: FixedOffset) -> MaskChannel {
    MaskChannel {
        name: "holiday".into(),
        values: grid
            .timestamps()
            .into_iter()
            .map(|ts| f64::from(holidays.contains(&local(ts, tz).date_naive())))
            .collect(),
        kind: MaskKind::Binary,
    }
}

/// One row of a calendar table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarDay {
    pub date: NaiveDate,
    pub is_holiday: bool,
    pub is_academic_break: bool,
    pub is_festivity: bool,
}

/// Dates of `days` for which `flag` holds.
pub fn calendar_dates(days: &[CalendarDay], flag: impl Fn(&CalendarDay) -> bool) -> Vec<NaiveDate> {
    days.iter().filter(|d| flag(d)).map(|d| d.date).collect()
}

/// A time-of-day bin `[start_minute, end_minute)` with its code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourBin {
    pub start_minute: u32,
    pub end_minute: u32,
    pub code: u32,
}

/// A partition of the day into coded bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HourBins(Vec<HourBin>);

impl HourBins {
    pub fn new(mut bins: Vec<HourBin>) -> Result<Self> {
        bins.sort_by_key(|b| b.start_minute);
        let mut expected = 0;
        for bin in &bins {
            if bin.start_minute != expected || bin.end_minute <= bin.start_minute {
                return Err(Error::OverlappingBins);
            }
            expected = bin.end_minute;
        }
        if expected != 24 * 60 {
            return Err(Error::OverlappingBins);
        }
        Ok(Self(bins))
    }

    /// `n` equal-width bins coded `0..n`; `4` gives dawn, morning, afternoon, evening.
    pub fn uniform(n: u32) -> Result<Self> {
        if n == 0 || (24 * 60) % n != 0 {
            return Err(Error::OverlappingBins);
        }
        let width = 24 * 60 / n;
        Self::new(
            (0..n)
                .map(|i| HourBin { start_minute: i * width, end_minute: (i + 1) * width, code: i })
                .collect(),
        )
    }

    pub fn code(&self, minute_of_day: u32) -> u32 {
        let idx = self.0.partition_point(|b| b.start_minute <= minute_of_day);
        self.0[idx - 1].code
    }
}

pub fn hour_mask(grid: &TimeGrid, bins: &HourBins, tz: FixedOffset) -> MaskChannel {
    MaskChannel {
        name: "hour".into(),
        values: grid
            .timestamps()
            .into_iter()
            .map(|ts| {
                let l = local(ts, tz);
                f64::from(bins.code(l.hour() * 60 + l.minute()))
            })
            .collect(),
        kind: MaskKind::CategoricalCode,
    }
}

/// 1 on local dates inside any inclusive `(first, last)` interval.
pub fn period_mask(grid: &TimeGrid, intervals: &[(NaiveDate, NaiveDate)], tz: FixedOffset) -> MaskChannel {
    MaskChannel {
        name: "period".into(),
        values: grid
            .timestamps()
            .into_iter()
            .map(|ts| {
                let d = local(ts, tz).date_naive();
                f64::from(intervals.iter().any(|(a, b)| *a <= d && d <= *b))
            })
            .collect(),
        kind: MaskKind::Binary,
    }
}

/// How distances between `(lat, lon)` pairs are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeoDistance {
    /// Straight-line distance on raw degrees.
    #[default]
    Euclidean,
    /// Great-circle distance in kilometres.
    Haversine,
}

impl GeoDistance {
    pub fn between(self, a: (f64, f64), b: (f64, f64)) -> f64 {
        match self {
            Self::Euclidean => libm::hypot(a.0 - b.0, a.1 - b.1),
            Self::Haversine => {
                const EARTH_RADIUS_KM: f64 = 6371.0088;
                let (lat1, lat2) = (a.0.to_radians(), b.0.to_radians());
                let dlat = lat2 - lat1;
                let dlon = (b.1 - a.1).to_radians();
                let s = libm::pow(libm::sin(dlat / 2.0), 2.0)
                    + libm::cos(lat1) * libm::cos(lat2) * libm::pow(libm::sin(dlon / 2.0), 2.0);
                2.0 * EARTH_RADIUS_KM * libm::asin(libm::sqrt(s).min(1.0))
            }
        }
    }
}

/// A situated event with an ordinal magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub latitude: f64,
    pub longitude: f64,
    pub magnitude: u32,
    pub label: String,
}

impl EventRecord {
    pub fn new(
        start: DateTime<Utc>,
        end: DateTime<Utc>,
        location: (f64, f64),
        magnitude: u32,
        label: impl Into<String>,
    ) -> Result<Self> {
        if end <= start {
            return Err(Error::InvalidParameter("event must end after it starts".into()));
        }
        if magnitude == 0 {
            return Err(Error::InvalidParameter("event magnitude must be at least 1".into()));
        }
        Ok(Self { start, end, latitude: location.0, longitude: location.1, magnitude, label: label.into() })
    }

    pub fn location(&self) -> (f64, f64) {
        (self.latitude, self.longitude)
    }
}

/// Magnitude channel for events within `max_dist` of `location`.
///
/// Steps whose timestamp falls in `[start, end)` carry the event magnitude;
/// `ramp_steps` steps on either side carry a shoulder value of 1. Overlapping
/// events combine by pointwise maximum.
pub fn event_mask(
    grid: &TimeGrid,
    events: &[EventRecord],
    location: (f64, f64),
    max_dist: f64,
    ramp_steps: usize,
    metric: GeoDistance,
) -> Result<MaskChannel> {
    if max_dist <= 0.0 {
        return Err(Error::InvalidParameter("max_dist must be positive".into()));
    }
    let mut values = alloc::vec![0.0f64; grid.len];
    let timestamps = grid.timestamps();
    for ev in events.iter().filter(|e| metric.between(e.location(), location) <= max_dist) {
        let first = timestamps.partition_point(|ts| *ts < ev.start);
        let last = timestamps.partition_point(|ts| *ts < ev.end);
        if first >= last {
            continue;
        }
        let magnitude = f64::from(ev.magnitude);
        for v in &mut values[first..last] {
            *v = v.max(magnitude);
        }
        let shoulder_lo = first.saturating_sub(ramp_steps);
        let shoulder_hi = (last + ramp_steps).min(grid.len);
        for t in (shoulder_lo..first).chain(last..shoulder_hi) {
            values[t] = values[t].max(1.0);
        }
    }
    Ok(MaskChannel { name: "event".into(), values, kind: MaskKind::Magnitude })
}

/// A meteorological station and its observations.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherStation {
    pub id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub series: TimeSeries,
}

impl WeatherStation {
    pub fn location(&self) -> (f64, f64) {
        (self.latitude, self.longitude)
    }
}

/// Weather channels for `target`, from its nearest station (`k = 1`) or an
/// inverse-distance weighted average of the `k` nearest, repeated onto `grid`.
/// `k` beyond the number of stations uses all of them.
pub fn weather_channels(
    weather: &[WeatherStation],
    target: (f64, f64),
    k: usize,
    variables: &[&str],
    grid: &TimeGrid,
    metric: GeoDistance,
) -> Result<Vec<MaskChannel>> {
    if weather.is_empty() {
        return Err(Error::NoStations);
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let k = k.min(weather.len());
    let mut ranked: Vec<(f64, &WeatherStation)> =
        weather.iter().map(|w| (metric.between(w.location(), target), w)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    ranked.truncate(k);
    let weights: Vec<f64> = if ranked[0].0 == 0.0 || k == 1 {
        ranked.iter().enumerate().map(|(i, _)| f64::from(i == 0)).collect()
    } else {
        let raw: Vec<f64> = ranked.iter().map(|(d, _)| 1.0 / d).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    };

    let mut aligned = Vec::with_capacity(k);
    for (_, station) in &ranked {
        let series = station.series.select(variables)?;
        aligned.push(align_to_grid(&series, grid)?);
    }
    Ok(variables
        .iter()
        .enumerate()
        .map(|(j, var)| {
            let values = (0..grid.len)
                .map(|t| {
                    aligned
                        .iter()
                        .zip(&weights)
                        .filter(|(_, w)| **w > 0.0)
                        .map(|(s, w)| w * s.value(t, j))
                        .sum()
                })
                .collect();
            MaskChannel { name: (*var).to_string(), values, kind: MaskKind::Continuous }
        })
        .collect())
}

/// Repeat-upsamples `series` to the grid resolution and cuts the grid span out of it.
fn align_to_grid(series: &TimeSeries, grid: &TimeGrid) -> Result<TimeSeries> {
    let fine = resample(series, grid.resolution, Aggregation::Repeat)?;
    let offset = grid.start - fine.start();
    let step = grid.resolution.num_seconds();
    if offset.num_seconds() < 0 || offset.num_seconds() % step != 0 {
        return Err(Error::Alignment(format!(
            "series starting {} does not cover grid start {}",
            fine.start(),
            grid.start
        )));
    }
    let first = (offset.num_seconds() / step) as usize;
    if first + grid.len > fine.len() {
        return Err(Error::Alignment(format!("series ends before grid end {}", grid.end())));
    }
    fine.slice(first..first + grid.len)
}

/// Inputs of the nearby-station occupation mask.
#[derive(Debug, Clone)]
pub struct NearbyMaskSpec<'a> {
    /// Target stations under analysis.
    pub targets: Vec<StationId>,
    pub stations: &'a [Station],
    /// Docked-bike count per station, aligned with `series`.
    pub loads: &'a BTreeMap<StationId, TimeSeries>,
    pub radius: f64,
    pub series: TimeSeries,
    pub metric: GeoDistance,
}

/// Mean latitude and longitude of the given stations.
pub fn centroid(stations: &[&Station]) -> Option<(f64, f64)> {
    if stations.is_empty() {
        return None;
    }
    let n = stations.len() as f64;
    let lat = stations.iter().map(|s| s.latitude).sum::<f64>() / n;
    let lon = stations.iter().map(|s| s.longitude).sum::<f64>() / n;
    Some((lat, lon))
}

/// Stations (excluding the targets) closer than `radius` to the target centroid,
/// in ascending id order.
pub fn nearby_stations<'a>(
    targets: &[StationId],
    stations: &'a [Station],
    radius: f64,
    metric: GeoDistance,
) -> Result<Vec<&'a Station>> {
    let selected: Vec<&Station> = stations.iter().filter(|s| targets.contains(&s.id)).collect();
    let center = centroid(&selected).ok_or(Error::EmptyTargetSet)?;
    let mut nearby: Vec<&Station> = stations
        .iter()
        .filter(|s| !targets.contains(&s.id) && metric.between(center, s.location()) < radius)
        .collect();
    nearby.sort_by_key(|s| s.id);
    Ok(nearby)
}

/// Appends one occupation-ratio channel (`num_bikes / capacity`) per nearby
/// station, named `nearby_<id>`.
pub fn create_nearby_mask(spec: &NearbyMaskSpec<'_>) -> Result<TimeSeries> {
    if spec.radius <= 0.0 {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    let nearby = nearby_stations(&spec.targets, spec.stations, spec.radius, spec.metric)?;
    let grid = spec.series.grid();
    let timestamps = grid.timestamps();
    let mut masks = Vec::with_capacity(nearby.len());
    for station in nearby {
        let load = spec
            .loads
            .get(&station.id)
            .ok_or_else(|| Error::Alignment(format!("no load series for station {}", station.id)))?;
        if load.grid() != grid || load.width() != 1 {
            return Err(Error::Alignment(format!("load of station {} is not aligned", station.id)));
        }
        let values = timestamps
            .iter()
            .zip(load.values())
            .enumerate()
            .map(|(t, (ts, bikes))| {
                let capacity = station.capacity_at(*ts);
                if *bikes < 0.0 || *bikes > f64::from(capacity) {
                    Err(Error::LoadExceedsCapacity { step: t, load: *bikes, capacity })
                } else {
                    Ok(bikes / f64::from(capacity))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        masks.push(MaskChannel { name: format!("nearby_{}", station.id), values, kind: MaskKind::Ratio });
    }
    append_masks(&spec.series, &masks)
}
