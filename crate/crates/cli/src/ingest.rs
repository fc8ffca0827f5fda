//! Builds aligned per-station series and context records from the CSV schemas.

use std::collections::BTreeMap;
use std::path::Path;

use bikecast_core::masks::{centroid, CalendarDay, EventRecord, WeatherStation};
use bikecast_core::series::{aggregate_stations, infer_flows, join_channels};
use bikecast_core::{Station, StationId, TimeSeries};
use chrono::{DateTime, TimeDelta, Utc};

use crate::config::{CsvSources, Level};
use crate::csvio::{self, as_of, StationRow, StatusRow};
use crate::error::{CliError, Result};

/// Everything the later stages need from the raw tables.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub stations: Vec<Station>,
    /// Docked bikes per station on the common grid (`load`).
    pub loads: BTreeMap<StationId, TimeSeries>,
    /// Inferred `checkins` and `checkouts` per station.
    pub flows: BTreeMap<StationId, TimeSeries>,
    pub weather: Vec<WeatherStation>,
    pub events: Vec<EventRecord>,
    pub calendar: Vec<CalendarDay>,
}

fn ceil_to(ts: DateTime<Utc>, step: TimeDelta) -> DateTime<Utc> {
    let s = step.num_seconds();
    let secs = ts.timestamp();
    let up = secs.div_euclid(s) * s + if secs.rem_euclid(s) == 0 { 0 } else { s };
    DateTime::from_timestamp(up, 0).expect("in range")
}

fn floor_to(ts: DateTime<Utc>, step: TimeDelta) -> DateTime<Utc> {
    let s = step.num_seconds();
    DateTime::from_timestamp(ts.timestamp().div_euclid(s) * s, 0).expect("in range")
}

/// Reads the CSV tables named in `sources`.
///
/// Station status is placed on a grid of `resolution` steps starting at the
/// first step by which every station has reported; each step carries the
/// latest report at or before it. Capacity changes seen in the status table
/// become capacity records, so flows at those steps are zero.
pub fn ingest(sources: &CsvSources, resolution: TimeDelta) -> Result<Dataset> {
    let station_rows: Vec<StationRow> = csvio::read_rows(&sources.stations)?;
    let status: Vec<StatusRow> = csvio::read_rows(&sources.station_status)?;
    let status_path = sources.station_status.as_path();

    let mut reports: BTreeMap<u32, Vec<(DateTime<Utc>, (u32, u32))>> = BTreeMap::new();
    for r in status {
        reports.entry(r.station_id).or_default().push((r.timestamp, (r.num_bikes, r.capacity)));
    }
    for obs in reports.values_mut() {
        obs.sort_by_key(|(ts, _)| *ts);
    }
    if let Some(row) = station_rows.iter().find(|s| !reports.contains_key(&s.station_id)) {
        return Err(CliError::format(status_path, format!("no status reports for station {}", row.station_id)));
    }
    let first = reports.values().map(|o| o[0].0).max().ok_or_else(|| CliError::format(status_path, "no rows"))?;
    let last = reports.values().map(|o| o[o.len() - 1].0).max().expect("non-empty");
    let start = ceil_to(first, resolution);
    let end = floor_to(last, resolution);
    if end < start {
        return Err(CliError::format(status_path, "reports do not span one step"));
    }
    let len = ((end - start).num_seconds() / resolution.num_seconds()) as usize + 1;

    let mut stations = Vec::new();
    let mut loads = BTreeMap::new();
    let mut flows = BTreeMap::new();
    for row in &station_rows {
        let id = StationId(row.station_id);
        let Some(obs) = reports.get(&row.station_id) else { continue };
        let states = as_of(obs, start, resolution, len);
        let mut capacity = vec![(start, states[0].1)];
        for (t, (_, cap)) in states.iter().enumerate().skip(1) {
            if *cap != capacity[capacity.len() - 1].1 {
                capacity.push((start + resolution * t as i32, *cap));
            }
        }
        let station = Station::new(id, row.latitude, row.longitude, capacity)?;
        let load = TimeSeries::univariate(start, resolution, "load", states.iter().map(|(b, _)| f64::from(*b)).collect())?;
        let f = infer_flows(&load, &station)?;
        flows.insert(id, join_channels(&[&f.checkins, &f.checkouts])?);
        loads.insert(id, load);
        stations.push(station);
    }

    Ok(Dataset {
        stations,
        loads,
        flows,
        weather: sources.weather.as_deref().map(csvio::read_weather).transpose()?.unwrap_or_default(),
        events: sources.events.as_deref().map(csvio::read_events).transpose()?.unwrap_or_default(),
        calendar: sources.calendar.as_deref().map(csvio::read_calendar).transpose()?.unwrap_or_default(),
    })
}

impl Dataset {
    pub fn target_ids(&self, level: &Level) -> Result<Vec<StationId>> {
        let ids: Vec<StationId> = match level {
            Level::System => self.stations.iter().map(|s| s.id).collect(),
            Level::Station(id) => vec![StationId(*id)],
            Level::Cluster(ids) => ids.iter().map(|i| StationId(*i)).collect(),
        };
        if let Some(missing) = ids.iter().find(|id| !self.flows.contains_key(id)) {
            return Err(CliError::config("target.level", format!("unknown station {missing}")));
        }
        Ok(ids)
    }

    /// Summed `checkins` and `checkouts` over the stations of `level`.
    pub fn demand(&self, level: &Level) -> Result<TimeSeries> {
        Ok(aggregate_stations(&self.flows, &self.target_ids(level)?)?)
    }

    /// Centroid of the stations of `level`.
    pub fn location(&self, level: &Level) -> Result<(f64, f64)> {
        let ids = self.target_ids(level)?;
        let members: Vec<&Station> = self.stations.iter().filter(|s| ids.contains(&s.id)).collect();
        Ok(centroid(&members).expect("level has stations"))
    }
}

/// The CSV tables a generated scenario is written to under `dir`.
pub fn scenario_sources(dir: &Path) -> CsvSources {
    CsvSources {
        stations: dir.join("stations.csv"),
        station_status: dir.join("station_status.csv"),
        weather: Some(dir.join("weather.csv")),
        events: Some(dir.join("events.csv")),
        calendar: Some(dir.join("calendar.csv")),
    }
}
