//! CSV readers and writers for the ingestion schemas and pipeline artifacts.
//!
//! Timestamps are ISO-8601. Values without an offset are read as UTC and
//! everything is written back in UTC with a `Z` suffix.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use bikecast_core::masks::{CalendarDay, EventRecord, WeatherStation};
use bikecast_core::synthetic::{Scenario, WEATHER_CHANNELS};
use bikecast_core::{TimeSeries};
use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, TimeDelta, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub fn format_time(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_time(text: &str) -> Option<DateTime<Utc>> {
    let text = text.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(text) {
        return Some(ts.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())
        .map(|n| n.and_utc())
}

mod iso {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_time(*ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DateTime<Utc>, D::Error> {
        let text = String::deserialize(d)?;
        parse_time(&text).ok_or_else(|| serde::de::Error::custom(format!("`{text}` is not an ISO-8601 timestamp")))
    }
}

mod flag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("flag must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationRow {
    pub station_id: u32,
    pub latitude: f64,
    pub longitude: f64,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusRow {
    #[serde(with = "iso")]
    pub timestamp: DateTime<Utc>,
    pub station_id: u32,
    pub num_bikes: u32,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRow {
    #[serde(with = "iso")]
    pub timestamp: DateTime<Utc>,
    pub weather_station_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub temperature_c: f64,
    pub humidity_pct: f64,
    pub wind_kmh: f64,
    pub pressure_hpa: f64,
    pub precipitation_mm: f64,
}

impl WeatherRow {
    fn values(&self) -> [f64; 5] {
        [self.temperature_c, self.humidity_pct, self.wind_kmh, self.pressure_hpa, self.precipitation_mm]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    #[serde(with = "iso")]
    pub start: DateTime<Utc>,
    #[serde(with = "iso")]
    pub end: DateTime<Utc>,
    pub latitude: f64,
    pub longitude: f64,
    pub magnitude: u32,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarRow {
    pub date: NaiveDate,
    #[serde(with = "flag")]
    pub is_holiday: bool,
    #[serde(with = "flag")]
    pub is_academic_break: bool,
    #[serde(with = "flag")]
    pub is_festivity: bool,
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
    reader.deserialize().map(|r| r.map_err(csv_err)).collect()
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn read_events(path: &Path) -> Result<Vec<EventRecord>> {
    read_rows::<EventRow>(path)?
        .into_iter()
        .map(|r| {
            EventRecord::new(r.start, r.end, (r.latitude, r.longitude), r.magnitude, r.label)
                .map_err(|e| CliError::format(path, e))
        })
        .collect()
}

pub fn read_calendar(path: &Path) -> Result<Vec<CalendarDay>> {
    Ok(read_rows::<CalendarRow>(path)?
        .into_iter()
        .map(|r| CalendarDay {
            date: r.date,
            is_holiday: r.is_holiday,
            is_academic_break: r.is_academic_break,
            is_festivity: r.is_festivity,
        })
        .collect())
}

/// Values of `(timestamp, row)` observations carried forward onto a regular
/// grid: each grid step takes the latest observation at or before it.
pub fn as_of<T: Clone>(obs: &[(DateTime<Utc>, T)], start: DateTime<Utc>, step: TimeDelta, len: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(len);
    let mut next = 0;
    for t in 0..len {
        let at = start + step * t as i32;
        while next < obs.len() && obs[next].0 <= at {
            next += 1;
        }
        out.push(obs[next.saturating_sub(1)].1.clone());
    }
    out
}

/// Groups weather observations by station and fills them forward onto each
/// station's own regular grid (the smallest gap between its observations).
pub fn read_weather(path: &Path) -> Result<Vec<WeatherStation>> {
    let mut groups: BTreeMap<String, Vec<WeatherRow>> = BTreeMap::new();
    for row in read_rows::<WeatherRow>(path)? {
        groups.entry(row.weather_station_id.clone()).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|(id, mut rows)| {
            rows.sort_by_key(|r| r.timestamp);
            rows.dedup_by_key(|r| r.timestamp);
            let step = rows
                .windows(2)
                .map(|w| w[1].timestamp - w[0].timestamp)
                .min()
                .unwrap_or(TimeDelta::hours(1));
            let start = rows[0].timestamp;
            let span = rows[rows.len() - 1].timestamp - start;
            let len = (span.num_seconds() / step.num_seconds()) as usize + 1;
            let obs: Vec<(DateTime<Utc>, [f64; 5])> = rows.iter().map(|r| (r.timestamp, r.values())).collect();
            let values = as_of(&obs, start, step, len).concat();
            let names = WEATHER_CHANNELS.iter().map(|s| s.to_string()).collect();
            let series = TimeSeries::new(start, step, names, values).map_err(|e| CliError::format(path, e))?;
            Ok(WeatherStation { id, latitude: rows[0].latitude, longitude: rows[0].longitude, series })
        })
        .collect()
}

/// Writes a generated scenario with the ingestion schemas.
pub fn write_scenario(dir: &Path, sc: &Scenario) -> Result<()> {
    create_dir(dir)?;
    let first = sc.grid.start;
    let stations: Vec<StationRow> = sc
        .stations
        .iter()
        .map(|s| StationRow { station_id: s.id.0, latitude: s.latitude, longitude: s.longitude, capacity: s.capacity_at(first) })
        .collect();
    write_rows(&dir.join("stations.csv"), &stations)?;

    let mut status = Vec::with_capacity(sc.grid.len * sc.stations.len());
    for t in 0..sc.grid.len {
        let ts = sc.grid.timestamp(t);
        for s in &sc.stations {
            let load = sc.station_series[&s.id].value(t, 0);
            status.push(StatusRow { timestamp: ts, station_id: s.id.0, num_bikes: load as u32, capacity: s.capacity_at(ts) });
        }
    }
    write_rows(&dir.join("station_status.csv"), &status)?;

    let mut weather = Vec::new();
    for w in &sc.weather {
        for (t, row) in w.series.rows().enumerate() {
            weather.push(WeatherRow {
                timestamp: w.series.timestamp(t),
                weather_station_id: w.id.clone(),
                latitude: w.latitude,
                longitude: w.longitude,
                temperature_c: row[0],
                humidity_pct: row[1],
                wind_kmh: row[2],
                pressure_hpa: row[3],
                precipitation_mm: row[4],
            });
        }
    }
    write_rows(&dir.join("weather.csv"), &weather)?;

    let events: Vec<EventRow> = sc
        .events
        .iter()
        .map(|e| EventRow {
            start: e.start,
            end: e.end,
            latitude: e.latitude,
            longitude: e.longitude,
            magnitude: e.magnitude,
            label: e.label.clone(),
        })
        .collect();
    write_rows(&dir.join("events.csv"), &events)?;

    let calendar: Vec<CalendarRow> = sc
        .calendar
        .iter()
        .map(|d| CalendarRow {
            date: d.date,
            is_holiday: d.is_holiday,
            is_academic_break: d.is_academic_break,
            is_festivity: d.is_festivity,
        })
        .collect();
    write_rows(&dir.join("calendar.csv"), &calendar)
}

/// `timestamp` followed by one column per channel.
pub fn write_series(path: &Path, ts: &TimeSeries) -> Result<()> {
    let io_err = |source| CliError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let mut line = String::from("timestamp");
    for c in ts.channels() {
        line.push(',');
        line.push_str(c);
    }
    writeln!(w, "{line}").map_err(io_err)?;
    for (t, row) in ts.rows().enumerate() {
        line.clear();
        line.push_str(&format_time(ts.timestamp(t)));
        for v in row {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a series written by [`write_series`]; rows must be consecutive steps.
pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.get(0) != Some("timestamp") || headers.len() < 2 {
        return Err(CliError::format(path, "expected `timestamp` followed by channel columns"));
    }
    let channels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let ts = parse_time(&record[0]).ok_or_else(|| CliError::format(path, format!("row {}: bad timestamp", line + 1)))?;
        times.push(ts);
        for field in record.iter().skip(1) {
            values.push(field.parse::<f64>().map_err(|e| CliError::format(path, format!("row {}: {e}", line + 1)))?);
        }
    }
    if times.len() < 2 {
        return Err(CliError::format(path, "need at least two rows"));
    }
    let step = times[1] - times[0];
    if step <= TimeDelta::zero() || times.windows(2).any(|w| w[1] - w[0] != step) {
        return Err(CliError::format(path, "timestamps are not evenly spaced"));
    }
    TimeSeries::new(times[0], step, channels, values).map_err(|e| CliError::format(path, e))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn timestamps_round_trip() {
        let ts = Utc.with_ymd_and_hms(2019, 5, 1, 7, 30, 0).unwrap();
        assert_eq!(parse_time(&format_time(ts)), Some(ts));
        assert_eq!(parse_time("2019-05-01T08:30:00+01:00"), Some(ts));
        assert_eq!(parse_time("2019-05-01 07:30:00"), Some(ts));
        assert_eq!(parse_time("May 1"), None);
    }

    #[test]
    fn as_of_carries_values_forward() {
        let t0 = Utc.with_ymd_and_hms(2019, 5, 1, 0, 0, 0).unwrap();
        let obs = vec![(t0, 1), (t0 + TimeDelta::minutes(70), 2), (t0 + TimeDelta::minutes(90), 3)];
        assert_eq!(as_of(&obs, t0, TimeDelta::minutes(30), 5), vec![1, 1, 1, 3, 3]);
    }

    #[test]
    fn series_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let start = Utc.with_ymd_and_hms(2019, 5, 1, 0, 0, 0).unwrap();
        let ts = TimeSeries::from_columns(
            start,
            TimeDelta::minutes(30),
            vec![("a".into(), vec![0.1, 1.0 / 3.0, 7.0]), ("b".into(), vec![-2.5e-9, 0.0, 1e300])],
        )
        .unwrap();
        let path = dir.path().join("s.csv");
        write_series(&path, &ts).unwrap();
        assert_eq!(read_series(&path).unwrap(), ts);
    }

    #[test]
    fn calendar_flags_must_be_binary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calendar.csv");
        std::fs::write(&path, "date,is_holiday,is_academic_break,is_festivity\n2019-06-13,1,0,1\n").unwrap();
        let days = read_calendar(&path).unwrap();
        assert!(days[0].is_holiday && !days[0].is_academic_break && days[0].is_festivity);
        std::fs::write(&path, "date,is_holiday,is_academic_break,is_festivity\n2019-06-13,2,0,1\n").unwrap();
        assert!(read_calendar(&path).is_err());
    }

    #[test]
    fn weather_gaps_are_filled_forward() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weather.csv");
        let header = "timestamp,weather_station_id,latitude,longitude,temperature_c,humidity_pct,wind_kmh,pressure_hpa,precipitation_mm\n";
        let body = "2019-01-01T00:00:00Z,w1,38.7,-9.1,10,80,5,1010,0\n\
                    2019-01-01T01:00:00Z,w1,38.7,-9.1,11,80,6,1010,0\n\
                    2019-01-01T03:00:00Z,w1,38.7,-9.1,12,80,9,1010,1\n";
        std::fs::write(&path, format!("{header}{body}")).unwrap();
        let w = read_weather(&path).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].series.channel("wind_kmh").unwrap(), vec![5.0, 6.0, 6.0, 9.0]);
    }
}
