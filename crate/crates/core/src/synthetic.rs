//! Seeded synthetic bike-sharing scenarios.
//!
//! Demand per station and step is
//!
//! ```text
//! rate = base(step of day) · day multiplier · exp(−w_wind·(wind − mean wind) − w_rain·rain) + w_event · event
//! ```
//!
//! and requested check-outs are `round(rate)` when `noise = 0`, otherwise
//! Poisson with a log-normal rate perturbation of scale `noise`. Requests at
//! empty stations go unmet. Bikes travel to a destination drawn by station
//! attractiveness times free-dock share; arrivals at full stations are redirected to the nearest
//! non-full station within the spillover radius, or retry next step.
//!
//! Step 0 records the initial state: no trips start or end there.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeDelta, TimeZone, Utc, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masks::{event_mask, CalendarDay, EventRecord, GeoDistance, WeatherStation};
use crate::series::{aggregate_stations, Station, StationId, TimeGrid, TimeSeries};

/// Channels of every generated per-station series, in order.
pub const STATION_CHANNELS: [&str; 7] =
    ["load", "checkins", "checkouts", "gross_checkins", "gross_checkouts", "demand", "unmet"];

/// Channels of every generated weather series, in order.
pub const WEATHER_CHANNELS: [&str; 5] = ["temperature_c", "humidity_pct", "wind_kmh", "pressure_hpa", "precipitation_mm"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Default for BoundingBox {
    fn default() -> Self {
        Self { lat_min: 38.70, lat_max: 38.78, lon_min: -9.20, lon_max: -9.10 }
    }
}

impl BoundingBox {
    fn validate(&self) -> Result<()> {
        let ok = [self.lat_min, self.lat_max, self.lon_min, self.lon_max].iter().all(|v| v.is_finite())
            && self.lat_min <= self.lat_max
            && self.lon_min <= self.lon_max;
        if ok {
            Ok(())
        } else {
            Err(Error::BadRange("bounding box".into()))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let u = |lo: f64, hi: f64, rng: &mut R| if lo < hi { rng.random_range(lo..hi) } else { lo };
        (u(self.lat_min, self.lat_max, rng), u(self.lon_min, self.lon_max, rng))
    }

    pub fn contains(&self, (lat, lon): (f64, f64)) -> bool {
        (self.lat_min..=self.lat_max).contains(&lat) && (self.lon_min..=self.lon_max).contains(&lon)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// `n` stations placed uniformly in `bbox` with uniform capacities in
/// `capacity_range` (inclusive).
pub fn generate_network(n: usize, bbox: BoundingBox, capacity_range: (u32, u32), seed: u64) -> Result<Vec<Station>> {
    if n == 0 {
        return Err(Error::BadRange("at least one station is required".into()));
    }
    let (lo, hi) = capacity_range;
    if lo == 0 || lo > hi {
        return Err(Error::BadRange(format!("capacity range {lo}..={hi}")));
    }
    bbox.validate()?;
    let mut rng = stream(seed, 1);
    (0..n)
        .map(|i| {
            let (lat, lon) = bbox.sample(&mut rng);
            let capacity = rng.random_range(lo..=hi);
            Station::new(StationId(i as u32 + 1), lat, lon, alloc::vec![(DateTime::UNIX_EPOCH, capacity)])
        })
        .collect()
}

/// Weather process and its effect on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherConfig {
    /// Number of meteorological stations observing the common field.
    pub stations: usize,
    pub wind_mean: f64,
    pub wind_sd: f64,
    /// e-folding time of the wind anomaly, hours.
    pub wind_persistence_hours: f64,
    /// Hourly probability that a dry hour turns wet.
    pub rain_start: f64,
    /// Hourly probability that a wet hour turns dry.
    pub rain_stop: f64,
    /// Mean hourly precipitation while wet, mm.
    pub rain_intensity: f64,
    /// Standard deviation of per-station observation noise.
    pub observation_noise: f64,
    /// Demand sensitivity per km/h of wind.
    pub wind_weight: f64,
    /// Demand sensitivity per mm of precipitation.
    pub precipitation_weight: f64,
    /// Demand at hour `t` reacts to the weather at hour `t - lag` (the
    /// first hours reuse hour 0).
    pub response_lag_hours: usize,
}

impl Default for WeatherConfig {
    fn default() -> Self {
        Self {
            stations: 3,
            wind_mean: 14.0,
            wind_sd: 7.0,
            wind_persistence_hours: 18.0,
            rain_start: 0.03,
            rain_stop: 0.15,
            rain_intensity: 1.2,
            observation_noise: 0.5,
            wind_weight: 0.03,
            precipitation_weight: 0.2,
            response_lag_hours: 0,
        }
    }
}

/// Randomly scheduled local events that boost nearby demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventConfig {
    pub count: usize,
    pub max_magnitude: u32,
    /// Duration range in steps, inclusive.
    pub duration_steps: (usize, usize),
    /// Stations within this distance (degrees) of an event are affected.
    pub radius: f64,
    /// Extra requested check-outs per step per unit of magnitude.
    pub weight: f64,
}

impl Default for EventConfig {
    fn default() -> Self {
        Self { count: 4, max_magnitude: 3, duration_steps: (2, 6), radius: 0.02, weight: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_stations: usize,
    pub bbox: BoundingBox,
    pub capacity_range: (u32, u32),
    pub start: DateTime<Utc>,
    pub days: usize,
    /// Step length in minutes; must divide 60.
    pub resolution_minutes: u32,
    /// Per-station requested check-outs per step over one day; empty selects
    /// a two-peak commuting profile.
    pub base_profile: Vec<f64>,
    pub weekday_multiplier: f64,
    pub weekend_multiplier: f64,
    /// Holidays take the weekend multiplier.
    pub holidays: Vec<NaiveDate>,
    pub academic_breaks: Vec<(NaiveDate, NaiveDate)>,
    pub academic_break_multiplier: f64,
    pub weather: WeatherConfig,
    pub events: EventConfig,
    /// Redirect radius for arrivals at full stations, degrees.
    pub spillover_radius: f64,
    /// Trip duration range in steps, inclusive.
    pub trip_steps: (usize, usize),
    /// Initial load as a fraction of capacity.
    pub initial_fill: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_stations: 20,
            bbox: BoundingBox::default(),
            capacity_range: (10, 30),
            start: Utc.with_ymd_and_hms(2019, 1, 7, 0, 0, 0).single().expect("valid date"),
            days: 90,
            resolution_minutes: 30,
            base_profile: Vec::new(),
            weekday_multiplier: 1.0,
            weekend_multiplier: 0.6,
            holidays: Vec::new(),
            academic_breaks: Vec::new(),
            academic_break_multiplier: 0.85,
            weather: WeatherConfig::default(),
            events: EventConfig::default(),
            spillover_radius: 0.01,
            trip_steps: (1, 2),
            initial_fill: 0.5,
            noise: 0.1,
            seed: 0,
        }
    }
}

/// Two commuting peaks and a midday shoulder, per station per step.
pub fn commuting_profile(resolution_minutes: u32) -> Vec<f64> {
    let steps = (1440 / resolution_minutes) as usize;
    let per_hour = f64::from(resolution_minutes) / 60.0;
    let bump = |h: f64, centre: f64, width: f64| libm::exp(-(h - centre) * (h - centre) / (2.0 * width * width));
    (0..steps)
        .map(|i| {
            let h = (i as f64 + 0.5) * f64::from(resolution_minutes) / 60.0;
            let hourly = 0.1 + 2.2 * bump(h, 8.5, 1.2) + 1.8 * bump(h, 18.0, 1.5) + 0.9 * bump(h, 13.0, 2.5);
            hourly * per_hour
        })
        .collect()
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadRange(m.into()));
        let w = &self.weather;
        if self.days == 0 {
            return bad("days must be at least 1");
        }
        if self.resolution_minutes == 0 || 60 % self.resolution_minutes != 0 {
            return bad("resolution_minutes must divide 60");
        }
        let steps = (1440 / self.resolution_minutes) as usize;
        if !self.base_profile.is_empty() && self.base_profile.len() != steps {
            return Err(Error::BadRange(format!("base_profile needs {steps} values")));
        }
        if self.base_profile.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return bad("base_profile rates must be non-negative");
        }
        let non_negative = [
            self.weekday_multiplier,
            self.weekend_multiplier,
            self.academic_break_multiplier,
            self.noise,
            self.spillover_radius,
            w.wind_mean,
            w.wind_sd,
            w.rain_intensity,
            w.observation_noise,
            self.events.weight,
            self.events.radius,
        ];
        if non_negative.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("multipliers, noise, radii and weather scales must be non-negative");
        }
        if !(w.wind_weight.is_finite() && w.precipitation_weight.is_finite()) {
            return bad("weather weights must be finite");
        }
        if !(w.wind_persistence_hours > 0.0) {
            return bad("wind persistence must be positive");
        }
        if !((0.0..=1.0).contains(&w.rain_start) && (0.0..=1.0).contains(&w.rain_stop)) {
            return bad("rain transition probabilities must lie in [0, 1]");
        }
        if w.stations == 0 {
            return bad("at least one weather station is required");
        }
        if !(0.0..=1.0).contains(&self.initial_fill) {
            return bad("initial_fill must lie in [0, 1]");
        }
        let (a, b) = self.trip_steps;
        if a == 0 || a > b {
            return bad("trip_steps must be a non-empty range of positive steps");
        }
        let (a, b) = self.events.duration_steps;
        if self.events.count > 0 && (a == 0 || a > b || self.events.max_magnitude == 0) {
            return bad("event durations and magnitude must be positive");
        }
        self.bbox.validate()
    }

    pub fn steps_per_day(&self) -> usize {
        (1440 / self.resolution_minutes) as usize
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.start, TimeDelta::minutes(i64::from(self.resolution_minutes)), self.days * self.steps_per_day())
    }

    pub fn profile(&self) -> Vec<f64> {
        if self.base_profile.is_empty() {
            commuting_profile(self.resolution_minutes)
        } else {
            self.base_profile.clone()
        }
    }

    fn day_multiplier(&self, date: NaiveDate) -> f64 {
        let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun) || self.holidays.contains(&date);
        let mut m = if weekend { self.weekend_multiplier } else { self.weekday_multiplier };
        if self.academic_breaks.iter().any(|(a, b)| (*a..=*b).contains(&date)) {
            m *= self.academic_break_multiplier;
        }
        m
    }
}

/// Generated ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: TimeGrid,
    pub stations: Vec<Station>,
    /// Per-station series with [`STATION_CHANNELS`].
    pub station_series: BTreeMap<StationId, TimeSeries>,
    /// Hourly observations with [`WEATHER_CHANNELS`].
    pub weather: Vec<WeatherStation>,
    pub events: Vec<EventRecord>,
    pub calendar: Vec<CalendarDay>,
    /// Bikes travelling at the end of each step.
    pub in_transit: Vec<u32>,
    /// Hourly wind and precipitation that drove demand.
    pub true_wind: Vec<f64>,
    pub true_precipitation: Vec<f64>,
}

impl Scenario {
    /// Sum over all stations of the named channels.
    pub fn system_series(&self, channels: &[&str]) -> Result<TimeSeries> {
        let ids: Vec<StationId> = self.station_series.keys().copied().collect();
        let selected: BTreeMap<StationId, TimeSeries> = self
            .station_series
            .iter()
            .map(|(id, ts)| Ok((*id, ts.select(channels)?)))
            .collect::<Result<_>>()?;
        aggregate_stations(&selected, &ids)
    }

    pub fn station(&self, id: StationId) -> Option<&Station> {
        self.stations.iter().find(|s| s.id == id)
    }
}

struct WeatherField {
    wind: Vec<f64>,
    rain: Vec<f64>,
    temperature: Vec<f64>,
    humidity: Vec<f64>,
    pressure: Vec<f64>,
}

fn weather_field(cfg: &WeatherConfig, hours: usize, rng: &mut ChaCha8Rng) -> WeatherField {
    let phi = libm::exp(-1.0 / cfg.wind_persistence_hours);
    let innovation = cfg.wind_sd * libm::sqrt(1.0 - phi * phi);
    let mut anomaly: f64 = cfg.wind_sd * rng.sample::<f64, _>(StandardNormal);
    let mut wet = false;
    let mut pressure_anom = 0.0;
    let mut f = WeatherField {
        wind: Vec::with_capacity(hours),
        rain: Vec::with_capacity(hours),
        temperature: Vec::with_capacity(hours),
        humidity: Vec::with_capacity(hours),
        pressure: Vec::with_capacity(hours),
    };
    for h in 0..hours {
        if h > 0 {
            anomaly = phi * anomaly + innovation * rng.sample::<f64, _>(StandardNormal);
        }
        let u: f64 = rng.random();
        wet = if wet { u >= cfg.rain_stop } else { u < cfg.rain_start };
        let rain = if wet {
            let e: f64 = rng.random();
            -cfg.rain_intensity * libm::log(1.0 - e)
        } else {
            0.0
        };
        pressure_anom = 0.97 * pressure_anom + 0.8 * rng.sample::<f64, _>(StandardNormal);
        let hour_of_day = (h % 24) as f64;
        let diurnal = libm::cos(2.0 * core::f64::consts::PI * (hour_of_day - 15.0) / 24.0);
        f.wind.push((cfg.wind_mean + anomaly).max(0.0));
        f.rain.push(rain);
        f.temperature.push(14.0 + 5.0 * diurnal - 0.1 * anomaly);
        f.humidity.push((70.0 - 12.0 * diurnal + if wet { 15.0 } else { 0.0 }).clamp(0.0, 100.0));
        f.pressure.push(1015.0 + pressure_anom - if wet { 4.0 } else { 0.0 });
    }
    f
}

fn nearest_open(stations: &[Station], loads: &[u32], caps: &[u32], from: usize, radius: f64) -> Option<usize> {
    let origin = stations[from].location();
    stations
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != from && loads[*i] < caps[*i])
        .map(|(i, s)| (GeoDistance::Euclidean.between(origin, s.location()), i))
        .filter(|(d, _)| *d <= radius)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, i)| i)
}

fn pick_weighted<R: Rng>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Simulates `config` on `network`.
pub fn generate_scenario(network: &[Station], config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    if network.is_empty() {
        return Err(Error::NoStations);
    }
    let grid = config.grid();
    let len = grid.len;
    let steps_per_day = config.steps_per_day();
    let hours = config.days * 24;
    let step_minutes = config.resolution_minutes as usize;
    let n = network.len();

    let mut weather_rng = stream(config.seed, 2);
    let field = weather_field(&config.weather, hours, &mut weather_rng);
    let hourly = TimeDelta::hours(1);
    let weather = (0..config.weather.stations)
        .map(|k| {
            let (lat, lon) = config.bbox.sample(&mut weather_rng);
            let sd = config.weather.observation_noise;
            let mut noisy = |v: f64, floor: f64| (v + sd * weather_rng.sample::<f64, _>(StandardNormal)).max(floor);
            let columns: Vec<(String, Vec<f64>)> = alloc::vec![
                (WEATHER_CHANNELS[0].into(), field.temperature.iter().map(|v| noisy(*v, -50.0)).collect()),
                (WEATHER_CHANNELS[1].into(), field.humidity.iter().map(|v| noisy(*v, 0.0).min(100.0)).collect()),
                (WEATHER_CHANNELS[2].into(), field.wind.iter().map(|v| noisy(*v, 0.0)).collect()),
                (WEATHER_CHANNELS[3].into(), field.pressure.iter().map(|v| noisy(*v, 0.0)).collect()),
                (
                    WEATHER_CHANNELS[4].into(),
                    field.rain.iter().map(|v| if *v > 0.0 { noisy(*v, 0.0) } else { 0.0 }).collect(),
                ),
            ];
            Ok(WeatherStation {
                id: format!("M{}", k + 1),
                latitude: lat,
                longitude: lon,
                series: TimeSeries::from_columns(config.start, hourly, columns)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut event_rng = stream(config.seed, 3);
    let ev = &config.events;
    let events = (0..ev.count)
        .map(|i| {
            let duration = event_rng.random_range(ev.duration_steps.0..=ev.duration_steps.1);
            let first = event_rng.random_range(0..len);
            let start = grid.timestamp(first);
            let end = start + grid.resolution * duration as i32;
            let magnitude = event_rng.random_range(1..=ev.max_magnitude);
            EventRecord::new(start, end, config.bbox.sample(&mut event_rng), magnitude, format!("event-{}", i + 1))
        })
        .collect::<Result<Vec<_>>>()?;

    let first_day = config.start.date_naive();
    let calendar: Vec<CalendarDay> = (0..config.days)
        .map(|d| {
            let date = first_day + Duration::days(d as i64);
            CalendarDay {
                date,
                is_holiday: config.holidays.contains(&date),
                is_academic_break: config.academic_breaks.iter().any(|(a, b)| (*a..=*b).contains(&date)),
                is_festivity: false,
            }
        })
        .collect();

    // requested check-outs
    let profile = config.profile();
    let w = &config.weather;
    let mut demand_rng = stream(config.seed, 4);
    let mut demand = alloc::vec![alloc::vec![0u32; len]; n];
    for (s, station) in network.iter().enumerate() {
        let boost = if ev.count > 0 && ev.weight > 0.0 && ev.radius > 0.0 {
            Some(event_mask(&grid, &events, station.location(), ev.radius, 1, GeoDistance::Euclidean)?.values)
        } else {
            None
        };
        for t in 0..len {
            let date = grid.timestamp(t).date_naive();
            let hour = (t * step_minutes / 60).saturating_sub(w.response_lag_hours);
            let effect = libm::exp(-(w.wind_weight * (field.wind[hour] - w.wind_mean) + w.precipitation_weight * field.rain[hour]));
            let mut rate = profile[t % steps_per_day] * config.day_multiplier(date) * effect;
            if let Some(b) = &boost {
                rate += ev.weight * b[t];
            }
            demand[s][t] = if config.noise == 0.0 {
                libm::round(rate) as u32
            } else {
                let z: f64 = demand_rng.sample(StandardNormal);
                let lambda = rate * libm::exp(config.noise * z - 0.5 * config.noise * config.noise);
                if lambda > 0.0 {
                    Poisson::new(lambda).map_err(|_| Error::BadRange("demand rate".into()))?.sample(&mut demand_rng) as u32
                } else {
                    0
                }
            };
        }
    }

    // trips
    let mut trip_rng = stream(config.seed, 5);
    let attractiveness: Vec<f64> = (0..n).map(|_| trip_rng.random_range(0.5..1.5)).collect();
    let caps: Vec<u32> = network.iter().map(|s| s.capacity_at(config.start)).collect();
    let mut load: Vec<u32> = caps.iter().map(|c| libm::round(f64::from(*c) * config.initial_fill) as u32).collect();
    let mut arrivals: Vec<Vec<usize>> = alloc::vec![Vec::new(); len + config.trip_steps.1 + 2];
    let mut travelling = 0u32;
    let mut rows = alloc::vec![alloc::vec![0.0f64; len * STATION_CHANNELS.len()]; n];
    let mut in_transit = Vec::with_capacity(len);
    let width = STATION_CHANNELS.len();

    for t in 0..len {
        let previous = load.clone();
        let mut gross_in = alloc::vec![0u32; n];
        let mut gross_out = alloc::vec![0u32; n];
        let mut unmet = alloc::vec![0u32; n];
        if t > 0 {
            if arrivals.len() <= t + 1 {
                arrivals.resize(t + 2, Vec::new());
            }
            for dest in core::mem::take(&mut arrivals[t]) {
                let dock = if load[dest] < caps[dest] {
                    Some(dest)
                } else {
                    nearest_open(network, &load, &caps, dest, config.spillover_radius)
                };
                match dock {
                    Some(d) => {
                        load[d] += 1;
                        gross_in[d] += 1;
                        travelling -= 1;
                    }
                    None => arrivals[t + 1].push(dest),
                }
            }
            // riders favour attractive stations with free docks
            let weights: Vec<f64> = (0..n)
                .map(|j| attractiveness[j] * (f64::from(caps[j] - load[j]) + 1.0) / f64::from(caps[j]))
                .collect();
            let total_weight: f64 = weights.iter().sum();
            for s in 0..n {
                let served = demand[s][t].min(load[s]);
                unmet[s] = demand[s][t] - served;
                load[s] -= served;
                gross_out[s] = served;
                for _ in 0..served {
                    let dest = pick_weighted(&weights, total_weight, &mut trip_rng);
                    let arrive = t + trip_rng.random_range(config.trip_steps.0..=config.trip_steps.1);
                    if arrivals.len() <= arrive {
                        arrivals.resize(arrive + 1, Vec::new());
                    }
                    arrivals[arrive].push(dest);
                    travelling += 1;
                }
            }
        }
        in_transit.push(travelling);
        for s in 0..n {
            let delta = i64::from(load[s]) - i64::from(previous[s]);
            let row = &mut rows[s][t * width..(t + 1) * width];
            row[0] = f64::from(load[s]);
            row[1] = delta.max(0) as f64;
            row[2] = (-delta).max(0) as f64;
            row[3] = f64::from(gross_in[s]);
            row[4] = f64::from(gross_out[s]);
            row[5] = f64::from(demand[s][t]);
            row[6] = f64::from(unmet[s]);
        }
    }

    let names: Vec<String> = STATION_CHANNELS.iter().map(|c| String::from(*c)).collect();
    let station_series = network
        .iter()
        .zip(rows)
        .map(|(st, values)| Ok((st.id, TimeSeries::new(config.start, grid.resolution, names.clone(), values)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;

    Ok(Scenario {
        grid,
        stations: network.to_vec(),
        station_series,
        weather,
        events,
        calendar,
        in_transit,
        true_wind: field.wind,
        true_precipitation: field.rain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::infer_flows;

    fn small(seed: u64) -> (Vec<Station>, ScenarioConfig) {
        let cfg = ScenarioConfig { n_stations: 6, days: 4, seed, ..ScenarioConfig::default() };
        (generate_network(cfg.n_stations, cfg.bbox, (4, 9), seed).unwrap(), cfg)
    }

    #[test]
    fn network_contract() {
        let bbox = BoundingBox::default();
        let one = generate_network(1, bbox, (5, 5), 3).unwrap();
        assert!(bbox.contains(one[0].location()));
        assert_eq!(one[0].capacity_at(DateTime::UNIX_EPOCH), 5);
        assert_eq!(generate_network(5, bbox, (2, 8), 1).unwrap(), generate_network(5, bbox, (2, 8), 1).unwrap());
        assert!(matches!(generate_network(0, bbox, (2, 8), 1), Err(Error::BadRange(_))));
        assert!(matches!(generate_network(2, bbox, (0, 8), 1), Err(Error::BadRange(_))));
    }

    #[test]
    fn zero_effects_reproduce_the_profile() {
        let profile: Vec<f64> = (0..48).map(|i| (i % 5) as f64).collect();
        let (net, mut cfg) = small(2);
        cfg.base_profile = profile.clone();
        cfg.weekend_multiplier = 1.0;
        cfg.weather.wind_weight = 0.0;
        cfg.weather.precipitation_weight = 0.0;
        cfg.events.weight = 0.0;
        cfg.noise = 0.0;
        let sc = generate_scenario(&net, &cfg).unwrap();
        for ts in sc.station_series.values() {
            let d = ts.channel("demand").unwrap();
            for (t, v) in d.iter().enumerate() {
                assert_eq!(*v, profile[t % 48]);
            }
        }
    }

    #[test]
    fn ledger_and_bounds_hold() {
        for seed in 0..4 {
            let (net, cfg) = small(seed);
            let sc = generate_scenario(&net, &cfg).unwrap();
            let mut docked = alloc::vec![0.0; sc.grid.len];
            for st in &sc.stations {
                let ts = &sc.station_series[&st.id];
                let load = ts.channel("load").unwrap();
                let cap = f64::from(st.capacity_at(sc.grid.start));
                let flows = infer_flows(&ts.select(&["load"]).unwrap(), st).unwrap();
                assert_eq!(flows.checkins.values(), ts.channel("checkins").unwrap().as_slice());
                assert_eq!(flows.checkouts.values(), ts.channel("checkouts").unwrap().as_slice());
                let gin = ts.channel("gross_checkins").unwrap();
                let gout = ts.channel("gross_checkouts").unwrap();
                for t in 0..load.len() {
                    assert!(load[t] >= 0.0 && load[t] <= cap);
                    docked[t] += load[t];
                    if t > 0 {
                        assert_eq!(load[t], load[t - 1] + gin[t] - gout[t]);
                    }
                }
            }
            let total: Vec<f64> = docked.iter().zip(&sc.in_transit).map(|(d, m)| d + f64::from(*m)).collect();
            assert!(total.iter().all(|v| *v == total[0]), "bikes are not conserved");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (net, cfg) = small(11);
        assert_eq!(generate_scenario(&net, &cfg).unwrap(), generate_scenario(&net, &cfg).unwrap());
        let other = ScenarioConfig { seed: 12, ..cfg.clone() };
        assert_ne!(generate_scenario(&net, &cfg).unwrap().station_series, generate_scenario(&net, &other).unwrap().station_series);
    }

    #[test]
    fn weather_schema() {
        let (net, cfg) = small(1);
        let sc = generate_scenario(&net, &cfg).unwrap();
        assert_eq!(sc.weather.len(), 3);
        for w in &sc.weather {
            assert_eq!(w.series.len(), cfg.days * 24);
            assert_eq!(w.series.channels(), WEATHER_CHANNELS.map(String::from).as_slice());
        }
        assert_eq!(sc.calendar.len(), cfg.days);
    }
}
