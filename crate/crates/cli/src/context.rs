//! Assembles the masked series: the target channel followed by the
//! requested context channels.

use bikecast_core::masks::{
    append_masks, calendar_dates, create_nearby_mask, day_mask, event_mask, holiday_mask, hour_mask,
    weather_channels, CalendarDay, HourBins, MaskChannel, NearbyMaskSpec,
};
use bikecast_core::series::join_channels;
use bikecast_core::TimeSeries;
use chrono::FixedOffset;

use crate::config::{ModelConfig, ModelKind, PipelineConfig};
use crate::error::{CliError, Result};
use crate::ingest::Dataset;

pub fn timezone(cfg: &PipelineConfig) -> Result<FixedOffset> {
    FixedOffset::east_opt(cfg.target.utc_offset_minutes * 60)
        .ok_or_else(|| CliError::config("target.utc_offset_minutes", "out of range"))
}

fn calendar_channel(name: &str, days: &[CalendarDay], demand: &TimeSeries, tz: FixedOffset) -> MaskChannel {
    let flag: fn(&CalendarDay) -> bool = match name {
        "holiday" => |d| d.is_holiday,
        "academic_break" => |d| d.is_academic_break,
        _ => |d| d.is_festivity,
    };
    holiday_mask(&demand.grid(), &calendar_dates(days, flag), tz).named(name)
}

/// Target channel of `demand` plus every mask in `cfg.masks.requested()`.
/// `nearby` expands to one `nearby_<id>` channel per station in range.
pub fn build_masked(data: &Dataset, cfg: &PipelineConfig, demand: &TimeSeries) -> Result<TimeSeries> {
    let target = demand.select(&[cfg.target.flow.channel()])?;
    let grid = target.grid();
    let tz = timezone(cfg)?;
    let m = &cfg.masks;
    let location = data.location(&cfg.target.level)?;

    let mut channels = Vec::new();
    let mut nearby = None;
    for name in m.requested() {
        match name {
            "day" => channels.push(day_mask(&grid, &m.day_mapping.mapping(), tz)),
            "hour" => {
                let bins = HourBins::uniform(m.hour_bins).map_err(|e| CliError::config("masks.hour_bins", e.to_string()))?;
                channels.push(hour_mask(&grid, &bins, tz));
            }
            "holiday" | "academic_break" | "festivity" => {
                if data.calendar.is_empty() {
                    return Err(CliError::config("masks", format!("`{name}` needs a calendar table")));
                }
                channels.push(calendar_channel(name, &data.calendar, &target, tz));
            }
            "event" => channels.push(event_mask(&grid, &data.events, location, m.event_radius, m.event_ramp, m.distance)?),
            "nearby" => {
                let spec = NearbyMaskSpec {
                    targets: data.target_ids(&cfg.target.level)?,
                    stations: &data.stations,
                    loads: &data.loads,
                    radius: m.nearby_radius,
                    series: target.clone(),
                    metric: m.distance,
                };
                nearby = Some(create_nearby_mask(&spec)?);
            }
            weather => {
                if data.weather.is_empty() {
                    return Err(CliError::config("masks", format!("`{weather}` needs a weather table")));
                }
                channels.extend(weather_channels(&data.weather, location, m.weather_k, &[weather], &grid, m.distance)?);
            }
        }
    }
    let masked = append_masks(&target, &channels)?;
    match nearby {
        Some(n) => {
            let extra: Vec<String> = n.channels()[1..].to_vec();
            Ok(join_channels(&[&masked, &n.select(&extra)?])?)
        }
        None => Ok(masked),
    }
}

fn expand(names: &[String], masked: &TimeSeries) -> Vec<String> {
    let mut out = Vec::new();
    for name in names {
        if name == "nearby" {
            out.extend(masked.channels().iter().filter(|c| c.starts_with("nearby_")).cloned());
        } else {
            out.push(name.clone());
        }
    }
    out
}

/// Input and prospective channels seen by `model`.
pub fn model_channels(cfg: &PipelineConfig, model: &ModelConfig, masked: &TimeSeries) -> (Vec<String>, Vec<String>) {
    let mut inputs = vec![cfg.target.flow.channel().to_string()];
    if model.context && model.kind != ModelKind::HoltWinters {
        inputs.extend(expand(&cfg.masks.historical, masked));
    }
    let prospective =
        if model.kind == ModelKind::LstmC2 { expand(&cfg.masks.prospective, masked) } else { Vec::new() };
    (inputs, prospective)
}
