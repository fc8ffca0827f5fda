//! Weekly demand profiles for exploratory plots.

use alloc::vec::Vec;

use chrono::{Datelike, FixedOffset, NaiveTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Mean and deviation of one channel at one (weekday, time of day) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub weekday: Weekday,
    pub time: NaiveTime,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

/// Per (local weekday, local time of day) mean and population standard
/// deviation of `channel`, Monday first, cells without observations omitted.
pub fn stats_summary(series: &TimeSeries, channel: usize, tz: FixedOffset) -> Result<Vec<ProfileRow>> {
    let steps = series.grid().steps_per_day().filter(|s| *s > 1).ok_or(Error::ResolutionTooCoarse)?;
    if channel >= series.width() {
        return Err(Error::ChannelMismatch("channel index out of range".into()));
    }
    let step_secs = series.resolution().num_seconds();
    let cells = 7 * steps;
    let mut sum = alloc::vec![0.0; cells];
    let mut sq = alloc::vec![0.0; cells];
    let mut count = alloc::vec![0usize; cells];
    let mut first_time = alloc::vec![None; cells];
    let cells_of: Vec<(usize, NaiveTime)> = series
        .timestamps()
        .into_iter()
        .map(|ts| {
            let local = ts.with_timezone(&tz);
            let slot = (i64::from(local.num_seconds_from_midnight()) / step_secs) as usize;
            (local.weekday().num_days_from_monday() as usize * steps + slot.min(steps - 1), local.time())
        })
        .collect();
    for (t, &(cell, time)) in cells_of.iter().enumerate() {
        sum[cell] += series.value(t, channel);
        count[cell] += 1;
        first_time[cell].get_or_insert(time);
    }
    let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 }).collect();
    for (t, &(cell, _)) in cells_of.iter().enumerate() {
        let d = series.value(t, channel) - mean[cell];
        sq[cell] += d * d;
    }
    Ok((0..cells)
        .filter(|c| count[*c] > 0)
        .map(|c| ProfileRow {
            weekday: Weekday::try_from((c / steps) as u8).expect("weekday index below 7"),
            time: first_time[c].expect("observed cell"),
            count: count[c],
            mean: mean[c],
            std: libm::sqrt(sq[c] / count[c] as f64),
        })
        .collect())
}
