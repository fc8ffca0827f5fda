//! Holt-Winters triple exponential smoothing.
//!
//! Multiplicative form (default):
//!
//! ```text
//! level:    l_t = α x_t / s_{t-d} + (1 - α)(l_{t-1} + b_{t-1})
//! trend:    b_t = β (l_t - l_{t-1}) + (1 - β) b_{t-1}
//! season:   s_t = γ x_t / (l_{t-1} + b_{t-1}) + (1 - γ) s_{t-d}
//! forecast: x̂_{T+j} = (l_T + j b_T) s_{T+j-d(k+1)},  k = ⌊(j-1)/d⌋
//! ```
//!
//! The additive form replaces the ratios by differences and the seasonal
//! product by a sum. Initialisation uses the first two seasons: the level is
//! the mean of season one, the trend the per-step change between the season
//! means, and the seasonal indices season one relative to that level.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeasonalForm {
    #[default]
    Multiplicative,
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoltWintersParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Season length `d` in steps.
    pub period: usize,
    #[serde(default)]
    pub form: SeasonalForm,
}

impl HoltWintersParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, period: usize) -> Self {
        Self { alpha, beta, gamma, period, form: SeasonalForm::Multiplicative }
    }

    fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.alpha) && unit(self.beta) && unit(self.gamma)) {
            return Err(Error::InvalidParameter("smoothing factors must lie in [0, 1]".into()));
        }
        if self.period == 0 {
            return Err(Error::InvalidParameter("season length must be at least 1".into()));
        }
        Ok(())
    }
}

/// Smoothing state after the last observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoltWintersState {
    pub params: HoltWintersParams,
    pub level: f64,
    pub trend: f64,
    /// Seasonal indices of the last `d` observations, oldest first.
    pub seasonal: Vec<f64>,
}

impl HoltWintersState {
    /// A state with no observations; forecasting from it fails.
    pub fn unfitted(params: HoltWintersParams) -> Self {
        Self { params, level: 0.0, trend: 0.0, seasonal: Vec::new() }
    }

    pub fn is_fitted(&self) -> bool {
        self.params.period > 0 && self.seasonal.len() == self.params.period
    }

    /// Forecasts `h` steps beyond the last fitted observation.
    pub fn forecast(&self, h: usize) -> Result<Vec<f64>> {
        if !self.is_fitted() {
            return Err(Error::UnfittedState);
        }
        let d = self.params.period;
        Ok((1..=h)
            .map(|j| {
                // s_{T+j-d(k+1)} with k = ⌊(j-1)/d⌋ is the ((j-1) mod d)-th of the last d indices
                let s = self.seasonal[(j - 1) % d];
                let base = self.level + j as f64 * self.trend;
                match self.params.form {
                    SeasonalForm::Multiplicative => base * s,
                    SeasonalForm::Additive => base + s,
                }
            })
            .collect())
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn holt_winters_fit(series: &[f64], params: HoltWintersParams) -> Result<HoltWintersState> {
    params.validate()?;
    let d = params.period;
    if series.len() < 2 * d {
        return Err(Error::SeriesTooShort { len: series.len(), required: 2 * d });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let HoltWintersParams { alpha, beta, gamma, form, .. } = params;
    let first = mean(&series[..d]);
    let second = mean(&series[d..2 * d]);
    let mut level = first;
    let mut trend = (second - first) / d as f64;
    // ring buffer: seasonal[t % d] holds s_{t-d} when processing x_t
    let mut seasonal: Vec<f64> = series[..d]
        .iter()
        .map(|x| match form {
            SeasonalForm::Multiplicative => x / first,
            SeasonalForm::Additive => x - first,
        })
        .collect();

    for (t, &x) in series.iter().enumerate().skip(d) {
        let slot = t % d;
        let s_prev = seasonal[slot];
        let smoothed = level + trend;
        let new_level = match form {
            SeasonalForm::Multiplicative => alpha * x / s_prev + (1.0 - alpha) * smoothed,
            SeasonalForm::Additive => alpha * (x - s_prev) + (1.0 - alpha) * smoothed,
        };
        let new_trend = beta * (new_level - level) + (1.0 - beta) * trend;
        seasonal[slot] = match form {
            SeasonalForm::Multiplicative => gamma * x / smoothed + (1.0 - gamma) * s_prev,
            SeasonalForm::Additive => gamma * (x - smoothed) + (1.0 - gamma) * s_prev,
        };
        level = new_level;
        trend = new_trend;
    }
    if !(level.is_finite() && trend.is_finite() && seasonal.iter().all(|s| s.is_finite())) {
        return Err(Error::NonFiniteInput);
    }
    // rotate so index 0 is the oldest of the last d observations
    seasonal.rotate_left(series.len() % d);
    Ok(HoltWintersState { params, level, trend, seasonal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_series_is_a_fixed_point() {
        let st = holt_winters_fit(&[4.0; 24], HoltWintersParams::new(0.3, 0.2, 0.4, 6)).unwrap();
        assert!((st.level - 4.0).abs() < 1e-12);
        assert!(st.trend.abs() < 1e-12);
        assert!(st.seasonal.iter().all(|s| (s - 1.0).abs() < 1e-12));
        let f = st.forecast(8).unwrap();
        assert!(f.iter().all(|v| (v - 4.0).abs() < 1e-12));
    }

    #[test]
    fn naive_configuration_tracks_the_last_value() {
        // x_0 = x_1 keeps the initial trend at zero
        let x = [5.0, 5.0, 7.0, 3.0, 8.0, 6.0];
        let params = HoltWintersParams::new(1.0, 0.0, 0.0, 1);
        for end in 2..=x.len() {
            let st = holt_winters_fit(&x[..end], params).unwrap();
            assert_eq!(st.level, x[end - 1]);
            assert_eq!(st.seasonal, vec![1.0]);
        }
        let st = holt_winters_fit(&x, params).unwrap();
        assert_eq!(st.forecast(4).unwrap(), vec![6.0; 4]);
    }

    #[test]
    fn zero_gamma_keeps_initial_seasonality() {
        let x: Vec<f64> = (0..30).map(|t| 10.0 + (t % 5) as f64 + 0.1 * t as f64).collect();
        let st = holt_winters_fit(&x, HoltWintersParams::new(0.5, 0.3, 0.0, 5)).unwrap();
        let first = mean(&x[..5]);
        let mut init: Vec<f64> = x[..5].iter().map(|v| v / first).collect();
        init.rotate_left(30 % 5);
        assert_eq!(st.seasonal, init);
    }

    #[test]
    fn additive_variant_recovers_pure_seasonality() {
        let x: Vec<f64> = (0..40).map(|t| [1.0, -2.0, 0.5, 0.5][t % 4] + 3.0).collect();
        let mut p = HoltWintersParams::new(0.4, 0.1, 0.2, 4);
        p.form = SeasonalForm::Additive;
        let f = holt_winters_fit(&x, p).unwrap().forecast(8).unwrap();
        for (j, v) in f.iter().enumerate() {
            assert!((v - x[(40 + j) % 40]).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        let p = HoltWintersParams::new(0.5, 0.5, 0.5, 4);
        assert_eq!(holt_winters_fit(&[1.0; 7], p), Err(Error::SeriesTooShort { len: 7, required: 8 }));
        assert_eq!(HoltWintersState::unfitted(p).forecast(3), Err(Error::UnfittedState));
        let bad = HoltWintersParams::new(1.5, 0.5, 0.5, 4);
        assert!(matches!(holt_winters_fit(&[1.0; 8], bad), Err(Error::InvalidParameter(_))));
    }
}
