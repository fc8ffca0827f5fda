//! TOML pipeline configuration.
//!
//! Every table rejects unknown keys. Parse failures are reported with the
//! dotted key path of the offending entry.

use std::path::{Path, PathBuf};

use bikecast_core::baselines::knn::{CombinerKind, DistanceKind};
use bikecast_core::baselines::SeasonalForm;
use bikecast_core::eval::Pooling;
use bikecast_core::masks::{GeoDistance, WeekdayMapping};
use bikecast_core::recurrent::{CellKind, TrainConfig};
use bikecast_core::search::SearchSpace;
use bikecast_core::synthetic::{ScenarioConfig, WEATHER_CHANNELS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seeds the generator, weight initialisation, shuffling and search.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub masks: MaskConfig,
    #[serde(default)]
    pub segments: SegmentConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    pub models: Vec<ModelConfig>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Exactly one of `scenario` and `csv` must be present.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub scenario: Option<ScenarioConfig>,
    pub csv: Option<CsvSources>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSources {
    pub stations: PathBuf,
    pub station_status: PathBuf,
    pub weather: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub calendar: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Station(u32),
    Cluster(Vec<u32>),
    #[default]
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flow {
    Checkins,
    #[default]
    Checkouts,
}

impl Flow {
    pub fn channel(self) -> &'static str {
        match self {
            Self::Checkins => "checkins",
            Self::Checkouts => "checkouts",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub level: Level,
    pub flow: Flow,
    /// Forecast horizon in steps.
    pub horizon: usize,
    pub resolution_minutes: u32,
    /// Offset of local time from UTC, used by calendar masks and stats.
    pub utc_offset_minutes: i32,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self { level: Level::System, flow: Flow::Checkouts, horizon: 48, resolution_minutes: 30, utc_offset_minutes: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DayMapping {
    Identity,
    #[default]
    WeekdaySaturdaySunday,
}

impl DayMapping {
    pub fn mapping(self) -> WeekdayMapping {
        match self {
            Self::Identity => WeekdayMapping::IDENTITY,
            Self::WeekdaySaturdaySunday => WeekdayMapping::WEEKDAY_SATURDAY_SUNDAY,
        }
    }
}

/// Context channels. `historical` channels join the target in the input
/// window; `prospective` channels are given to C2 over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    pub historical: Vec<String>,
    pub prospective: Vec<String>,
    pub day_mapping: DayMapping,
    /// Equal-width bins of the `hour` channel.
    pub hour_bins: u32,
    /// Number of nearest meteo stations averaged by inverse distance.
    pub weather_k: usize,
    pub event_radius: f64,
    pub event_ramp: usize,
    /// Radius of the `nearby` occupation channels.
    pub nearby_radius: f64,
    pub distance: GeoDistance,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            historical: Vec::new(),
            prospective: Vec::new(),
            day_mapping: DayMapping::default(),
            hour_bins: 24,
            weather_k: 1,
            event_radius: 0.02,
            event_ramp: 1,
            nearby_radius: 0.01,
            distance: GeoDistance::Euclidean,
        }
    }
}

/// Channel names accepted in `masks.historical` and `masks.prospective`.
pub const CALENDAR_MASKS: [&str; 5] = ["day", "hour", "holiday", "academic_break", "festivity"];

pub fn is_known_mask(name: &str) -> bool {
    CALENDAR_MASKS.contains(&name) || WEATHER_CHANNELS.contains(&name) || name == "event" || name == "nearby"
}

impl MaskConfig {
    /// Requested channels in first-mention order, historical first.
    pub fn requested(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for name in self.historical.iter().chain(&self.prospective) {
            if !out.contains(&name.as_str()) {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    /// Input window in steps; defaults to seven horizons.
    pub input_len: Option<usize>,
    /// Stride between instances in steps; defaults to one day.
    pub slide: Option<usize>,
    /// Sub-dataset length in days; unset keeps the whole series as one fold.
    pub window_days: Option<usize>,
    pub step_days: usize,
    pub fractions: (f64, f64, f64),
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self { input_len: None, slide: None, window_days: None, step_days: 7, fractions: (0.7, 0.15, 0.15) }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Random-search trials per fold for recurrent models; 0 trains `train` as given.
    pub budget: usize,
    pub space: SearchSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub pooling: Pooling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "holt-winters")]
    HoltWinters,
    #[serde(rename = "knn")]
    Knn,
    #[serde(rename = "barycenter")]
    Barycenter,
    #[serde(rename = "lstm")]
    Lstm,
    #[serde(rename = "lstm+c2")]
    LstmC2,
}

impl ModelKind {
    pub fn is_recurrent(self) -> bool {
        matches!(self, Self::Lstm | Self::LstmC2)
    }
}

/// One model to train and evaluate. Fields that do not apply to `kind`
/// are rejected by validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub kind: ModelKind,
    /// Feed the historical masks as inputs; `false` sees the target only.
    #[serde(default = "yes")]
    pub context: bool,
    pub period: Option<usize>,
    pub offset: Option<f64>,
    pub form: Option<SeasonalForm>,
    pub k: Option<usize>,
    pub distance: Option<DistanceKind>,
    pub combiner: Option<CombinerKind>,
    pub cell: Option<CellKind>,
    pub hidden: Option<Vec<usize>>,
    pub c2_cell: Option<CellKind>,
    pub c2_hidden: Option<usize>,
    /// Replaces the top-level `train` table for this model.
    pub train: Option<TrainConfig>,
}

fn yes() -> bool {
    true
}

impl PipelineConfig {
    /// Reads and validates a TOML file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config("<file>", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::config("<syntax>", e.message()))?;
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(path, e.into_inner().message())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.scenario, &self.data.csv) {
            (Some(s), None) => s.validate().map_err(|e| CliError::config("data.scenario", e.to_string()))?,
            (None, Some(_)) => {}
            _ => return Err(CliError::config("data", "exactly one of `scenario` and `csv` is required")),
        }
        let t = &self.target;
        if t.horizon == 0 {
            return Err(CliError::config("target.horizon", "must be at least 1"));
        }
        if t.resolution_minutes == 0 || 1440 % t.resolution_minutes != 0 {
            return Err(CliError::config("target.resolution_minutes", "must divide one day"));
        }
        if let Some(s) = &self.data.scenario {
            if s.resolution_minutes != t.resolution_minutes {
                return Err(CliError::config(
                    "target.resolution_minutes",
                    "must equal data.scenario.resolution_minutes",
                ));
            }
        }
        match &t.level {
            Level::Cluster(ids) if ids.is_empty() => return Err(CliError::config("target.level.cluster", "is empty")),
            _ => {}
        }
        for (key, list) in [("masks.historical", &self.masks.historical), ("masks.prospective", &self.masks.prospective)] {
            if let Some(bad) = list.iter().find(|n| !is_known_mask(n)) {
                return Err(CliError::config(key, format!("unknown mask `{bad}`")));
            }
        }
        if self.masks.weather_k == 0 {
            return Err(CliError::config("masks.weather_k", "must be at least 1"));
        }
        self.train.validate().map_err(|e| CliError::config("train", e.to_string()))?;
        if self.search.budget > 0 {
            self.search.space.validate().map_err(|e| CliError::config("search.space", e.to_string()))?;
        }
        if self.models.is_empty() {
            return Err(CliError::config("models", "at least one model is required"));
        }
        for (i, m) in self.models.iter().enumerate() {
            m.validate(&format!("models[{i}]"))?;
            if m.kind == ModelKind::HoltWinters {
                let period = m.period.unwrap_or((1440 / t.resolution_minutes) as usize);
                if self.input_len() < 2 * period {
                    return Err(CliError::config(
                        "segments.input_len",
                        format!("model `{}` needs two seasons ({} steps) of input", m.name, 2 * period),
                    ));
                }
            }
            if self.models[..i].iter().any(|o| o.name == m.name) {
                return Err(CliError::config(format!("models[{i}].name"), format!("duplicate name `{}`", m.name)));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form with `output` cleared, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(&Self { output: PathBuf::new(), ..self.clone() }).expect("config serialises");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn input_len(&self) -> usize {
        self.segments.input_len.unwrap_or(7 * self.target.horizon)
    }
}

impl ModelConfig {
    fn validate(&self, key: &str) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_+.".contains(c)) {
            return Err(CliError::config(format!("{key}.name"), "use letters, digits and `-_+.` only"));
        }
        let set = |present: bool, field: &str, allowed: bool| {
            if present && !allowed {
                Err(CliError::config(format!("{key}.{field}"), format!("does not apply to {:?}", self.kind)))
            } else {
                Ok(())
            }
        };
        let hw = self.kind == ModelKind::HoltWinters;
        let knn = matches!(self.kind, ModelKind::Knn | ModelKind::Barycenter);
        let rec = self.kind.is_recurrent();
        set(self.period.is_some(), "period", hw)?;
        set(self.offset.is_some(), "offset", hw)?;
        set(self.form.is_some(), "form", hw)?;
        set(self.k.is_some(), "k", self.kind == ModelKind::Knn)?;
        set(self.distance.is_some(), "distance", knn)?;
        set(self.combiner.is_some(), "combiner", knn)?;
        set(self.cell.is_some(), "cell", rec)?;
        set(self.hidden.is_some(), "hidden", rec)?;
        set(self.train.is_some(), "train", rec)?;
        set(self.c2_cell.is_some(), "c2_cell", self.kind == ModelKind::LstmC2)?;
        set(self.c2_hidden.is_some(), "c2_hidden", self.kind == ModelKind::LstmC2)?;
        if self.k == Some(0) {
            return Err(CliError::config(format!("{key}.k"), "must be at least 1; use kind = \"barycenter\" for all"));
        }
        if let Some(t) = &self.train {
            t.validate().map_err(|e| CliError::config(format!("{key}.train"), e.to_string()))?;
        }
        if self.hidden.as_ref().is_some_and(|h| h.is_empty() || h.contains(&0)) {
            return Err(CliError::config(format!("{key}.hidden"), "needs at least one positive layer size"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [data.scenario]
        days = 14

        [[models]]
        name = "hw"
        kind = "holt-winters"
    "#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = PipelineConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.target.horizon, 48);
        assert_eq!(c.target.level, Level::System);
        assert_eq!(c.input_len(), 7 * 48);
        assert_eq!(c.models[0].kind, ModelKind::HoltWinters);
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let text = MINIMAL.replace("days = 14", "days = 14\nweekday_boost = 2");
        match PipelineConfig::parse(&text) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "data.scenario.weekday_boost"),
            other => panic!("expected a config error, got {other:?}"),
        }
        let text = MINIMAL.replace("kind = \"holt-winters\"", "kind = \"holt-winters\"\nhiden = [3]");
        let err = PipelineConfig::parse(&text).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("models[0]"), "{err}");
    }

    #[test]
    fn data_source_is_exclusive() {
        let text = "[data]\n[[models]]\nname = \"a\"\nkind = \"knn\"\n";
        assert!(matches!(PipelineConfig::parse(text), Err(CliError::Config { path, .. }) if path == "data"));
    }

    #[test]
    fn fields_must_match_the_model_kind() {
        let text = MINIMAL.replace("kind = \"holt-winters\"", "kind = \"holt-winters\"\nhidden = [8]");
        assert!(matches!(PipelineConfig::parse(&text), Err(CliError::Config { path, .. }) if path == "models[0].hidden"));
    }

    #[test]
    fn levels_and_masks_parse() {
        let text = format!(
            "{MINIMAL}\n[target]\nlevel = {{ cluster = [1, 2] }}\nflow = \"checkins\"\n[masks]\nhistorical = [\"day\", \"wind_kmh\"]\n"
        );
        let c = PipelineConfig::parse(&text).unwrap();
        assert_eq!(c.target.level, Level::Cluster(vec![1, 2]));
        assert_eq!(c.masks.requested(), vec!["day", "wind_kmh"]);
        let bad = text.replace("\"wind_kmh\"", "\"wind\"");
        assert!(matches!(PipelineConfig::parse(&bad), Err(CliError::Config { path, .. }) if path == "masks.historical"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.seed = 0;
        b.output = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
    }
}
