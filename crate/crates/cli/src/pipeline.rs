//! Pipeline stages. Each stage reads the artifacts of the previous one from
//! the output directory, so stages can run one at a time or chained.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bikecast_core::baselines::knn::{CombinerKind, DistanceKind, KnnConfig};
use bikecast_core::baselines::HoltWintersParams;
use bikecast_core::eval::{EvaluationReport, FoldResidues, Forecaster, ModelEvaluation};
use bikecast_core::forecasters::{default_smoothing_grid, HoltWintersForecaster, KnnForecaster};
use bikecast_core::recurrent::{CellKind, ModelSpec, SerialModel, TrainConfig, TrainReport};
use bikecast_core::search::search_serial;
use bikecast_core::segment::{build_folds, segment_instances, temporal_split, SubdatasetSpec};
use bikecast_core::stats::stats_summary;
use bikecast_core::synthetic::{generate_network, generate_scenario};
use bikecast_core::{Fold, SegmentSpec, TimeSeries};
use chrono::{DateTime, TimeDelta, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CsvSources, ModelConfig, ModelKind, PipelineConfig};
use crate::context::{build_masked, model_channels, timezone};
use crate::csvio;
use crate::error::{CliError, Result};
use crate::ingest::{ingest, scenario_sources};

/// Bumped whenever the layout of stored models changes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Generate,
    Ingest,
    Stats,
    Mask,
    Segment,
    Train,
    Forecast,
    Evaluate,
    /// Every stage in order.
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Generate => "generate",
            Self::Ingest => "ingest",
            Self::Stats => "stats",
            Self::Mask => "mask",
            Self::Segment => "segment",
            Self::Train => "train",
            Self::Forecast => "forecast",
            Self::Evaluate => "evaluate",
            Self::Compare => "compare",
        }
    }
}

/// What a fold of a stored model needs to forecast again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum FoldArtifact {
    HoltWinters(HoltWintersForecaster),
    /// Refit from the fold's training split, which is deterministic.
    Knn { config: KnnConfig },
    Serial { model: SerialModel, report: TrainReport, trials: Vec<(TrainConfig, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredModel {
    pub format_version: u32,
    pub name: String,
    pub kind: ModelKind,
    pub config_sha256: String,
    pub folds: Vec<FoldArtifact>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    seed: u64,
    artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub model: String,
    pub fold: usize,
    #[serde(with = "iso")]
    pub origin: DateTime<Utc>,
    pub step: usize,
    pub forecast: f64,
    pub truth: f64,
}

mod iso {
    use chrono::{DateTime, Utc};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::csvio::format_time(*ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let text = String::deserialize(d)?;
        crate::csvio::parse_time(&text).ok_or_else(|| D::Error::custom(format!("bad timestamp `{text}`")))
    }
}

#[derive(Debug, Serialize)]
struct StatsRow {
    weekday: String,
    time: String,
    count: usize,
    mean: f64,
    std: f64,
}

#[derive(Debug, Serialize)]
struct SegmentRow {
    fold: usize,
    split: &'static str,
    #[serde(with = "iso")]
    input_start: DateTime<Utc>,
    #[serde(with = "iso")]
    origin: DateTime<Utc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub model_a: String,
    pub model_b: String,
    pub direction: String,
    pub t: f64,
    pub p: f64,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    /// Worker threads for training and forecasting; 0 uses every core.
    pub jobs: usize,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, jobs: usize) -> Self {
        Self { config, jobs }
    }

    fn out(&self) -> &Path {
        &self.config.output
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out().join(name)
    }

    fn existing(&self, name: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(CliError::MissingArtifact(p))
        }
    }

    fn resolution(&self) -> TimeDelta {
        TimeDelta::minutes(i64::from(self.config.target.resolution_minutes))
    }

    fn sources(&self) -> Result<CsvSources> {
        match &self.config.data.csv {
            Some(csv) => Ok(csv.clone()),
            None => {
                let dir = self.path("data");
                self.existing("data/station_status.csv")?;
                Ok(scenario_sources(&dir))
            }
        }
    }

    /// Runs `command` and writes its manifest. Returns the artifacts written.
    pub fn run(&self, command: Command) -> Result<Vec<PathBuf>> {
        csvio::create_dir(self.out())?;
        let artifacts = match command {
            Command::Generate => self.generate()?,
            Command::Ingest => self.ingest()?,
            Command::Stats => self.stats()?,
            Command::Mask => self.mask()?,
            Command::Segment => self.segment()?,
            Command::Train => self.train()?,
            Command::Forecast => self.forecast()?,
            Command::Evaluate => self.evaluate()?,
            Command::Compare => {
                let mut all = Vec::new();
                if self.config.data.scenario.is_some() {
                    all.extend(self.generate()?);
                }
                for stage in [Self::ingest, Self::stats, Self::mask, Self::segment, Self::train, Self::forecast, Self::evaluate] {
                    all.extend(stage(self)?);
                }
                all
            }
        };
        self.write_manifest(command, &artifacts)?;
        Ok(artifacts)
    }

    fn write_manifest(&self, command: Command, artifacts: &[PathBuf]) -> Result<()> {
        let dir = self.path("manifests");
        csvio::create_dir(&dir)?;
        let manifest = Manifest {
            command: command.name(),
            config_sha256: self.config.hash(),
            seed: self.config.seed,
            artifacts: artifacts
                .iter()
                .map(|p| p.strip_prefix(self.out()).unwrap_or(p).to_string_lossy().replace('\\', "/"))
                .collect(),
        };
        let path = dir.join(format!("{}.json", command.name()));
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        std::fs::write(&path, text + "\n").map_err(|source| CliError::Io { path, source })
    }

    pub fn generate(&self) -> Result<Vec<PathBuf>> {
        let mut sc_cfg = self
            .config
            .data
            .scenario
            .clone()
            .ok_or_else(|| CliError::config("data.scenario", "`generate` needs a scenario"))?;
        sc_cfg.seed = self.config.seed;
        let network = generate_network(sc_cfg.n_stations, sc_cfg.bbox, sc_cfg.capacity_range, sc_cfg.seed)?;
        let scenario = generate_scenario(&network, &sc_cfg)?;
        let dir = self.path("data");
        csvio::write_scenario(&dir, &scenario)?;
        log::info!("generated {} stations over {} days", network.len(), sc_cfg.days);
        let s = scenario_sources(&dir);
        Ok([Some(s.stations), Some(s.station_status), s.weather, s.events, s.calendar].into_iter().flatten().collect())
    }

    pub fn ingest(&self) -> Result<Vec<PathBuf>> {
        let data = ingest(&self.sources()?, self.resolution())?;
        let demand = data.demand(&self.config.target.level)?;
        let path = self.path("series.csv");
        csvio::write_series(&path, &demand)?;
        log::info!("ingested {} stations, {} steps", data.stations.len(), demand.len());
        Ok(vec![path])
    }

    pub fn stats(&self) -> Result<Vec<PathBuf>> {
        let series = csvio::read_series(&self.existing("series.csv")?)?;
        let channel = series
            .channels()
            .iter()
            .position(|c| c == self.config.target.flow.channel())
            .ok_or_else(|| CliError::format(self.path("series.csv"), "target channel missing"))?;
        let rows: Vec<StatsRow> = stats_summary(&series, channel, timezone(&self.config)?)?
            .into_iter()
            .map(|r| StatsRow {
                weekday: r.weekday.to_string(),
                time: r.time.format("%H:%M").to_string(),
                count: r.count,
                mean: r.mean,
                std: r.std,
            })
            .collect();
        let path = self.path("stats.csv");
        csvio::write_rows(&path, &rows)?;
        Ok(vec![path])
    }

    pub fn mask(&self) -> Result<Vec<PathBuf>> {
        let demand = csvio::read_series(&self.existing("series.csv")?)?;
        let data = ingest(&self.sources()?, self.resolution())?;
        let masked = build_masked(&data, &self.config, &demand)?;
        let path = self.path("masked.csv");
        csvio::write_series(&path, &masked)?;
        log::info!("masked series has channels {:?}", masked.channels());
        Ok(vec![path])
    }

    fn masked(&self) -> Result<TimeSeries> {
        csvio::read_series(&self.existing("masked.csv")?)
    }

    fn segment_spec(&self, inputs: Vec<String>, prospective: Vec<String>) -> SegmentSpec {
        let t = &self.config.target;
        let mut spec = SegmentSpec::new(t.flow.channel(), t.horizon)
            .input_len(self.config.input_len())
            .input_channels(inputs)
            .prospective(prospective);
        if let Some(slide) = self.config.segments.slide {
            spec = spec.slide(slide);
        }
        spec
    }

    fn folds(&self, masked: &TimeSeries, spec: &SegmentSpec) -> Result<Vec<Fold>> {
        let s = &self.config.segments;
        let folds = match s.window_days {
            Some(window_days) => {
                build_folds(masked, SubdatasetSpec { window_days, step_days: s.step_days }, spec, s.fractions)?
            }
            None => vec![temporal_split(segment_instances(masked, spec)?, s.fractions)?],
        };
        for f in &folds {
            f.check_non_empty()?;
        }
        Ok(folds)
    }

    fn model_folds(&self, masked: &TimeSeries, model: &ModelConfig) -> Result<Vec<Fold>> {
        let (inputs, prospective) = model_channels(&self.config, model, masked);
        self.folds(masked, &self.segment_spec(inputs, prospective))
    }

    pub fn segment(&self) -> Result<Vec<PathBuf>> {
        let masked = self.masked()?;
        let inputs = masked.channels().to_vec();
        let folds = self.folds(&masked, &self.segment_spec(inputs, Vec::new()))?;
        let mut rows = Vec::new();
        for (k, fold) in folds.iter().enumerate() {
            for (split, set) in [("train", &fold.train), ("validation", &fold.validation), ("test", &fold.test)] {
                rows.extend(set.iter().map(|i| SegmentRow { fold: k, split, input_start: i.input.start(), origin: i.origin }));
            }
        }
        let path = self.path("segments.csv");
        csvio::write_rows(&path, &rows)?;
        log::info!("{} folds, {} instances", folds.len(), rows.len());
        Ok(vec![path])
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CliError::config("--jobs", e.to_string()))
    }

    fn fit_fold(&self, model: &ModelConfig, fold: &Fold, k: usize) -> Result<FoldArtifact> {
        let seed = self.config.seed.wrapping_add(k as u64);
        let steps_per_day = (1440 / self.config.target.resolution_minutes) as usize;
        Ok(match model.kind {
            ModelKind::HoltWinters => {
                let mut params = HoltWintersParams::new(0.5, 0.0, 0.1, model.period.unwrap_or(steps_per_day));
                params.form = model.form.unwrap_or_default();
                let offset = model.offset.unwrap_or(1.0);
                FoldArtifact::HoltWinters(HoltWintersForecaster::tune(fold, params, offset, &default_smoothing_grid())?)
            }
            ModelKind::Knn | ModelKind::Barycenter => {
                let k = if model.kind == ModelKind::Barycenter { 0 } else { model.k.unwrap_or(5) };
                let mut config = KnnConfig::new(
                    k,
                    model.distance.unwrap_or(DistanceKind::Euclidean),
                    model.combiner.unwrap_or(CombinerKind::EuclideanMean),
                );
                config.seed = seed;
                FoldArtifact::Knn { config }
            }
            ModelKind::Lstm | ModelKind::LstmC2 => {
                let mut spec = ModelSpec {
                    c1_cell: model.cell.unwrap_or(CellKind::Lstm),
                    c1_hidden: model.hidden.clone().unwrap_or_else(|| vec![64]),
                    ..ModelSpec::default()
                };
                if model.kind == ModelKind::LstmC2 {
                    spec = spec.with_refiner(model.c2_hidden.unwrap_or(32));
                    spec.c2_cell = model.c2_cell.unwrap_or(CellKind::Lstm);
                }
                let base = TrainConfig { seed, ..model.train.unwrap_or(self.config.train) };
                if self.config.search.budget > 0 {
                    let outcome = search_serial(&spec, fold, &self.config.search.space, &base, self.config.search.budget, seed)?;
                    let (model, report) = outcome.model;
                    FoldArtifact::Serial { model, report, trials: outcome.trials }
                } else {
                    let (model, report) = SerialModel::train(&spec, fold, &base)?;
                    FoldArtifact::Serial { model, report, trials: Vec::new() }
                }
            }
        })
    }

    fn model_path(&self, name: &str) -> PathBuf {
        self.path("models").join(format!("{name}.json"))
    }

    pub fn train(&self) -> Result<Vec<PathBuf>> {
        let masked = self.masked()?;
        let per_model: Vec<Vec<Fold>> =
            self.config.models.iter().map(|m| self.model_folds(&masked, m)).collect::<Result<_>>()?;
        let jobs: Vec<(usize, usize)> =
            per_model.iter().enumerate().flat_map(|(i, folds)| (0..folds.len()).map(move |k| (i, k))).collect();
        let fitted: Vec<FoldArtifact> = self.pool()?.install(|| {
            jobs.par_iter()
                .map(|&(i, k)| {
                    let model = &self.config.models[i];
                    log::info!("training {} on fold {k}", model.name);
                    self.fit_fold(model, &per_model[i][k], k)
                })
                .collect::<Result<_>>()
        })?;

        csvio::create_dir(&self.path("models"))?;
        let mut fitted = fitted.into_iter();
        let mut written = Vec::new();
        for (model, folds) in self.config.models.iter().zip(&per_model) {
            let stored = StoredModel {
                format_version: MODEL_FORMAT_VERSION,
                name: model.name.clone(),
                kind: model.kind,
                config_sha256: self.config.hash(),
                folds: fitted.by_ref().take(folds.len()).collect(),
            };
            let path = self.model_path(&model.name);
            let text = serde_json::to_string(&stored).expect("model serialises");
            std::fs::write(&path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn load_model(&self, name: &str) -> Result<StoredModel> {
        let path = self.model_path(name);
        let text = std::fs::read_to_string(&path).map_err(|_| CliError::MissingArtifact(path.clone()))?;
        let stored: StoredModel = serde_json::from_str(&text).map_err(|e| CliError::format(&path, e))?;
        if stored.format_version != MODEL_FORMAT_VERSION {
            return Err(CliError::format(&path, format!("model format {} is not {MODEL_FORMAT_VERSION}", stored.format_version)));
        }
        if stored.config_sha256 != self.config.hash() {
            return Err(CliError::format(&path, "trained under a different configuration; run `train` again"));
        }
        Ok(stored)
    }

    fn forecast_fold(name: &str, artifact: &FoldArtifact, fold: &Fold, k: usize) -> Result<Vec<ForecastRow>> {
        let knn;
        let model: &dyn Forecaster = match artifact {
            FoldArtifact::HoltWinters(m) => m,
            FoldArtifact::Knn { config } => {
                knn = KnnForecaster::fit(fold, *config)?;
                &knn
            }
            FoldArtifact::Serial { model, .. } => model,
        };
        let mut rows = Vec::new();
        for inst in &fold.test {
            let f = model.forecast(inst)?;
            rows.extend(f.iter().zip(inst.output.values()).enumerate().map(|(step, (p, y))| ForecastRow {
                model: name.to_string(),
                fold: k,
                origin: inst.origin,
                step,
                forecast: *p,
                truth: *y,
            }));
        }
        Ok(rows)
    }

    pub fn forecast(&self) -> Result<Vec<PathBuf>> {
        let masked = self.masked()?;
        let mut tasks = Vec::new();
        for model in &self.config.models {
            let stored = self.load_model(&model.name)?;
            let folds = self.model_folds(&masked, model)?;
            if folds.len() != stored.folds.len() {
                return Err(CliError::format(self.model_path(&model.name), "fold count differs from the data"));
            }
            tasks.extend(folds.into_iter().zip(stored.folds).enumerate().map(|(k, (f, a))| (model.name.clone(), k, f, a)));
        }
        let chunks: Vec<Vec<ForecastRow>> = self.pool()?.install(|| {
            tasks.par_iter().map(|(name, k, fold, artifact)| Self::forecast_fold(name, artifact, fold, *k)).collect::<Result<_>>()
        })?;
        let rows: Vec<ForecastRow> = chunks.into_iter().flatten().collect();
        let path = self.path("forecasts.csv");
        csvio::write_rows(&path, &rows)?;
        Ok(vec![path])
    }

    /// Pools the stored forecasts per model in configuration order.
    pub fn evaluations(&self) -> Result<Vec<ModelEvaluation>> {
        let rows: Vec<ForecastRow> = csvio::read_rows(&self.existing("forecasts.csv")?)?;
        let mut grouped: BTreeMap<&str, BTreeMap<usize, BTreeMap<DateTime<Utc>, Vec<(usize, f64)>>>> = BTreeMap::new();
        for r in &rows {
            grouped
                .entry(&r.model)
                .or_default()
                .entry(r.fold)
                .or_default()
                .entry(r.origin)
                .or_default()
                .push((r.step, r.forecast - r.truth));
        }
        self.config
            .models
            .iter()
            .map(|m| {
                let folds = grouped
                    .get(m.name.as_str())
                    .ok_or_else(|| CliError::format(self.path("forecasts.csv"), format!("no forecasts for `{}`", m.name)))?;
                let residues = folds
                    .values()
                    .map(|instances| FoldResidues {
                        residues: instances
                            .values()
                            .map(|steps| {
                                let mut steps = steps.clone();
                                steps.sort_by_key(|(s, _)| *s);
                                steps.into_iter().map(|(_, e)| e).collect()
                            })
                            .collect(),
                    })
                    .collect();
                Ok(ModelEvaluation::from_folds(m.name.clone(), residues, self.config.evaluation.pooling)?)
            })
            .collect()
    }

    pub fn evaluate(&self) -> Result<Vec<PathBuf>> {
        let report = EvaluationReport::new(self.evaluations()?)?;
        let rows: Vec<ReportRow> = report
            .models
            .iter()
            .map(|m| ReportRow {
                model: m.name.clone(),
                mae_mean: m.mae_mean,
                mae_std: m.mae_std,
                rmse_mean: m.rmse_mean,
                rmse_std: m.rmse_std,
            })
            .collect();
        let tests: Vec<SignificanceRow> = report
            .tests
            .iter()
            .map(|t| SignificanceRow {
                model_a: t.model_a.clone(),
                model_b: t.model_b.clone(),
                direction: t.alternative.symbol().to_string(),
                t: t.t,
                p: t.p,
            })
            .collect();
        for r in &rows {
            log::info!("{}: MAE {:.3} ± {:.3}, RMSE {:.3} ± {:.3}", r.model, r.mae_mean, r.mae_std, r.rmse_mean, r.rmse_std);
        }
        let report_path = self.path("report.csv");
        let sig_path = self.path("significance.csv");
        csvio::write_rows(&report_path, &rows)?;
        csvio::write_rows(&sig_path, &tests)?;
        Ok(vec![report_path, sig_path])
    }
}
