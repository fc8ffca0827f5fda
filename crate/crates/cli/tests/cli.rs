use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 5

[data.scenario]
n_stations = 8
days = 14
holidays = ["2019-01-14"]

[target]
horizon = 24

[masks]
historical = ["day", "hour", "holiday", "wind_kmh"]
prospective = ["day", "hour", "wind_kmh"]
hour_bins = 4

[segments]
input_len = 96
slide = 12

[train]
learning_rate = 3e-3
max_epochs = 4
patience = 2

[[models]]
name = "hw"
kind = "holt-winters"

[[models]]
name = "knn"
kind = "knn"
k = 3

[[models]]
name = "lstm"
kind = "lstm"
context = false
hidden = [4]

[[models]]
name = "lstm-c2"
kind = "lstm+c2"
cell = "gru"
hidden = [4]
c2_hidden = 3
"#;

fn bikecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bikecast"))
        .args(args)
        .env("BIKECAST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("pipeline.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run_ok(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![extra[0], "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend(&extra[1..]);
    let output = bikecast(&args);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    output
}

fn read(path: PathBuf) -> Vec<u8> {
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn compare_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    run_ok(&config, &a, &["compare", "--jobs", "1"]);
    run_ok(&config, &b, &["compare", "--jobs", "1"]);
    run_ok(&config, &c, &["compare", "--jobs", "3"]);
    for name in ["report.csv", "significance.csv", "forecasts.csv", "models/lstm-c2.json", "manifests/compare.json"] {
        assert_eq!(read(a.join(name)), read(b.join(name)), "{name}");
        assert_eq!(read(a.join(name)), read(c.join(name)), "{name}");
    }
    let report = String::from_utf8(read(a.join("report.csv"))).unwrap();
    let models: Vec<&str> = report.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(models, ["hw", "knn", "lstm", "lstm-c2"]);
    let significance = String::from_utf8(read(a.join("significance.csv"))).unwrap();
    assert_eq!(significance.lines().count(), 1 + 6);
}

#[test]
fn single_stages_chain_to_the_compare_result() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let (whole, staged) = (dir.path().join("whole"), dir.path().join("staged"));
    run_ok(&config, &whole, &["compare"]);
    for stage in ["generate", "ingest", "stats", "mask", "segment", "train", "forecast", "evaluate"] {
        run_ok(&config, &staged, &[stage]);
        assert!(staged.join(format!("manifests/{stage}.json")).exists());
    }
    for name in ["masked.csv", "segments.csv", "stats.csv", "forecasts.csv", "report.csv", "significance.csv"] {
        assert_eq!(read(whole.join(name)), read(staged.join(name)), "{name}");
    }
    // forecasting again from the stored models reproduces the forecasts
    run_ok(&config, &staged, &["forecast"]);
    assert_eq!(read(whole.join("forecasts.csv")), read(staged.join("forecasts.csv")));
}

#[test]
fn invalid_configuration_exits_with_1_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &CONFIG.replace("hour_bins = 4", "hour_bins = 4\nweather_radius = 2"));
    let output = bikecast(&["ingest", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("masks.weather_radius"));

    let config = write_config(dir.path(), &CONFIG.replace("k = 3", "k = 3\nhidden = [2]"));
    let output = bikecast(&["ingest", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("models[1].hidden"));

    let output = bikecast(&["ingest"]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn running_a_stage_early_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let output = bikecast(&["train", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("masked.csv"));
}

#[test]
fn models_trained_under_another_seed_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    run_ok(&config, &out, &["compare"]);
    let output = bikecast(&["forecast", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "6"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn csv_tables_resolve_relative_to_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let generated = dir.path().join("gen");
    run_ok(&config, &generated, &["generate"]);
    run_ok(&config, &generated, &["ingest"]);

    let nested = dir.path().join("nested");
    std::fs::create_dir(&nested).unwrap();
    let csv = CONFIG.replace(
        "[data.scenario]\nn_stations = 8\ndays = 14\nholidays = [\"2019-01-14\"]",
        "[data.csv]\nstations = \"../gen/data/stations.csv\"\nstation_status = \"../gen/data/station_status.csv\"\n\
         weather = \"../gen/data/weather.csv\"\ncalendar = \"../gen/data/calendar.csv\"",
    );
    assert_ne!(csv, CONFIG);
    let csv_config = write_config(&nested, &csv);
    let from_csv = dir.path().join("from_csv");
    run_ok(&csv_config, &from_csv, &["ingest"]);
    assert_eq!(read(generated.join("series.csv")), read(from_csv.join("series.csv")));
    run_ok(&config, &generated, &["mask"]);
    run_ok(&csv_config, &from_csv, &["mask"]);
    assert_eq!(read(generated.join("masked.csv")), read(from_csv.join("masked.csv")));
}

#[test]
fn seed_override_reaches_the_generator_and_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&config, &a, &["generate"]);
    run_ok(&config, &b, &["generate", "--seed", "9"]);
    assert_ne!(read(a.join("data/station_status.csv")), read(b.join("data/station_status.csv")));
    let manifest: serde_json::Value = serde_json::from_slice(&read(b.join("manifests/generate.json"))).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["artifacts"][0], "data/stations.csv");
}
