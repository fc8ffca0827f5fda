use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bikecast::{CliError, Command, Pipeline, PipelineConfig};
use clap::Parser;

/// Context-aware demand forecasting for bike-sharing networks.
///
/// Every stage reads its inputs from and writes its artifacts to the output
/// directory. Set BIKECAST_LOG (error, warn, info, debug) to change verbosity.
#[derive(Debug, Parser)]
#[command(name = "bikecast", version)]
struct Args {
    /// Stage to run; `compare` runs them all.
    #[arg(value_enum)]
    command: Command,

    /// Pipeline configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,

    /// Overrides `seed` in the configuration.
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides `output` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

fn load(args: &Args) -> Result<PipelineConfig, CliError> {
    let mut config = PipelineConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output = out.clone();
    }
    // table paths are relative to the configuration file
    if let Some(csv) = &mut config.data.csv {
        let base = args.config.parent().unwrap_or(Path::new("."));
        resolve(base, &mut csv.stations);
        resolve(base, &mut csv.station_status);
        for p in [&mut csv.weather, &mut csv.events, &mut csv.calendar].into_iter().flatten() {
            resolve(base, p);
        }
    }
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BIKECAST_LOG", "info")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = load(&args).and_then(|config| Pipeline::new(config, args.jobs).run(args.command));
    match result {
        Ok(artifacts) => {
            for a in artifacts {
                println!("{}", a.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
