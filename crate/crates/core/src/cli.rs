//! The `mad` command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::error::MadError;
use crate::harness::output::{ManifestFile, METRICS_COLUMNS, RACE_COLUMNS, RAW_COLUMNS};
use crate::harness::{
    presets, run_experiment, write_manifest, write_metrics_csv, write_race_csv, write_raw_csv, ExperimentOutput, Manifest, Metric,
    MetricCurves, PresetRun, StoppingRaceResult, CSV_SCHEMA_VERSION,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mad", version, about = "Mixture adaptive design simulations and confidence sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a built-in preset or a JSON config and write CSVs plus a manifest.
    Run(RunArgs),
    /// List built-in presets whose name or description contains FILTER.
    ListPresets { filter: Option<String> },
    /// Print a preset as a JSON config that `run --config` accepts.
    ShowPreset { name: String },
    /// Check a JSON config without running it.
    Validate { path: PathBuf },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; replicate r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Output directory (default: $MAD_OUT, else ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-replicate CS tracks.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long = "t-star")]
    t_star: Option<u64>,
    /// Keep every n-th time point in the CSVs.
    #[arg(long)]
    stride: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            replicates: self.replicates,
            horizon: self.horizon,
            out: self.out.clone(),
            raw: self.raw,
            jobs: self.jobs,
            alpha: self.alpha,
            eta: self.eta,
            t_star: self.t_star,
            stride: self.stride,
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args, stdout),
        Command::ListPresets { filter } => cmd_list_presets(filter.as_deref(), stdout),
        Command::ShowPreset { name } => cmd_show_preset(&name, stdout),
        Command::Validate { path } => cmd_validate(&path, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INVALID
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

enum Failure {
    Invalid(MadError),
    Runtime(MadError),
}

fn runtime(e: impl Into<MadError>) -> Failure {
    Failure::Runtime(e.into())
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(|e| match e {
        MadError::Io(io) => Failure::Invalid(MadError::invalid("config", format!("cannot read {}: {io}", path.display()))),
        other => Failure::Invalid(other),
    })
}

fn cmd_validate(path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let config = load_config(path)?;
    config.validate().map_err(Failure::Invalid)?;
    writeln!(out, "{}: valid ({})", path.display(), config.experiment.name).map_err(runtime)
}

fn cmd_list_presets(filter: Option<&str>, out: &mut dyn Write) -> Result<(), Failure> {
    let filter = filter.unwrap_or("").to_lowercase();
    for p in presets::all() {
        if p.name.to_lowercase().contains(&filter) || p.description.to_lowercase().contains(&filter) {
            writeln!(out, "{:<16} {}", p.name, p.description).map_err(runtime)?;
        }
    }
    Ok(())
}

fn cmd_show_preset(name: &str, out: &mut dyn Write) -> Result<(), Failure> {
    let config = RunConfig::named(name).map_err(Failure::Invalid)?;
    writeln!(out, "{}", config.to_json().map_err(runtime)?).map_err(runtime)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| runtime(MadError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut config = match (&args.preset, &args.config) {
        (Some(name), _) => RunConfig::named(name).map_err(Failure::Invalid)?,
        (None, Some(path)) => load_config(path)?,
        (None, None) => return Err(Failure::Invalid(MadError::invalid("preset", "pass --preset or --config"))),
    };
    config.apply(&args.overrides());
    config.validate().map_err(Failure::Invalid)?;

    let dir = config.out_dir();
    std::fs::create_dir_all(&dir).map_err(runtime)?;
    let options = config.run_options();
    let name = config.experiment.name.clone();
    let started = Instant::now();
    let output = run_experiment(&config.experiment, config.base_seed, options).map_err(runtime)?;
    let wall = started.elapsed().as_secs_f64();

    let mut files = Vec::new();
    let metrics_name = format!("{name}_metrics.csv");
    match &output {
        ExperimentOutput::Curves(run) => {
            write_metrics_csv(create(&dir.join(&metrics_name))?, &run.curves, config.stride).map_err(runtime)?;
            files.push(ManifestFile::new(&metrics_name, &METRICS_COLUMNS));
            if !run.raw.is_empty() {
                let raw_name = format!("{name}_raw.csv");
                write_raw_csv(create(&dir.join(&raw_name))?, &run.raw, config.stride).map_err(runtime)?;
                files.push(ManifestFile::new(&raw_name, &RAW_COLUMNS));
            }
            print_curve_summary(run, out).map_err(runtime)?;
        }
        ExperimentOutput::Race(race) => {
            let race_name = format!("{name}_race.csv");
            write_race_csv(create(&dir.join(&race_name))?, race).map_err(runtime)?;
            files.push(ManifestFile::new(&race_name, &RACE_COLUMNS));
            write_metrics_csv(create(&dir.join(&metrics_name))?, &race_curves(race), config.stride).map_err(runtime)?;
            files.push(ManifestFile::new(&metrics_name, &METRICS_COLUMNS));
            print_race_summary(race, out).map_err(runtime)?;
        }
    }

    let manifest = Manifest {
        preset: name.clone(),
        base_seed: config.base_seed,
        replicates: config.experiment.replicates,
        seeds: (0..config.experiment.replicates).map(|r| config.base_seed.wrapping_add(r as u64)).collect(),
        mad_version: env!("CARGO_PKG_VERSION").to_string(),
        csv_schema_version: CSV_SCHEMA_VERSION,
        files,
        wall_time_seconds: wall,
        jobs: options.jobs,
        config: serde_json::to_value(&config).map_err(runtime)?,
    };
    write_manifest(create(&dir.join(format!("{name}_manifest.json")))?, &manifest).map_err(runtime)?;
    writeln!(out, "wrote {} ({:.1}s)", dir.display(), wall).map_err(runtime)
}

fn race_curves(race: &StoppingRaceResult) -> MetricCurves {
    let (mad, bern) = race.reward_stats();
    let mut curves = MetricCurves::new(vec![race.setting.clone()]);
    curves.insert_series(0, "mad", Metric::Reward, mad);
    curves.insert_series(0, "bernoulli", Metric::Reward, bern);
    curves
}

fn print_curve_summary(run: &PresetRun, out: &mut dyn Write) -> std::io::Result<()> {
    for series in &run.curves.series {
        let get = |m| series.last(m).map_or("-".to_string(), |p| format!("{:.4}", p.mean));
        writeln!(
            out,
            "{} {}: coverage={} stopped={} reward={} width={}",
            series.setting,
            series.design,
            get(Metric::Coverage),
            get(Metric::Stopped),
            get(Metric::Reward),
            get(Metric::Width)
        )?;
    }
    Ok(())
}

fn print_race_summary(race: &StoppingRaceResult, out: &mut dyn Write) -> std::io::Result<()> {
    let n = race.replicates.len();
    let mad_stopped = race.replicates.iter().filter(|r| r.mad_stop.is_some()).count();
    let bern_stopped = race.replicates.iter().filter(|r| r.bernoulli_stop.is_some()).count();
    let (mad, bern) = race.mean_final_rewards();
    let median = race.median_gap().map_or("-".to_string(), |g| g.to_string());
    writeln!(out, "{} mad: stopped={mad_stopped}/{n} reward={:.4}", race.setting, mad.mean())?;
    writeln!(out, "{} bernoulli: stopped={bern_stopped}/{n} reward={:.4}", race.setting, bern.mean())?;
    writeln!(out, "{} median stop gap (mad - bernoulli): {median}", race.setting)
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
