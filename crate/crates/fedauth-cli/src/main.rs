//! Experiment runner: loads a JSON config, applies CLI overrides, dispatches
//! the experiment, and persists reports, transcripts, and a manifest.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid config.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use fedauth_core::datagen::{gen_base_dataset, gen_population, save_features, PopulationSpec};
use fedauth_core::experiments::{
    apply_override, compare_methods, qiid_sweep, single_run, unknown_ablation, unknown_keys,
    CommSummary, ExperimentConfig, ExperimentKind,
};
use fedauth_core::faa::save_auth_model;
use fedauth_core::rng::substream_seed;
use fedauth_core::Error;

#[derive(Parser)]
#[command(
    name = "fedauth",
    version,
    about = "Federated active-authentication simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Path to the JSON config.
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the experiment kind.
        #[arg(long, value_enum)]
        experiment: Option<ExperimentArg>,
    },
    /// Check a config file and list every violated invariant.
    Validate { config: PathBuf },
    /// Generate a synthetic population from the config and write it as a
    /// feature CSV.
    ExportFeatures {
        config: PathBuf,
        /// Destination CSV path.
        output: PathBuf,
        /// Which population to export.
        #[arg(long, value_enum, default_value_t = WhichPopulation::Enrolled)]
        which: WhichPopulation,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    SingleRun,
    CompareMethods,
    QiidSweep,
    UnknownAblation,
}

impl From<ExperimentArg> for ExperimentKind {
    fn from(value: ExperimentArg) -> Self {
        match value {
            ExperimentArg::SingleRun => ExperimentKind::SingleRun,
            ExperimentArg::CompareMethods => ExperimentKind::CompareMethods,
            ExperimentArg::QiidSweep => ExperimentKind::QiidSweep,
            ExperimentArg::UnknownAblation => ExperimentKind::UnknownAblation,
        }
    }
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    // Dotted-path overrides (`--faa.samples_per_user=500`) are peeled off
    // before clap sees the argument list.
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut plain_args: Vec<String> = Vec::new();
    for arg in std::env::args() {
        match parse_dotted_override(&arg) {
            Some(pair) => overrides.push(pair),
            None => plain_args.push(arg),
        }
    }
    let cli = Cli::parse_from(plain_args);

    match cli.command {
        Command::Run {
            config,
            seed,
            output_dir,
            experiment,
        } => match load_config(&config, &overrides, seed, output_dir, experiment) {
            Ok((cfg, warnings)) => {
                for w in &warnings {
                    eprintln!("warning: unknown config key `{w}`");
                }
                match run_experiment(&cfg) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => {
                        eprintln!("error: {e}");
                        if matches!(e.downcast_ref::<Error>(), Some(Error::Config(_))) {
                            ExitCode::from(EXIT_CONFIG)
                        } else {
                            ExitCode::from(EXIT_RUNTIME)
                        }
                    }
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Validate { config } => validate_command(&config, &overrides),
        Command::ExportFeatures {
            config,
            output,
            which,
        } => match load_config(&config, &overrides, None, None, None) {
            Ok((cfg, _)) => match export_features(&cfg, &output, which) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            },
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}

/// `--a.b.c=value` (key contains a dot) is a config override.
fn parse_dotted_override(arg: &str) -> Option<(String, String)> {
    let rest = arg.strip_prefix("--")?;
    let (key, value) = rest.split_once('=')?;
    if key.contains('.')
        && key
            .chars()
            .all(|c| c.is_alphanumeric() || c == '.' || c == '_')
    {
        Some((key.to_string(), value.to_string()))
    } else {
        None
    }
}

fn load_raw(path: &Path, overrides: &[(String, String)]) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| {
        anyhow::anyhow!(
            "{} line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        )
    })?;
    for (key, value) in overrides {
        apply_override(&mut doc, key, value)?;
    }
    Ok(doc)
}

fn load_config(
    path: &Path,
    overrides: &[(String, String)],
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    experiment: Option<ExperimentArg>,
) -> anyhow::Result<(ExperimentConfig, Vec<String>)> {
    let doc = load_raw(path, overrides)?;
    let warnings = unknown_keys(&doc);
    let mut cfg: ExperimentConfig = serde_json::from_value(doc)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(dir) = output_dir {
        cfg.output_dir = dir.to_string_lossy().into_owned();
    }
    if let Some(kind) = experiment {
        cfg.experiment = kind.into();
    }
    cfg.validate()?;
    Ok((cfg, warnings))
}

fn validate_command(path: &Path, overrides: &[(String, String)]) -> ExitCode {
    let doc = match load_raw(path, overrides) {
        Ok(doc) => doc,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    for key in unknown_keys(&doc) {
        println!("warning: unknown config key `{key}`");
    }
    let cfg: ExperimentConfig = match serde_json::from_value(doc) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let diagnostics = cfg.diagnostics();
    if diagnostics.is_empty() {
        println!("config ok");
        ExitCode::SUCCESS
    } else {
        for d in &diagnostics {
            println!("invalid: {d}");
        }
        ExitCode::from(EXIT_CONFIG)
    }
}

fn export_features(
    cfg: &ExperimentConfig,
    output: &Path,
    which: WhichPopulation,
) -> anyhow::Result<()> {
    let data = match which {
        WhichPopulation::Enrolled => {
            let spec = PopulationSpec {
                seed: substream_seed(cfg.seed, "datagen/enrolled"),
                ..cfg.population.clone()
            };
            gen_population(&spec)?.data
        }
        WhichPopulation::Base => {
            let spec = PopulationSpec {
                seed: substream_seed(cfg.seed, "datagen/base"),
                ..cfg.base_population.clone()
            };
            gen_base_dataset(&spec)?.data
        }
    };
    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    save_features(&data, output)?;
    println!("wrote {} samples to {}", data.len(), output.display());
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
enum WhichPopulation {
    Enrolled,
    Base,
}

fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let out_dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&out_dir).map_err(|e| {
        Error::Config(format!(
            "cannot create output dir {}: {e}",
            out_dir.display()
        ))
    })?;
    probe_writable(&out_dir)?;

    let started = Instant::now();
    match cfg.experiment {
        ExperimentKind::SingleRun => {
            let result = single_run(cfg)?;
            write(&out_dir, "report.json", &result.report_json()?)?;
            write(&out_dir, "per_user_faa.csv", &result.report.to_csv())?;
            write(
                &out_dir,
                "transcript_faa.json",
                &result.transcript.to_json()?,
            )?;
            save_auth_model(&result.model, &out_dir.join("authmodel.json"))?;
            println!(
                "faa mean ADA {:.4} (±{:.4})",
                result.report.mean_ada, result.report.std_ada
            );
            let comm = CommSummary::from(&result.transcript);
            println!(
                "faa uplink: {} messages, {} units, {} rounds",
                comm.uplink_messages, comm.uplink_units, comm.rounds
            );
        }
        ExperimentKind::CompareMethods => {
            let result = compare_methods(cfg)?;
            write(&out_dir, "report.json", &result.report_json()?)?;
            write(&out_dir, "per_user_faa.csv", &result.faa.to_csv())?;
            write(&out_dir, "per_user_fedavg.csv", &result.fedavg.to_csv())?;
            write(
                &out_dir,
                "per_user_split_learning.csv",
                &result.split_learning.to_csv(),
            )?;
            write(&out_dir, "per_user_oneclass.csv", &result.oneclass.to_csv())?;
            write(
                &out_dir,
                "transcript_faa.json",
                &result.faa_transcript.to_json()?,
            )?;
            write(
                &out_dir,
                "transcript_fedavg.json",
                &result.fedavg_transcript.to_json()?,
            )?;
            write(
                &out_dir,
                "transcript_split_learning.json",
                &result.split_transcript.to_json()?,
            )?;
            save_auth_model(&result.faa_model, &out_dir.join("authmodel.json"))?;
            println!(
                "mean ADA  faa {:.4} | split {:.4} | fedavg {:.4} | oneclass {:.4}",
                result.faa.mean_ada,
                result.split_learning.mean_ada,
                result.fedavg.mean_ada,
                result.oneclass.mean_ada
            );
        }
        ExperimentKind::QiidSweep => {
            let result = qiid_sweep(cfg)?;
            write(&out_dir, "report.json", &result.report_json()?)?;
            write(&out_dir, "curve.csv", &result.to_csv())?;
            for p in &result.points {
                println!(
                    "qIID {:.2} (measured {:.3}): fedavg mean ADA {:.4}",
                    p.target_qiid, p.measured_qiid, p.mean_ada
                );
            }
        }
        ExperimentKind::UnknownAblation => {
            let result = unknown_ablation(cfg)?;
            write(&out_dir, "report.json", &result.report_json()?)?;
            write(&out_dir, "ablation.csv", &result.to_csv())?;
            for r in &result.rows {
                println!(
                    "{} unknown users: faa mean ADA {:.4} (±{:.4})",
                    r.num_unknown, r.mean_ada, r.std_ada
                );
            }
        }
    }

    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config": cfg,
        "wall_time_secs": started.elapsed().as_secs_f64(),
        "timestamp_unix": SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    write(
        &out_dir,
        "manifest.json",
        &serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

fn probe_writable(dir: &Path) -> anyhow::Result<()> {
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"ok")
        .map_err(|e| Error::Config(format!("output dir {} not writable: {e}", dir.display())))?;
    let _ = std::fs::remove_file(&probe);
    Ok(())
}

fn write(dir: &Path, name: &str, content: &str) -> anyhow::Result<()> {
    std::fs::write(dir.join(name), content)?;
    Ok(())
}
