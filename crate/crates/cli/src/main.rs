//! Batch simulation command line: validate scenarios, execute runs,
//! compute metrics and emit static plots.
//!
//! Exit codes: 0 success, 2 validation failure, 1 any other error.

mod log_reader;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use subsim_core::sim_engine::{self, LogMode, Scenario, ScenarioConfig, ScenarioError};

#[derive(Parser)]
#[command(
    name = "subsim",
    about = "Deterministic 6DoF submarine simulator with guidance, autopilot and adaptive augmentation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a scenario file and everything it references.
    Validate { scenario: PathBuf },
    /// Run one scenario, writing log.csv, metrics.json and manifest.json.
    Run {
        scenario: PathBuf,
        /// Output directory (default: $SUBSIM_OUT_DIR or ./out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Force the adaptive augmentation on or off.
        #[arg(long)]
        l1: Option<Toggle>,
    },
    /// Run several scenarios concurrently.
    Batch {
        scenarios: Vec<PathBuf>,
        /// Output root (per-run subdirectories by scenario name).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker count (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Recompute summary metrics from a log CSV.
    Metrics {
        log: PathBuf,
        /// Guidance mode of the run; auto infers from the log channels.
        #[arg(long, default_value = "auto")]
        mode: ModeArg,
        /// Plane magnitude limit used for the saturation duty [deg].
        #[arg(long, default_value_t = 30.0)]
        delta_max_deg: f64,
    },
    /// Emit SVG figures from a log CSV.
    Plot {
        log: PathBuf,
        /// Comma-separated channel sets.
        #[arg(long, default_value = "depth,planes,track,error")]
        channels: String,
        /// Output directory (default: alongside the log).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Setpoint,
    PathFollowing,
    TrajectoryTracking,
}

const PLOT_CHANNELS: &[&str] = &[
    "depth",
    "planes",
    "track",
    "error",
    "gamma-rate",
    "heading",
    "speed",
];

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Validation(issues)) => {
            for issue in &issues {
                eprintln!("error: {issue}");
            }
            eprintln!("validation failed with {} issue(s)", issues.len());
            ExitCode::from(2)
        }
        Err(AppError::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

enum AppError {
    Validation(Vec<sim_engine::ValidationIssue>),
    Other(String),
}

impl From<ScenarioError> for AppError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Validation(issues) => AppError::Validation(issues),
            other => AppError::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Other(e.to_string())
    }
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Validate { scenario } => {
            let loaded = Scenario::load(&scenario)?;
            println!(
                "ok: scenario '{}' valid ({} steps at dt = {} s)",
                loaded.config.name,
                (loaded.duration / loaded.dt).round() as usize,
                loaded.dt
            );
            Ok(())
        }
        Command::Run {
            scenario,
            out,
            seed,
            l1,
        } => {
            let summary = run_one(&scenario, out.as_deref(), seed, l1)?;
            println!("{}: ok {summary}", scenario.display());
            Ok(())
        }
        Command::Batch {
            scenarios,
            out,
            jobs,
        } => {
            if scenarios.is_empty() {
                return Err(AppError::Other("batch needs at least one scenario".into()));
            }
            if let Some(n) = jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| AppError::Other(e.to_string()))?;
            }
            let root = out
                .or_else(|| std::env::var_os("SUBSIM_OUT_DIR").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            use rayon::prelude::*;
            let results: Vec<(PathBuf, Result<String, String>)> = scenarios
                .par_iter()
                .map(|path| {
                    let stem = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().to_string())
                        .unwrap_or_else(|| "run".into());
                    let out_dir = root.join(stem);
                    let res = run_one(path, Some(&out_dir), None, None).map_err(|e| match e {
                        AppError::Validation(issues) => issues
                            .iter()
                            .map(|i| i.to_string())
                            .collect::<Vec<_>>()
                            .join("; "),
                        AppError::Other(m) => m,
                    });
                    (path.clone(), res)
                })
                .collect();
            let mut failed = 0;
            for (path, res) in &results {
                match res {
                    Ok(summary) => println!("{}: ok {summary}", path.display()),
                    Err(msg) => {
                        failed += 1;
                        println!("{}: FAILED {msg}", path.display());
                    }
                }
            }
            if failed > 0 {
                return Err(AppError::Other(format!("{failed} run(s) failed")));
            }
            Ok(())
        }
        Command::Metrics {
            log,
            mode,
            delta_max_deg,
        } => {
            let parsed = log_reader::read_csv(&log).map_err(AppError::Other)?;
            let mode = resolve_mode(mode, &parsed);
            let m = sim_engine::metrics(&parsed, mode, delta_max_deg.to_radians());
            let text = serde_json::to_string_pretty(&m).expect("serializable");
            print_ignoring_closed_pipe(&text);
            Ok(())
        }
        Command::Plot { log, channels, out } => {
            let parsed = log_reader::read_csv(&log).map_err(AppError::Other)?;
            if parsed.records.is_empty() {
                return Err(AppError::Other("log has no rows; nothing to plot".into()));
            }
            let requested: Vec<String> = channels
                .split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect();
            for c in &requested {
                if !PLOT_CHANNELS.contains(&c.as_str()) {
                    return Err(AppError::Other(format!(
                        "unknown channel '{c}'; available: {}",
                        PLOT_CHANNELS.join(", ")
                    )));
                }
            }
            let out_dir = out.unwrap_or_else(|| {
                log.parent()
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            std::fs::create_dir_all(&out_dir)?;
            let hash = read_manifest_hash(&log);
            for c in &requested {
                let fig = build_figure(c, &parsed);
                let file = out_dir.join(format!("{c}.svg"));
                std::fs::write(&file, fig.render(hash.as_deref()))?;
                println!("wrote {}", file.display());
            }
            Ok(())
        }
    }
}

/// Large stdout writes tolerate a consumer that stopped reading (head,
/// early-terminated pipelines).
fn print_ignoring_closed_pipe(text: &str) {
    use std::io::Write;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let _ = writeln!(lock, "{text}");
}

/// Output precedence: --out flag, then the scenario's own output_dir,
/// then $SUBSIM_OUT_DIR, then ./out/<scenario-stem>.
fn resolve_out_dir(
    flag: Option<&Path>,
    config_dir: Option<&str>,
    scenario: &Path,
) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(dir) = config_dir {
        return PathBuf::from(dir);
    }
    if let Some(env) = std::env::var_os("SUBSIM_OUT_DIR") {
        return PathBuf::from(env);
    }
    let stem = scenario
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "run".into());
    PathBuf::from("out").join(stem)
}

fn run_one(
    scenario_path: &Path,
    out_flag: Option<&Path>,
    seed: Option<u64>,
    l1: Option<Toggle>,
) -> Result<String, AppError> {
    let text = std::fs::read_to_string(scenario_path)?;
    let mut config: ScenarioConfig =
        serde_json::from_str(&text).map_err(|e| AppError::Other(format!("scenario JSON: {e}")))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    match l1 {
        Some(Toggle::Off) => {
            if let Some(spec) = config.l1.as_mut() {
                spec.enabled = false;
            }
        }
        Some(Toggle::On) => match config.l1.as_mut() {
            Some(spec) => spec.enabled = true,
            None => {
                return Err(AppError::Other(
                    "--l1 on requires an l1 block in the scenario".into(),
                ))
            }
        },
        None => {}
    }
    let base = scenario_path.parent().unwrap_or(Path::new("."));
    let out_dir = resolve_out_dir(out_flag, config.output_dir.as_deref(), scenario_path);
    let out_dir = out_dir.as_path();
    let scenario =
        Scenario::from_config(config.clone(), base, &scenario_path.display().to_string())?;

    let log = sim_engine::run(&scenario).map_err(|e| AppError::Other(e.to_string()))?;
    let metrics = sim_engine::metrics(&log, scenario.log_mode(), scenario.limits.delta_max);

    std::fs::create_dir_all(out_dir)?;
    let log_path = out_dir.join("log.csv");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&log_path)?);
    log.write_csv(&mut file)?;
    drop(file);
    std::fs::write(
        out_dir.join("metrics.json"),
        serde_json::to_string_pretty(&metrics).expect("serializable"),
    )?;

    let effective = serde_json::to_string(&config).expect("serializable");
    let mut hasher = Sha256::new();
    hasher.update(effective.as_bytes());
    hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
    let digest = hasher.finalize();
    let hash_hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let manifest = serde_json::json!({
        "scenario_name": config.name,
        "config_sha256": hash_hex,
        "version": env!("CARGO_PKG_VERSION"),
        "rows": log.records.len(),
        "effective_config": config,
    });
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("serializable"),
    )?;

    Ok(format!(
        "(rows {}, depth rms {:.3} m, out {})",
        log.records.len(),
        metrics.depth_error_rms,
        out_dir.display()
    ))
}

fn resolve_mode(arg: ModeArg, log: &sim_engine::TimeSeriesLog) -> LogMode {
    match arg {
        ModeArg::Setpoint => LogMode::Setpoint,
        ModeArg::PathFollowing => LogMode::PathFollowing {
            domain_end_known: false,
        },
        ModeArg::TrajectoryTracking => LogMode::TrajectoryTracking,
        ModeArg::Auto => {
            let any_vc = log.records.iter().any(|r| r.v_c != 0.0);
            let any_gamma = log.records.iter().any(|r| r.gamma_rate != 0.0);
            if any_vc {
                LogMode::TrajectoryTracking
            } else if any_gamma {
                LogMode::PathFollowing {
                    domain_end_known: false,
                }
            } else {
                LogMode::Setpoint
            }
        }
    }
}

fn read_manifest_hash(log_path: &Path) -> Option<String> {
    let manifest = log_path.parent()?.join("manifest.json");
    let text = std::fs::read_to_string(manifest).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    value["config_sha256"].as_str().map(|s| s.to_string())
}

fn build_figure(channel: &str, log: &sim_engine::TimeSeriesLog) -> plot::Figure {
    let t: Vec<f64> = log.records.iter().map(|r| r.t).collect();
    let series_t = |label: &str, values: Vec<f64>| plot::Series {
        label: label.to_string(),
        points: t.iter().copied().zip(values).collect(),
    };
    match channel {
        "depth" => plot::Figure {
            title: "Depth".into(),
            x_label: "t [s]".into(),
            y_label: "z [m]".into(),
            series: vec![
                series_t("z", log.records.iter().map(|r| r.state.position.z).collect()),
                series_t("z_c", log.records.iter().map(|r| r.z_c).collect()),
                series_t("z_ad", log.records.iter().map(|r| r.z_ad).collect()),
            ],
            square: false,
        },
        "planes" => plot::Figure {
            title: "Control planes".into(),
            x_label: "t [s]".into(),
            y_label: "deflection [rad]".into(),
            series: (0..5)
                .map(|i| {
                    series_t(
                        &format!("delta_{}", i + 1),
                        log.records.iter().map(|r| r.deltas[i]).collect(),
                    )
                })
                .collect(),
            square: false,
        },
        "track" => plot::Figure {
            title: "Horizontal track".into(),
            x_label: "x [m]".into(),
            y_label: "y [m]".into(),
            series: vec![plot::Series {
                label: "track".into(),
                points: log
                    .records
                    .iter()
                    .map(|r| (r.state.position.x, r.state.position.y))
                    .collect(),
            }],
            square: true,
        },
        "error" => plot::Figure {
            title: "Horizontal guidance error".into(),
            x_label: "t [s]".into(),
            y_label: "error [m]".into(),
            series: vec![series_t(
                "|e|",
                log.records
                    .iter()
                    .map(|r| (r.err[0] * r.err[0] + r.err[1] * r.err[1]).sqrt())
                    .collect(),
            )],
            square: false,
        },
        "gamma-rate" => plot::Figure {
            title: "Virtual-time rate".into(),
            x_label: "t [s]".into(),
            y_label: "gamma rate [1/s]".into(),
            series: vec![series_t(
                "gamma_rate",
                log.records.iter().map(|r| r.gamma_rate).collect(),
            )],
            square: false,
        },
        "heading" => plot::Figure {
            title: "Heading".into(),
            x_label: "t [s]".into(),
            y_label: "psi [rad]".into(),
            series: vec![
                series_t("psi", log.records.iter().map(|r| r.state.attitude.z).collect()),
                series_t(
                    "psi_c",
                    log.records
                        .iter()
                        .map(|r| subsim_core::autopilot::wrap_angle(r.psi_c))
                        .collect(),
                ),
            ],
            square: false,
        },
        "speed" => plot::Figure {
            title: "Speed".into(),
            x_label: "t [s]".into(),
            y_label: "[m/s]".into(),
            series: vec![
                series_t("u", log.records.iter().map(|r| r.state.velocity[0]).collect()),
                series_t("v_c", log.records.iter().map(|r| r.v_c).collect()),
            ],
            square: false,
        },
        other => unreachable!("channel {other} validated earlier"),
    }
}
