use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use cmm_core::dataset::DatasetSpec;
use cmm_core::error::{ConfigError, Error};
use cmm_core::geometry::Pose2D;
use cmm_core::orchestrator::{self, RunConfig};
use cmm_core::protocol::{encode, encode_payload};
use cmm_core::scenario::ScenarioConfig;

#[derive(Parser)]
#[command(name = "cmm", version, about = "Roadside-LiDAR mirror co-simulation")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the lockstep case study described by a run config.
    Run {
        config: PathBuf,
        /// Write artifacts here instead of a timestamped directory.
        #[arg(long)]
        run_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ticks: Option<u64>,
        /// Also run the delay and drop sweeps.
        #[arg(long)]
        sweep: bool,
    },
    /// Score detection files against label files.
    Eval {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// IoU thresholds.
        #[arg(long = "iou", default_values_t = [0.5, 0.75])]
        iou: Vec<f64>,
        /// CSV report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record a KITTI-style dataset.
    Dataset {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// TOML file with dataset settings; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        frames: Option<u64>,
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long)]
        record_hz: Option<u32>,
        #[arg(long)]
        split: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write reference detector output to det_2/.
        #[arg(long)]
        with_detections: bool,
    },
    /// Write the golden wire fixture, or decode a captured byte stream.
    ProtoDump {
        /// Decode this file and print its frames as JSON lines.
        #[arg(long)]
        decode: Option<PathBuf>,
        /// Where to write the framed fixture (default: hex on stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mirror process for two-process runs.
    #[command(hide = true)]
    Mirror {
        #[arg(long, default_value = "127.0.0.1:0")]
        listen: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "rsu-0")]
        sensor_id: String,
        /// Sensor pose in the world as x,y,yaw.
        #[arg(long, default_value = "0,0,0")]
        pose: String,
        #[arg(long, default_value_t = 10.0)]
        timeout_s: f64,
    },
}

fn parse_pose(text: &str) -> Result<Pose2D, ConfigError> {
    let v: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| ConfigError::invalid("pose", e.to_string()))?;
    match v.as_slice() {
        [x, y, yaw] => Ok(Pose2D::new(*x, *y, *yaw)),
        _ => Err(ConfigError::invalid("pose", "expected x,y,yaw")),
    }
}

fn load_dataset_spec(path: &Path) -> Result<DatasetSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Cmd::Run {
            config,
            run_dir,
            seed,
            ticks,
            sweep,
        } => {
            let mut resolved = RunConfig::load(&config)?;
            let mut cfg = resolved.config.clone();
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = ticks {
                cfg.duration_ticks = t;
            }
            cfg.sweep |= sweep;
            resolved = cfg.resolve(resolved.scenario)?;
            let dir = run_dir
                .unwrap_or_else(|| orchestrator::timestamped_run_dir(&resolved.config.output_dir));
            let exe = std::env::current_exe().map_err(|e| Error::io("<current exe>", e))?;
            let outcome = orchestrator::cmd_run(&resolved, &dir, Some(&exe))?;
            print!("{}", outcome.to_table());
            println!("artifacts: {}", outcome.run_dir.display());
        }
        Cmd::Eval {
            detections,
            labels,
            iou,
            out,
        } => {
            let reports = orchestrator::cmd_eval(&detections, &labels, &iou)?;
            for r in &reports {
                println!("{}", r.to_table());
            }
            if let Some(path) = out {
                orchestrator::write_eval_csv(&reports, &path)?;
            }
        }
        Cmd::Dataset {
            scenario,
            out,
            config,
            frames,
            ticks,
            record_hz,
            split,
            seed,
            with_detections,
        } => {
            let mut spec = match config {
                Some(p) => load_dataset_spec(&p)?,
                None => DatasetSpec::default(),
            };
            spec.out_dir = out;
            spec.n_frames = frames.unwrap_or(spec.n_frames);
            spec.ticks = ticks.or(spec.ticks);
            spec.record_hz = record_hz.unwrap_or(spec.record_hz);
            spec.split = split.unwrap_or(spec.split);
            spec.seed = seed.unwrap_or(spec.seed);
            spec.with_detections |= with_detections;
            let scenario = ScenarioConfig::load(&scenario)?;
            let manifest = orchestrator::cmd_dataset(&scenario, &spec)?;
            println!(
                "wrote {} frames ({} train, {} val) to {}",
                manifest.frames.len(),
                manifest.train.len(),
                manifest.val.len(),
                spec.out_dir.display()
            );
        }
        Cmd::ProtoDump { decode, out } => match decode {
            Some(path) => {
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                for item in orchestrator::decode_stream(&bytes) {
                    match item {
                        Ok(frame) => {
                            println!("{}", String::from_utf8_lossy(&encode_payload(&frame)))
                        }
                        Err(e) => eprintln!("malformed message: {e}"),
                    }
                }
            }
            None => {
                let bytes = encode(&orchestrator::golden_frame());
                match out {
                    Some(path) => std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?,
                    None => println!("{}", hex(&bytes)),
                }
            }
        },
        Cmd::Mirror {
            listen,
            out,
            sensor_id,
            pose,
            timeout_s,
        } => {
            let pose = parse_pose(&pose)?;
            if timeout_s.is_nan() || timeout_s <= 0.0 {
                return Err(ConfigError::invalid("timeout_s", "must be > 0").into());
            }
            let summary = orchestrator::cmd_mirror(
                &listen,
                &out,
                &sensor_id,
                pose,
                Duration::from_secs_f64(timeout_s),
            )?;
            log::info!("mirror received {} frames", summary.frames);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
