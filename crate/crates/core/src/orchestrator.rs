//! Run configuration and the `cmm` subcommands: the lockstep case study
//! (single process, or with the mirror in a child process), detection
//! evaluation, dataset recording and wire fixtures.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cacc::{self, PipelineConfig, Scheme, SchemeRun, SweepPoint};
use crate::dataset::{self, DatasetSpec, Manifest};
use crate::error::{ConfigError, Error, TransportError};
use crate::geometry::Pose2D;
use crate::lidar::{scan, LidarConfig};
use crate::mirror::MirrorRegistry;
use crate::perception::{
    evaluate_frames, make_detector, DetectorKind, DetectorParams, EvalReport, FrameResult,
    Geofence, PerceptionInput,
};
use crate::protocol::{
    encode, ChannelConfig, ChannelStats, Incoming, PerceptionFrame, SocketReceiver, SocketSender,
    WireObject,
};
use crate::scenario::{
    ground_truth_objects, ground_truth_rows, init_scenario, ObjectClass, ScenarioConfig,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// One thread, in-memory channel, bit-reproducible.
    #[default]
    SingleProcess,
    /// Mirror in a child process behind a TCP socket.
    TwoProcess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: RunMode,
    /// Scenario file, relative to the run config's directory.
    pub scenario: PathBuf,
    pub schemes: Vec<Scheme>,
    pub duration_ticks: u64,
    /// Overrides the scenario seed and seeds the LiDAR noise and the channel.
    pub seed: u64,
    /// Parent of the per-run directories.
    pub output_dir: PathBuf,
    /// Also run the delay and drop sweeps under AP.
    pub sweep: bool,
    pub follower_id: u32,
    pub sensor_id: String,
    /// Listen address of the mirror process in two-process mode.
    pub mirror_addr: String,
    /// How long either side waits for the other [s].
    pub peer_timeout_s: f64,
    pub lidar: LidarConfig,
    pub geofence: Geofence,
    pub detector: DetectorKind,
    pub detector_params: DetectorParams,
    pub channel: ChannelConfig,
    pub estimator: cacc::EstimatorParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        RunConfig {
            mode: RunMode::SingleProcess,
            scenario: PathBuf::new(),
            schemes: Scheme::ALL.to_vec(),
            duration_ticks: p.duration_ticks,
            seed: p.seed,
            output_dir: PathBuf::from("runs"),
            sweep: false,
            follower_id: p.follower_id,
            sensor_id: p.sensor_id,
            mirror_addr: "127.0.0.1:0".into(),
            peer_timeout_s: 10.0,
            lidar: p.lidar,
            geofence: p.geofence,
            detector: p.detector,
            detector_params: p.detector_params,
            channel: p.channel,
            estimator: p.estimator,
        }
    }
}

/// A run config with its scenario loaded.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub scenario: ScenarioConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_path_buf(),
            source,
        })
    }

    /// Parse `path` and load the scenario it names.
    pub fn load(path: &Path) -> Result<ResolvedRun, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml_str(&text, path)?;
        if config.scenario.as_os_str().is_empty() {
            return Err(ConfigError::invalid(
                "scenario",
                "a scenario file is required",
            ));
        }
        if config.scenario.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            config.scenario = base.join(&config.scenario);
        }
        let scenario = ScenarioConfig::load(&config.scenario)?;
        config.resolve(scenario)
    }

    /// Validate against an already loaded scenario.
    pub fn resolve(self, mut scenario: ScenarioConfig) -> Result<ResolvedRun, ConfigError> {
        if self.duration_ticks == 0 {
            return Err(ConfigError::invalid("duration_ticks", "must be > 0"));
        }
        if self.schemes.is_empty() {
            return Err(ConfigError::invalid(
                "schemes",
                "at least one scheme is required",
            ));
        }
        if !(self.peer_timeout_s > 0.0) {
            return Err(ConfigError::invalid("peer_timeout_s", "must be > 0"));
        }
        scenario.seed = self.seed;
        self.pipeline().validate()?;
        Ok(ResolvedRun {
            config: self,
            scenario,
        })
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            follower_id: self.follower_id,
            sensor_id: self.sensor_id.clone(),
            duration_ticks: self.duration_ticks,
            seed: self.seed,
            lidar: self.lidar,
            geofence: self.geofence,
            detector: self.detector,
            detector_params: self.detector_params,
            channel: ChannelConfig {
                seed: self.seed,
                ..self.channel
            },
            estimator: self.estimator,
        }
    }
}

/// `run-<UTC timestamp>` under `parent`.
pub fn timestamped_run_dir(parent: &Path) -> PathBuf {
    parent.join(format!(
        "run-{}",
        chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ")
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub ticks: usize,
    pub misses: usize,
    pub tv_velocity: f64,
    pub tv_accel: f64,
    pub mean_speed: f64,
    pub min_gap: Option<f64>,
    pub collisions: usize,
    pub sent: u64,
    pub dropped: u64,
    pub delivered: u64,
}

impl SummaryRow {
    fn from_run(run: &SchemeRun) -> Self {
        let rows = &run.log.rows;
        let accel: Vec<f64> = rows.iter().map(|r| r.a).collect();
        let mean_speed = if rows.is_empty() {
            0.0
        } else {
            rows.iter().map(|r| r.v).sum::<f64>() / rows.len() as f64
        };
        SummaryRow {
            scheme: run.scheme,
            ticks: rows.len(),
            misses: run.log.misses(),
            tv_velocity: cacc::total_variation(&run.log.speeds()),
            tv_accel: cacc::total_variation(&accel),
            mean_speed,
            min_gap: rows.iter().filter_map(|r| r.gap).min_by(f64::total_cmp),
            collisions: run.events.iter().filter(|e| e.kind == "collision").count(),
            sent: run.stats.sent,
            dropped: run.stats.dropped,
            delivered: run.stats.delivered,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub summary: Vec<SummaryRow>,
    pub sweep: Vec<SweepPoint>,
    pub two_process: Option<TwoProcessReport>,
}

impl RunOutcome {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        if !self.summary.is_empty() {
            s.push_str(&format!(
                "{:<6} {:>6} {:>7} {:>10} {:>10} {:>9} {:>8}\n",
                "scheme", "ticks", "misses", "TV(v)", "TV(a)", "min gap", "dropped"
            ));
            for r in &self.summary {
                let gap = r.min_gap.map_or("-".to_owned(), |g| format!("{g:.2}"));
                s.push_str(&format!(
                    "{:<6} {:>6} {:>7} {:>10.3} {:>10.3} {:>9} {:>8}\n",
                    r.scheme.as_str(),
                    r.ticks,
                    r.misses,
                    r.tv_velocity,
                    r.tv_accel,
                    gap,
                    r.dropped
                ));
            }
        }
        for p in &self.sweep {
            s.push_str(&format!(
                "sweep {:<5} {:>7} TV(v) {:.3} misses {}\n",
                p.sweep, p.value, p.tv_velocity, p.misses
            ));
        }
        if let Some(t) = &self.two_process {
            s.push_str(&format!(
                "two-process: sent {} dropped {} lost {} mirror snapshots {}\n",
                t.stats.sent, t.stats.dropped, t.stats.lost, t.mirror_snapshots
            ));
        }
        s
    }
}

struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<String>,
}

impl ArtifactWriter {
    fn new(dir: &Path) -> Result<Self, Error> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn create(&mut self, rel: &str) -> Result<BufWriter<File>, Error> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.files.push(rel.to_owned());
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Error::io(&path, e))
    }

    fn csv_rows<T: Serialize>(
        &mut self,
        rel: &str,
        header: &[&str],
        rows: &[T],
    ) -> Result<(), Error> {
        let mut wr = csv::WriterBuilder::new()
            .has_headers(!rows.is_empty())
            .from_writer(self.create(rel)?);
        if rows.is_empty() {
            wr.write_record(header)?;
        }
        for r in rows {
            wr.serialize(r)?;
        }
        wr.flush().map_err(|e| Error::io(self.dir.join(rel), e))
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'a str,
    mode: RunMode,
    seed: u64,
    config: &'a RunConfig,
    scenario: &'a ScenarioConfig,
    files: &'a [String],
}

/// Execute a resolved run into `run_dir`. `mirror_exe` is the `cmm` binary
/// to launch as the mirror process in two-process mode.
pub fn cmd_run(
    run: &ResolvedRun,
    run_dir: &Path,
    mirror_exe: Option<&Path>,
) -> Result<RunOutcome, Error> {
    let mut out = ArtifactWriter::new(run_dir)?;
    let cfg = &run.config;
    let outcome = match cfg.mode {
        RunMode::SingleProcess => run_single(run, &mut out)?,
        RunMode::TwoProcess => {
            let exe = mirror_exe.ok_or_else(|| {
                Error::Config(ConfigError::invalid(
                    "mode",
                    "two-process mode needs the cmm executable",
                ))
            })?;
            run_two_process(run, &mut out, exe)?
        }
    };
    let mut files = out.files.clone();
    files.push("run_manifest.json".into());
    files.sort();
    let manifest = RunManifest {
        version: VERSION,
        mode: cfg.mode,
        seed: cfg.seed,
        config: cfg,
        scenario: &run.scenario,
        files: &files,
    };
    let mut w = out.create("run_manifest.json")?;
    serde_json::to_writer_pretty(&mut w, &manifest).expect("manifest serializes");
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(run_dir.join("run_manifest.json"), e))?;
    Ok(RunOutcome {
        run_dir: run_dir.to_path_buf(),
        ..outcome
    })
}

const TRAJECTORY_HEADER: &[&str] = &[
    "t", "scheme", "x", "v", "a", "status", "estimate", "leader_x", "leader_v", "gap",
];
const GROUND_TRUTH_HEADER: &[&str] = &["tick", "id", "class", "x", "y", "yaw", "v", "a"];
const EVENTS_HEADER: &[&str] = &["tick", "scheme", "kind", "detail"];

fn run_single(run: &ResolvedRun, out: &mut ArtifactWriter) -> Result<RunOutcome, Error> {
    let cfg = &run.config;
    let pipeline = cfg.pipeline();
    let runs = cacc::run_case_study(&run.scenario, &pipeline, &cfg.schemes)?;
    for r in &runs {
        let dir = r.scheme.as_str();
        out.csv_rows(
            &format!("{dir}/trajectory.csv"),
            TRAJECTORY_HEADER,
            &r.log.rows,
        )?;
        out.csv_rows(
            &format!("{dir}/ground_truth.csv"),
            GROUND_TRUTH_HEADER,
            &r.ground_truth,
        )?;
        out.csv_rows(&format!("{dir}/events.csv"), EVENTS_HEADER, &r.events)?;
        let rel = format!("{dir}/channel_stats.csv");
        r.stats.write_csv(out.create(&rel)?)?;
        let rel = format!("{dir}/mirror_snapshots.jsonl");
        let mut w = out.create(&rel)?;
        for snap in &r.snapshots {
            snap.write_jsonl(&mut w)
                .map_err(|e| Error::io(out.dir.join(&rel), e))?;
        }
        w.flush().map_err(|e| Error::io(out.dir.join(&rel), e))?;
    }
    write_plot_data(out, &runs)?;
    let summary: Vec<SummaryRow> = runs.iter().map(SummaryRow::from_run).collect();
    out.csv_rows("summary.csv", &[], &summary)?;
    let sweep = if cfg.sweep {
        let points = cacc::run_sweep(&run.scenario, &pipeline, Scheme::Ap)?;
        out.csv_rows("sweep.csv", &[], &points)?;
        points
    } else {
        Vec::new()
    };
    Ok(RunOutcome {
        run_dir: out.dir.clone(),
        summary,
        sweep,
        two_process: None,
    })
}

/// Location, velocity and acceleration of every scheme aligned on time.
fn write_plot_data(out: &mut ArtifactWriter, runs: &[SchemeRun]) -> Result<(), Error> {
    let mut wr = csv::Writer::from_writer(out.create("plot_data.csv")?);
    let mut header = vec!["t".to_owned()];
    for r in runs {
        for col in ["x", "v", "a", "status"] {
            header.push(format!("{col}_{}", r.scheme));
        }
    }
    if let Some(first) = runs.first() {
        if first.log.rows.iter().any(|r| r.leader_x.is_some()) {
            header.push("leader_x".into());
        }
    }
    wr.write_record(&header)?;
    let with_leader = header.last().is_some_and(|h| h == "leader_x");
    let n = runs.iter().map(|r| r.log.rows.len()).max().unwrap_or(0);
    for k in 0..n {
        let t = runs
            .iter()
            .find_map(|r| r.log.rows.get(k))
            .map_or(0.0, |r| r.t);
        let mut rec = vec![format!("{t:.1}")];
        for r in runs {
            match r.log.rows.get(k) {
                Some(row) => {
                    rec.extend([
                        row.x.to_string(),
                        row.v.to_string(),
                        row.a.to_string(),
                        row.status.to_owned(),
                    ]);
                }
                None => rec.extend(std::iter::repeat(String::new()).take(4)),
            }
        }
        if with_leader {
            rec.push(
                runs[0]
                    .log
                    .rows
                    .get(k)
                    .and_then(|r| r.leader_x)
                    .map_or(String::new(), |x| x.to_string()),
            );
        }
        wr.write_record(&rec)?;
    }
    wr.flush()
        .map_err(|e| Error::io(out.dir.join("plot_data.csv"), e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorSummary {
    pub frames: u64,
    pub accepted: u64,
    pub stale: u64,
    pub malformed: u64,
    pub reconnects: u64,
    pub end_of_stream: bool,
}

#[derive(Debug, Clone)]
pub struct TwoProcessReport {
    pub stats: ChannelStats,
    pub mirror_snapshots: u64,
    pub mirror: MirrorSummary,
}

struct ChildGuard(Child);

impl Drop for ChildGuard {
    fn drop(&mut self) {
        if matches!(self.0.try_wait(), Ok(None)) {
            let _ = self.0.kill();
            let _ = self.0.wait();
        }
    }
}

/// Real-world side in this process, mirror in a child. The follower cannot
/// be closed over the socket in lockstep, so it drives on ground truth here
/// (the IP scheme) and the mirror only records what it receives.
fn run_two_process(
    run: &ResolvedRun,
    out: &mut ArtifactWriter,
    exe: &Path,
) -> Result<RunOutcome, Error> {
    let cfg = &run.config;
    let pipeline = cfg.pipeline();
    let mirror_dir = out.dir.join("mirror");
    let pose = cfg.lidar.pose;
    let mut child = ChildGuard(
        Command::new(exe)
            .arg("mirror")
            .args(["--listen", &cfg.mirror_addr])
            .arg("--out")
            .arg(&mirror_dir)
            .args(["--sensor-id", &cfg.sensor_id])
            .arg(format!("--pose={},{},{}", pose.x, pose.y, pose.yaw))
            .args(["--timeout-s", &cfg.peer_timeout_s.to_string()])
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| {
                TransportError::Peer(format!(
                    "cannot start mirror process {}: {e}",
                    exe.display()
                ))
            })?,
    );
    let stdout = child.0.stdout.take().expect("child stdout is piped");
    let mut line = String::new();
    BufReader::new(stdout)
        .read_line(&mut line)
        .map_err(|e| TransportError::Peer(format!("mirror process output: {e}")))?;
    let addr = line
        .trim()
        .strip_prefix("LISTENING ")
        .ok_or_else(|| {
            TransportError::Peer(format!(
                "mirror process did not report an address (got {:?})",
                line.trim()
            ))
        })?
        .to_owned();

    let (scenario, mut state) = init_scenario(run.scenario.clone())?;
    let mount = cfg.lidar.mount();
    let detector = make_detector(cfg.detector, cfg.detector_params);
    let mut sender = SocketSender::connect(&addr, pipeline.channel)?;
    let mut ground_truth = Vec::new();
    for _ in 0..cfg.duration_ticks {
        let now = state.sim_time_ms();
        ground_truth.extend(ground_truth_rows(&state));
        let cloud = cfg.geofence.apply(&scan(&state, &cfg.lidar, cfg.seed));
        let labels = ground_truth_objects(&state, &mount, &cfg.geofence);
        let dets = detector.detect(&PerceptionInput {
            cloud: &cloud,
            ground_truth: &labels,
        });
        let frame = PerceptionFrame::from_detections(state.tick, now, &cfg.sensor_id, &dets);
        sender.send(encode(&frame), state.tick, now);
        sender.pump(now)?;
        let mut commands = BTreeMap::new();
        if let Some(fv) = state.agent(cfg.follower_id) {
            let lead = state.leader_of(fv.id);
            let cmd = match lead {
                Some((l, gap)) => {
                    crate::scenario::idm_acceleration(fv.speed, l.speed, gap, scenario.idm())
                }
                None => crate::scenario::idm_acceleration(
                    fv.speed,
                    fv.speed,
                    f64::INFINITY,
                    scenario.idm(),
                ),
            };
            commands.insert(fv.id, cmd.accel);
        }
        state = scenario.step(&state, &commands).state;
    }
    let stats = sender.finish()?;
    let status = child
        .0
        .wait()
        .map_err(|e| TransportError::Peer(format!("waiting for mirror process: {e}")))?;
    if !status.success() {
        return Err(TransportError::Peer(format!("mirror process exited with {status}")).into());
    }
    out.files.push("mirror/mirror_snapshots.jsonl".into());
    out.files.push("mirror/mirror_summary.json".into());
    let summary_path = mirror_dir.join("mirror_summary.json");
    let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    let mirror: MirrorSummary = serde_json::from_str(&text).map_err(|e| {
        TransportError::Peer(format!(
            "bad mirror summary {}: {e}",
            summary_path.display()
        ))
    })?;

    out.csv_rows("ground_truth.csv", GROUND_TRUTH_HEADER, &ground_truth)?;
    stats.write_csv(out.create("channel_stats.csv")?)?;
    let report = TwoProcessReport {
        stats,
        mirror_snapshots: mirror.frames,
        mirror,
    };
    if report.mirror_snapshots != stats.sent - stats.dropped - stats.lost {
        log::warn!(
            "mirror saw {} frames but {} were delivered",
            report.mirror_snapshots,
            stats.sent - stats.dropped - stats.lost
        );
    }
    Ok(RunOutcome {
        run_dir: out.dir.clone(),
        summary: Vec::new(),
        sweep: Vec::new(),
        two_process: Some(report),
    })
}

/// Mirror process: accept one sender, apply every frame, write one
/// snapshot per received frame and a summary. Prints `LISTENING <addr>`
/// on stdout once bound.
pub fn cmd_mirror(
    listen: &str,
    out_dir: &Path,
    sensor_id: &str,
    pose: Pose2D,
    timeout: Duration,
) -> Result<MirrorSummary, Error> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let receiver = SocketReceiver::bind(listen)?;
    let addr = receiver.local_addr()?;
    println!("LISTENING {addr}");
    std::io::stdout()
        .flush()
        .map_err(|e| Error::io("<stdout>", e))?;
    let (rx, handle) = receiver.accept(timeout)?;
    let start = Instant::now();
    let mut registry = MirrorRegistry::new(sensor_id, pose);
    let snap_path = out_dir.join("mirror_snapshots.jsonl");
    let mut w = BufWriter::new(File::create(&snap_path).map_err(|e| Error::io(&snap_path, e))?);
    let mut summary = MirrorSummary {
        frames: 0,
        accepted: 0,
        stale: 0,
        malformed: 0,
        reconnects: 0,
        end_of_stream: false,
    };
    while let Ok(item) = rx.recv_timeout(timeout) {
        match item {
            Incoming::Frame(f) => {
                let now = start.elapsed().as_millis() as u64;
                summary.frames += 1;
                registry.apply_frame(&f, now);
                registry
                    .query_objects(now, None)
                    .write_jsonl(&mut w)
                    .map_err(|e| Error::io(&snap_path, e))?;
            }
            Incoming::Malformed(reason) => {
                log::warn!("skipped malformed message: {reason}");
                summary.malformed += 1;
            }
            Incoming::Closed => summary.reconnects += 1,
            Incoming::End => {
                summary.end_of_stream = true;
                break;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&snap_path, e))?;
    drop(rx);
    let _ = handle.join();
    summary.accepted = registry.accepted_frames();
    summary.stale = registry.stale_frames();
    let path = out_dir.join("mirror_summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    if !summary.end_of_stream {
        return Err(
            TransportError::Peer("sender went away without finishing the stream".into()).into(),
        );
    }
    Ok(summary)
}

/// Evaluate detection files against label files matched by file name.
/// A label file without detections counts as an empty detection set; a
/// detection file without labels is an error.
pub fn cmd_eval(
    detections: &Path,
    labels: &Path,
    thresholds: &[f64],
) -> Result<Vec<EvalReport>, Error> {
    for &t in thresholds {
        if !(t > 0.0 && t <= 1.0) {
            return Err(
                ConfigError::invalid("iou", format!("threshold {t} outside (0, 1]")).into(),
            );
        }
    }
    let list = |dir: &Path| -> Result<BTreeMap<String, PathBuf>, Error> {
        let mut out = BTreeMap::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                let name = path
                    .file_name()
                    .expect("listed file has a name")
                    .to_string_lossy()
                    .into_owned();
                out.insert(name, path);
            }
        }
        Ok(out)
    };
    let label_files = list(labels)?;
    let det_files = list(detections)?;
    if let Some(orphan) = det_files.keys().find(|k| !label_files.contains_key(*k)) {
        return Err(ConfigError::invalid(
            "detections",
            format!(
                "{orphan} has no matching label file in {}",
                labels.display()
            ),
        )
        .into());
    }
    let mut frames = Vec::with_capacity(label_files.len());
    for (name, path) in &label_files {
        let gts = dataset::read_labels(path)?;
        let dets = match det_files.get(name) {
            Some(p) => dataset::read_detections(p)?,
            None => Vec::new(),
        };
        frames.push(FrameResult {
            detections: dets,
            labels: gts,
        });
    }
    Ok(thresholds
        .iter()
        .map(|&t| evaluate_frames(&frames, t))
        .collect())
}

/// All reports in one CSV with a single header.
pub fn write_eval_csv(reports: &[EvalReport], path: &Path) -> Result<(), Error> {
    let mut body = Vec::new();
    for (k, r) in reports.iter().enumerate() {
        let mut buf = Vec::new();
        r.write_csv(&mut buf)?;
        let text = String::from_utf8(buf).expect("csv output is utf-8");
        let skip = if k == 0 {
            0
        } else {
            text.find('\n').map_or(text.len(), |i| i + 1)
        };
        body.extend_from_slice(&text.as_bytes()[skip..]);
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn cmd_dataset(scenario: &ScenarioConfig, spec: &DatasetSpec) -> Result<Manifest, Error> {
    Ok(dataset::record_dataset(scenario, spec)?)
}

/// The frame stored as the wire-format golden fixture.
pub fn golden_frame() -> PerceptionFrame {
    PerceptionFrame {
        frame_id: 42,
        sim_time_ms: 4200,
        sensor_id: "rsu-0".into(),
        objects: vec![
            WireObject {
                cls: ObjectClass::Car,
                x: 12.5,
                y: -9.75,
                l: 4.5,
                w: 1.8,
                yaw: 0.0,
                conf: 0.87,
            },
            WireObject {
                cls: ObjectClass::Truck,
                x: 20.25,
                y: -6.25,
                l: 8.0,
                w: 2.5,
                yaw: std::f32::consts::PI,
                conf: 1.0,
            },
            WireObject {
                cls: ObjectClass::Pedestrian,
                x: 3.0,
                y: 4.5,
                l: 0.6,
                w: 0.6,
                yaw: -std::f32::consts::FRAC_PI_2,
                conf: 0.31,
            },
        ],
    }
}

/// Decode a byte stream of framed messages into frames, stopping at the
/// end-of-stream marker. Malformed messages are reported as errors.
pub fn decode_stream(bytes: &[u8]) -> Vec<Result<PerceptionFrame, crate::error::ProtocolError>> {
    let mut d = crate::protocol::FrameDecoder::new();
    d.push(bytes);
    std::iter::from_fn(|| d.next_frame()).collect()
}
