//! The lockstep loop: world → LiDAR → detection → channel → mirror →
//! estimate → control, one 100 ms tick at a time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    cacc_step, estimate_leader, metrics, EstimatorEvent, EstimatorParams, LeaderEstimate,
    LeaderSource, Scheme, TrajectoryLog, TrajectoryRow,
};
use crate::error::ConfigError;
use crate::lidar::{scan, LidarConfig};
use crate::mirror::{MirrorRegistry, MirrorSnapshot};
use crate::perception::{
    make_detector, Detection, DetectorKind, DetectorParams, Geofence, PerceptionInput,
};
use crate::protocol::{
    encode, ChannelConfig, ChannelStats, DeterministicChannel, FrameDecoder, PerceptionFrame,
};
use crate::scenario::{
    ground_truth_objects, ground_truth_rows, init_scenario, GroundTruthRow, LabeledBox,
    ScenarioConfig, SimEvent, WorldState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Agent id of the CACC follower; it must be externally controlled.
    pub follower_id: u32,
    pub sensor_id: String,
    pub duration_ticks: u64,
    /// Seed for the LiDAR noise streams.
    pub seed: u64,
    pub lidar: LidarConfig,
    pub geofence: Geofence,
    pub detector: DetectorKind,
    pub detector_params: DetectorParams,
    pub channel: ChannelConfig,
    pub estimator: EstimatorParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            follower_id: 2,
            sensor_id: "rsu-0".into(),
            duration_ticks: 200,
            seed: 1,
            lidar: LidarConfig::default(),
            geofence: Geofence::default(),
            detector: DetectorKind::Reference,
            detector_params: DetectorParams::default(),
            channel: ChannelConfig::default(),
            estimator: EstimatorParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.duration_ticks == 0 {
            return Err(ConfigError::invalid("duration_ticks", "must be > 0"));
        }
        self.lidar.validate()?;
        self.geofence.validate()?;
        self.detector_params.validate()?;
        self.channel.validate()?;
        self.estimator.validate()
    }
}

/// What an observer sees at each tick, after the control decision.
pub struct TickView<'a> {
    pub scheme: Scheme,
    pub state: &'a WorldState,
    pub labels: &'a [LabeledBox],
    pub detections: &'a [Detection],
    pub snapshot: &'a MirrorSnapshot,
    pub estimate: &'a LeaderEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRow {
    pub tick: u64,
    pub scheme: Scheme,
    pub kind: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub log: TrajectoryLog,
    pub stats: ChannelStats,
    pub snapshots: Vec<MirrorSnapshot>,
    pub ground_truth: Vec<GroundTruthRow>,
    pub events: Vec<EventRow>,
    pub stale_frames: u64,
    pub decode_errors: u64,
}

/// Run the full loop once under `scheme`, calling `observer` every tick.
pub fn run_scheme(
    scenario_cfg: &ScenarioConfig,
    cfg: &PipelineConfig,
    scheme: Scheme,
    observer: &mut dyn FnMut(&TickView<'_>),
) -> Result<SchemeRun, ConfigError> {
    cfg.validate()?;
    let (scenario, mut state) = init_scenario(scenario_cfg.clone())?;
    let follower = state.agent(cfg.follower_id);
    let lane = match follower {
        Some(fv) => scenario.layout.lane(fv.lane()).clone(),
        None if state.agents.is_empty() => scenario.layout.lanes()[0].clone(),
        None => {
            return Err(ConfigError::invalid(
                "follower_id",
                format!("no agent with id {}", cfg.follower_id),
            ))
        }
    };

    let mount = cfg.lidar.mount();
    let detector = make_detector(cfg.detector, cfg.detector_params);
    let mut channel = DeterministicChannel::<Vec<u8>>::new(cfg.channel);
    let mut decoder = FrameDecoder::new();
    let mut mirror = MirrorRegistry::new(cfg.sensor_id.clone(), mount.pose);
    let mut estimate = LeaderEstimate::absent();

    let mut log = TrajectoryLog::default();
    let mut snapshots = Vec::with_capacity(cfg.duration_ticks as usize);
    let mut ground_truth = Vec::new();
    let mut events = Vec::new();
    let mut event = |tick: u64, kind: &'static str, detail: String| {
        events.push(EventRow {
            tick,
            scheme,
            kind,
            detail,
        })
    };

    for _ in 0..cfg.duration_ticks {
        let now = state.sim_time_ms();
        ground_truth.extend(ground_truth_rows(&state));

        let cloud = cfg.geofence.apply(&scan(&state, &cfg.lidar, cfg.seed));
        let labels = ground_truth_objects(&state, &mount, &cfg.geofence);
        let detections = detector.detect(&PerceptionInput {
            cloud: &cloud,
            ground_truth: &labels,
        });
        let frame = PerceptionFrame::from_detections(state.tick, now, &cfg.sensor_id, &detections);
        channel.send(encode(&frame), state.tick, now);
        for bytes in channel.poll(now) {
            decoder.push(&bytes);
            while let Some(result) = decoder.next_frame() {
                match result {
                    Ok(f) => {
                        mirror.apply_frame(&f, now);
                    }
                    Err(e) => event(state.tick, "decode_error", e.to_string()),
                }
            }
        }
        let snapshot = mirror.query_objects(now, None);

        let mut commands = BTreeMap::new();
        if let Some(fv) = state.agent(cfg.follower_id) {
            let source = match scheme {
                Scheme::Ip => LeaderSource::GroundTruth(&state),
                Scheme::Ap | Scheme::Aps => LeaderSource::Mirror(&snapshot),
            };
            let (next, ev) =
                estimate_leader(scheme, source, fv, &lane, &estimate, now, &cfg.estimator);
            if let Some(EstimatorEvent::HeldExpired { now_ms }) = ev {
                event(
                    state.tick,
                    "held_expired",
                    format!("held leader dropped at {now_ms} ms"),
                );
            }
            estimate = next;
            let cmd = cacc_step(fv, &estimate, scenario.idm());
            if cmd.collision_imminent {
                event(
                    state.tick,
                    "emergency_brake",
                    format!("estimated gap {:?}", super::estimated_gap(fv, &estimate)),
                );
            }
            commands.insert(fv.id, cmd.accel);
        }

        observer(&TickView {
            scheme,
            state: &state,
            labels: &labels,
            detections: &detections,
            snapshot: &snapshot,
            estimate: &estimate,
        });

        let out = scenario.step(&state, &commands);
        for ev in &out.events {
            match ev {
                SimEvent::Spawned { tick, id } => event(*tick, "spawned", format!("agent {id}")),
                SimEvent::Despawned { tick, id } => {
                    event(*tick, "despawned", format!("agent {id}"))
                }
                SimEvent::Collision {
                    tick,
                    follower,
                    leader,
                } => event(
                    *tick,
                    "collision",
                    format!("agent {follower} hit agent {leader}"),
                ),
                SimEvent::CollisionImminent { tick, id } => {
                    event(*tick, "collision_imminent", format!("agent {id}"))
                }
            }
        }
        if let Some(fv) = state.agent(cfg.follower_id) {
            let truth = state.leader_of(fv.id);
            let a = out.state.agent(fv.id).map_or(0.0, |n| n.accel);
            log.rows.push(TrajectoryRow {
                t: state.sim_time,
                scheme,
                x: fv.s,
                v: fv.speed,
                a,
                status: if estimate.is_hit() { "hit" } else { "miss" },
                estimate: estimate.status.as_str(),
                leader_x: truth.map(|(l, _)| l.s),
                leader_v: truth.map(|(l, _)| l.speed),
                gap: truth.map(|(_, g)| g),
            });
        }
        snapshots.push(snapshot);
        state = out.state;
    }

    let decode_errors = decoder.errors();
    Ok(SchemeRun {
        scheme,
        log,
        stats: *channel.stats(),
        snapshots,
        ground_truth,
        events,
        stale_frames: mirror.stale_frames(),
        decode_errors,
    })
}

/// One run per scheme with identical seeds, in parallel.
pub fn run_case_study(
    scenario_cfg: &ScenarioConfig,
    cfg: &PipelineConfig,
    schemes: &[Scheme],
) -> Result<Vec<SchemeRun>, ConfigError> {
    run_parallel(
        schemes
            .iter()
            .map(|&s| (scenario_cfg, cfg.clone(), s))
            .collect(),
    )
}

fn run_parallel(
    jobs: Vec<(&ScenarioConfig, PipelineConfig, Scheme)>,
) -> Result<Vec<SchemeRun>, ConfigError> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|(sc, cfg, scheme)| scope.spawn(move || run_scheme(sc, &cfg, scheme, &mut |_| {})))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("pipeline thread panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    /// `delay` or `drop`.
    pub sweep: &'static str,
    /// Delay [ms] or drop threshold.
    pub value: f64,
    pub scheme: Scheme,
    pub tv_velocity: f64,
    pub tv_accel: f64,
    pub misses: usize,
    pub sent: u64,
    pub dropped: u64,
}

pub const SWEEP_DELAYS_MS: [f64; 3] = [0.0, 100.0, 200.0];
pub const SWEEP_DROPS: [f64; 3] = [0.0, 0.05, 0.10];

/// Delay sweep with a fixed, jitter-free delay and no drops, then a drop
/// sweep with no delay, all under `scheme`.
pub fn run_sweep(
    scenario_cfg: &ScenarioConfig,
    cfg: &PipelineConfig,
    scheme: Scheme,
) -> Result<Vec<SweepPoint>, ConfigError> {
    let mut jobs = Vec::new();
    let mut labels = Vec::new();
    for d in SWEEP_DELAYS_MS {
        let channel = ChannelConfig {
            innate_delay_ms: d,
            seed: cfg.channel.seed,
            ..ChannelConfig::ideal()
        };
        labels.push(("delay", d));
        jobs.push((
            scenario_cfg,
            PipelineConfig {
                channel,
                ..cfg.clone()
            },
            scheme,
        ));
    }
    for eta in SWEEP_DROPS {
        let channel = ChannelConfig {
            drop_threshold: eta,
            seed: cfg.channel.seed,
            ..ChannelConfig::ideal()
        };
        labels.push(("drop", eta));
        jobs.push((
            scenario_cfg,
            PipelineConfig {
                channel,
                ..cfg.clone()
            },
            scheme,
        ));
    }
    let runs = run_parallel(jobs)?;
    Ok(runs
        .iter()
        .zip(labels)
        .map(|(run, (sweep, value))| {
            let accel: Vec<f64> = run.log.rows.iter().map(|r| r.a).collect();
            SweepPoint {
                sweep,
                value,
                scheme,
                tv_velocity: metrics::total_variation(&run.log.speeds()),
                tv_accel: metrics::total_variation(&accel),
                misses: run.log.misses(),
                sent: run.stats.sent,
                dropped: run.stats.dropped,
            }
        })
        .collect())
}
