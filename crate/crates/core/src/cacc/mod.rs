//! Infrastructure-assisted CACC follower: estimate the leader from ground
//! truth or from the mirror, then run IDM on the estimate.

mod metrics;
mod pipeline;

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::mirror::MirrorSnapshot;
use crate::scenario::{
    idm_acceleration, AgentState, IdmCommand, IdmParams, Lane, ObjectClass, WorldState,
};

pub use metrics::{miss_windows, total_variation, window_mean};
pub use pipeline::{
    run_case_study, run_scheme, run_sweep, EventRow, PipelineConfig, SchemeRun, SweepPoint,
    TickView, SWEEP_DELAYS_MS, SWEEP_DROPS,
};

/// How the follower learns about its leader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Ground truth.
    #[serde(rename = "IP")]
    Ip,
    /// Mirror output; a miss means there is no leader.
    #[serde(rename = "AP")]
    Ap,
    /// Mirror output; a miss holds the leader at its last position, stopped.
    #[serde(rename = "APS")]
    Aps,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Ip, Scheme::Ap, Scheme::Aps];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Ip => "IP",
            Scheme::Ap => "AP",
            Scheme::Aps => "APS",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "IP" => Ok(Scheme::Ip),
            "AP" => Ok(Scheme::Ap),
            "APS" | "AP-S" => Ok(Scheme::Aps),
            other => Err(format!("unknown scheme `{other}` (expected IP, AP or APS)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeaderStatus {
    Present,
    Absent,
    Held,
}

impl LeaderStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LeaderStatus::Present => "Present",
            LeaderStatus::Absent => "Absent",
            LeaderStatus::Held => "Held",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderEstimate {
    pub status: LeaderStatus,
    /// Leader center as arc length along the follower's lane; `None` when
    /// absent.
    pub position: Option<f64>,
    pub speed: f64,
    pub length: f64,
    /// Frame time of the observation behind the estimate [ms].
    pub last_update_ms: Option<u64>,
    held_since_ms: Option<u64>,
    frame_id: Option<u64>,
    /// Recent `(frame time ms, position)` observations for the speed estimate.
    history: VecDeque<(u64, f64)>,
}

impl Default for LeaderEstimate {
    fn default() -> Self {
        LeaderEstimate::absent()
    }
}

impl LeaderEstimate {
    pub fn absent() -> Self {
        LeaderEstimate {
            status: LeaderStatus::Absent,
            position: None,
            speed: 0.0,
            length: 0.0,
            last_update_ms: None,
            held_since_ms: None,
            frame_id: None,
            history: VecDeque::new(),
        }
    }

    pub fn present(position: f64, speed: f64, length: f64, at_ms: u64) -> Self {
        LeaderEstimate {
            status: LeaderStatus::Present,
            position: Some(position),
            speed,
            length,
            last_update_ms: Some(at_ms),
            ..LeaderEstimate::absent()
        }
    }

    pub fn is_hit(&self) -> bool {
        self.status == LeaderStatus::Present
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorParams {
    /// Half-width of the lane corridor in which mirrored objects count as
    /// leader candidates [m].
    pub corridor_half_width: f64,
    /// Oldest mirror content still used; older means a miss [ms]. With 0,
    /// a tick on which no frame arrives counts as a miss.
    pub max_staleness_ms: u64,
    /// Observation window for the finite-difference speed [ms].
    pub speed_window_ms: u64,
    /// How long a held leader survives without being seen [s].
    pub hold_horizon_s: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            corridor_half_width: 1.5,
            max_staleness_ms: 0,
            speed_window_ms: 500,
            hold_horizon_s: 5.0,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.corridor_half_width > 0.0) {
            return Err(ConfigError::invalid(
                "estimator.corridor_half_width",
                "must be > 0",
            ));
        }
        if !(self.hold_horizon_s >= 0.0) {
            return Err(ConfigError::invalid(
                "estimator.hold_horizon_s",
                "must be >= 0",
            ));
        }
        Ok(())
    }
}

/// Where an estimate comes from this tick.
pub enum LeaderSource<'a> {
    GroundTruth(&'a WorldState),
    Mirror(&'a MirrorSnapshot),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorEvent {
    HeldExpired { now_ms: u64 },
}

/// Update the follower's belief about its leader.
pub fn estimate_leader(
    scheme: Scheme,
    source: LeaderSource<'_>,
    fv: &AgentState,
    lane: &Lane,
    prev: &LeaderEstimate,
    now_ms: u64,
    p: &EstimatorParams,
) -> (LeaderEstimate, Option<EstimatorEvent>) {
    match source {
        LeaderSource::GroundTruth(state) => {
            let est = match state.leader_of(fv.id) {
                Some((lead, _)) => {
                    LeaderEstimate::present(lead.s, lead.speed, lead.dims.length, now_ms)
                }
                None => LeaderEstimate::absent(),
            };
            (est, None)
        }
        LeaderSource::Mirror(snap) => {
            let fresh = snap.staleness_ms.is_some_and(|s| s <= p.max_staleness_ms);
            if fresh
                && snap.latest_frame_id.is_some()
                && snap.latest_frame_id == prev.frame_id
                && prev.is_hit()
            {
                // Nothing new arrived; the last observation still stands.
                return (prev.clone(), None);
            }
            let candidate = fresh
                .then(|| nearest_in_corridor(snap, fv, lane, p.corridor_half_width))
                .flatten();
            match candidate {
                Some((s, length, frame_ms)) => {
                    let mut history = if prev.status == LeaderStatus::Present {
                        prev.history.clone()
                    } else {
                        VecDeque::new()
                    };
                    history.push_back((frame_ms, s));
                    while history
                        .front()
                        .is_some_and(|(t, _)| frame_ms.saturating_sub(*t) > p.speed_window_ms)
                    {
                        history.pop_front();
                    }
                    let mut est =
                        LeaderEstimate::present(s, slope(&history).max(0.0), length, frame_ms);
                    est.history = history;
                    est.frame_id = snap.latest_frame_id;
                    (est, None)
                }
                None => on_miss(scheme, prev, snap.latest_frame_id, now_ms, p),
            }
        }
    }
}

fn on_miss(
    scheme: Scheme,
    prev: &LeaderEstimate,
    frame_id: Option<u64>,
    now_ms: u64,
    p: &EstimatorParams,
) -> (LeaderEstimate, Option<EstimatorEvent>) {
    if scheme != Scheme::Aps || prev.position.is_none() {
        let mut est = LeaderEstimate::absent();
        est.frame_id = frame_id;
        return (est, None);
    }
    let since = prev.held_since_ms.unwrap_or(now_ms);
    if (now_ms - since) as f64 > p.hold_horizon_s * 1000.0 {
        log::info!("held leader expired at {now_ms} ms");
        let mut est = LeaderEstimate::absent();
        est.frame_id = frame_id;
        return (est, Some(EstimatorEvent::HeldExpired { now_ms }));
    }
    let est = LeaderEstimate {
        status: LeaderStatus::Held,
        position: prev.position,
        speed: 0.0,
        length: prev.length,
        last_update_ms: prev.last_update_ms,
        held_since_ms: Some(since),
        frame_id,
        history: VecDeque::new(),
    };
    (est, None)
}

/// Nearest vehicle ahead of the follower within the lane corridor:
/// `(arc length, length, frame time)`.
fn nearest_in_corridor(
    snap: &MirrorSnapshot,
    fv: &AgentState,
    lane: &Lane,
    half_width: f64,
) -> Option<(f64, f64, u64)> {
    snap.objects
        .iter()
        .filter(|o| o.class != ObjectClass::Pedestrian)
        .filter_map(|o| {
            let (s, lateral) = lane.project([o.x, o.y]);
            (lateral.abs() <= half_width && s - fv.s > fv.dims.length).then_some((
                s,
                o.l,
                o.frame_time_ms,
            ))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Least-squares slope of position over time [m/s]; 0 with fewer than two
/// distinct times.
fn slope(history: &VecDeque<(u64, f64)>) -> f64 {
    let n = history.len() as f64;
    if history.len() < 2 {
        return 0.0;
    }
    let mean_t = history.iter().map(|(t, _)| *t as f64 / 1000.0).sum::<f64>() / n;
    let mean_s = history.iter().map(|(_, s)| *s).sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, s) in history {
        let dt = *t as f64 / 1000.0 - mean_t;
        num += dt * (s - mean_s);
        den += dt * dt;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Bumper-to-bumper gap implied by an estimate, or `None` when absent.
pub fn estimated_gap(fv: &AgentState, est: &LeaderEstimate) -> Option<f64> {
    est.position
        .map(|pos| pos - fv.s - 0.5 * (est.length + fv.dims.length))
}

/// IDM on the estimate: free road when absent, otherwise follow the
/// estimated position and speed.
pub fn cacc_step(fv: &AgentState, est: &LeaderEstimate, p: &IdmParams) -> IdmCommand {
    match (est.status, estimated_gap(fv, est)) {
        (LeaderStatus::Absent, _) | (_, None) => {
            idm_acceleration(fv.speed, fv.speed, f64::INFINITY, p)
        }
        (_, Some(gap)) => idm_acceleration(fv.speed, est.speed, gap, p),
    }
}

/// Per-tick record of the follower.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub scheme: Scheme,
    /// Follower position along its lane [m].
    pub x: f64,
    pub v: f64,
    pub a: f64,
    /// `hit` when the leader estimate is present, else `miss`.
    pub status: &'static str,
    pub estimate: &'static str,
    /// True leader position along the lane, when there is one.
    pub leader_x: Option<f64>,
    pub leader_v: Option<f64>,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryLog {
    pub fn speeds(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.v).collect()
    }

    pub fn misses(&self) -> usize {
        self.rows.iter().filter(|r| r.status == "miss").count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        for row in &self.rows {
            wr.serialize(row)?;
        }
        if self.rows.is_empty() {
            wr.write_record([
                "t", "scheme", "x", "v", "a", "status", "estimate", "leader_x", "leader_v", "gap",
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}
