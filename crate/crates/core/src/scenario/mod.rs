//! Deterministic microscopic traffic simulation of one signalised
//! intersection: IDM car-following on straight lanes, scripted agents,
//! externally commanded agents and constant-speed pedestrians.

mod idm;
mod road;
mod truth;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geometry::{clip_convex, polygon_area, OrientedBox, Pose2D};
use crate::rng;

pub use idm::{idm_acceleration, IdmCommand, IdmParams};
pub use road::{
    Lane, LaneId, Light, RoadConfig, RoadLayout, SignalConfig, SignalGroup, SignalPhase,
};
pub use truth::{ground_truth_objects, ground_truth_rows, GroundTruthRow, LabeledBox};

/// Lockstep period: the simulation runs at 10 Hz.
pub const SIM_DT: f64 = 0.1;
pub const TICK_MS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectClass {
    Car,
    Truck,
    Pedestrian,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 3] = [
        ObjectClass::Car,
        ObjectClass::Truck,
        ObjectClass::Pedestrian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::Car => "Car",
            ObjectClass::Truck => "Truck",
            ObjectClass::Pedestrian => "Pedestrian",
        }
    }

    pub fn default_dims(self) -> Dims {
        match self {
            ObjectClass::Car => Dims::new(4.5, 1.8, 1.5),
            ObjectClass::Truck => Dims::new(8.0, 2.5, 3.5),
            ObjectClass::Pedestrian => Dims::new(0.6, 0.6, 1.75),
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Car" => Ok(ObjectClass::Car),
            "Truck" => Ok(ObjectClass::Truck),
            "Pedestrian" => Ok(ObjectClass::Pedestrian),
            other => Err(format!("unknown object class `{other}`")),
        }
    }
}

/// Box extents in meters: length along heading, width across, height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Dims {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Dims {
    pub fn new(length: f64, width: f64, height: f64) -> Self {
        Dims {
            length,
            width,
            height,
        }
    }

    fn is_valid(&self) -> bool {
        [self.length, self.width, self.height]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }
}

impl From<[f64; 3]> for Dims {
    fn from(v: [f64; 3]) -> Self {
        Dims::new(v[0], v[1], v[2])
    }
}

impl From<Dims> for [f64; 3] {
    fn from(d: Dims) -> Self {
        [d.length, d.width, d.height]
    }
}

/// Piecewise-linear speed over simulation time, held constant outside the
/// breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile(pub Vec<[f64; 2]>);

impl SpeedProfile {
    pub fn speed_at(&self, t: f64) -> f64 {
        let pts = &self.0;
        match pts.len() {
            0 => 0.0,
            _ if t <= pts[0][0] => pts[0][1],
            n if t >= pts[n - 1][0] => pts[n - 1][1],
            _ => {
                let k = pts.partition_point(|p| p[0] <= t);
                let (a, b) = (pts[k - 1], pts[k]);
                a[1] + (b[1] - a[1]) * (t - a[0]) / (b[0] - a[0])
            }
        }
    }

    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if self.0.is_empty() {
            return Err(ConfigError::invalid(
                field,
                "profile needs at least one breakpoint",
            ));
        }
        for w in self.0.windows(2) {
            if w[1][0] <= w[0][0] {
                return Err(ConfigError::invalid(
                    field,
                    "profile times must be strictly increasing",
                ));
            }
        }
        if self
            .0
            .iter()
            .any(|p| !p[0].is_finite() || !(p[1].is_finite() && p[1] >= 0.0))
        {
            return Err(ConfigError::invalid(
                field,
                "profile speeds must be finite and >= 0",
            ));
        }
        Ok(())
    }
}

/// Who decides an agent's longitudinal acceleration.
#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    Idm,
    Scripted(SpeedProfile),
    /// Commanded from outside the simulator each tick (the CACC follower).
    External,
    /// Constant-speed pedestrian that turns around at crosswalk ends.
    Walker,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: u32,
    pub class: ObjectClass,
    pub pose: Pose2D,
    pub speed: f64,
    pub accel: f64,
    pub dims: Dims,
    pub route: Vec<LaneId>,
    pub route_index: usize,
    /// Arc length of the agent's center along its current lane.
    pub s: f64,
    /// Walkers only: travelling against the lane direction.
    pub reversed: bool,
    pub control: Control,
}

impl AgentState {
    pub fn lane(&self) -> LaneId {
        self.route[self.route_index]
    }

    pub fn footprint(&self) -> OrientedBox {
        OrientedBox::new(
            self.pose.x,
            self.pose.y,
            self.dims.length,
            self.dims.width,
            self.pose.yaw,
        )
    }

    fn rear(&self) -> f64 {
        self.s - 0.5 * self.dims.length
    }

    fn front(&self) -> f64 {
        self.s + 0.5 * self.dims.length
    }
}

/// Immutable snapshot of the world at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub tick: u64,
    /// Always `tick × SIM_DT`.
    pub sim_time: f64,
    /// Sorted by id.
    pub agents: Vec<AgentState>,
    pub signal_phase: SignalPhase,
    next_id: u32,
    pending_spawns: u32,
}

impl WorldState {
    pub fn sim_time_ms(&self) -> u64 {
        self.tick * TICK_MS
    }

    pub fn agent(&self, id: u32) -> Option<&AgentState> {
        self.agents
            .binary_search_by_key(&id, |a| a.id)
            .ok()
            .map(|i| &self.agents[i])
    }

    /// Nearest agent ahead of `id` on the same lane, with the bumper-to-bumper gap.
    pub fn leader_of(&self, id: u32) -> Option<(&AgentState, f64)> {
        let me = self.agent(id)?;
        let lane = me.lane();
        self.agents
            .iter()
            .filter(|a| a.id != id && a.lane() == lane && a.s > me.s)
            .min_by(|a, b| a.s.total_cmp(&b.s))
            .map(|lead| (lead, lead.rear() - me.front()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    Spawned {
        tick: u64,
        id: u32,
    },
    Despawned {
        tick: u64,
        id: u32,
    },
    Collision {
        tick: u64,
        follower: u32,
        leader: u32,
    },
    CollisionImminent {
        tick: u64,
        id: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    Idm,
    Scripted,
    External,
    Walker,
}

/// An explicitly placed agent in the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: u32,
    pub class: ObjectClass,
    pub lane: LaneId,
    /// Center position along the lane [m].
    pub s: f64,
    #[serde(default)]
    pub speed: f64,
    #[serde(default)]
    pub control: Option<ControlKind>,
    /// `[[t, v], ...]` breakpoints for scripted agents.
    #[serde(default)]
    pub profile: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub dims: Option<Dims>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    /// Number of vehicles kept in the network.
    pub vehicles: u32,
    pub truck_fraction: f64,
    pub pedestrians: u32,
    pub initial_speed: f64,
    pub pedestrian_speed: f64,
    /// Minimum center-to-center spacing when placing vehicles [m].
    pub spawn_spacing: f64,
    /// Replace vehicles that leave the network at a lane entry.
    pub respawn: bool,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig {
            vehicles: 12,
            truck_fraction: 0.15,
            pedestrians: 2,
            initial_speed: 8.0,
            pedestrian_speed: 1.3,
            spawn_spacing: 16.0,
            respawn: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub road: RoadConfig,
    pub signal: SignalConfig,
    pub idm: IdmParams,
    pub demand: DemandConfig,
    pub agents: Vec<AgentSpec>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            road: RoadConfig::default(),
            signal: SignalConfig::default(),
            idm: IdmParams::default(),
            demand: DemandConfig::default(),
            agents: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    /// Configuration with no demand and no agents.
    pub fn empty() -> Self {
        ScenarioConfig {
            demand: DemandConfig {
                vehicles: 0,
                pedestrians: 0,
                ..DemandConfig::default()
            },
            ..ScenarioConfig::default()
        }
    }
}

/// Static part of a scenario: road, signal plan and behaviour parameters.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub layout: RoadLayout,
}

/// Validate `config` and build the tick-0 world.
pub fn init_scenario(config: ScenarioConfig) -> Result<(Scenario, WorldState), ConfigError> {
    let scenario = Scenario::new(config)?;
    let state = scenario.initial_state()?;
    Ok((scenario, state))
}

pub struct StepOutput {
    pub state: WorldState,
    pub events: Vec<SimEvent>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, ConfigError> {
        config.road.validate()?;
        config.signal.validate()?;
        config.idm.validate()?;
        let d = &config.demand;
        if !(0.0..=1.0).contains(&d.truck_fraction) {
            return Err(ConfigError::invalid(
                "demand.truck_fraction",
                "must be in [0, 1]",
            ));
        }
        if !(d.spawn_spacing.is_finite() && d.spawn_spacing > 0.0) {
            return Err(ConfigError::invalid("demand.spawn_spacing", "must be > 0"));
        }
        if !(d.initial_speed.is_finite() && d.initial_speed >= 0.0) {
            return Err(ConfigError::invalid("demand.initial_speed", "must be >= 0"));
        }
        if !(d.pedestrian_speed.is_finite() && d.pedestrian_speed >= 0.0) {
            return Err(ConfigError::invalid(
                "demand.pedestrian_speed",
                "must be >= 0",
            ));
        }
        let layout = RoadLayout::new(config.road);
        Ok(Scenario { config, layout })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Scenario::new(ScenarioConfig::load(path)?)
    }

    pub fn idm(&self) -> &IdmParams {
        &self.config.idm
    }

    fn make_agent(&self, spec: &AgentSpec) -> Result<AgentState, ConfigError> {
        let field = format!("agents[id={}]", spec.id);
        let lane = self.layout.lane(spec.lane);
        let pedestrian = spec.class == ObjectClass::Pedestrian;
        if pedestrian != spec.lane.is_crosswalk() {
            return Err(ConfigError::invalid(
                field,
                "pedestrians belong on crosswalks and vehicles on through lanes",
            ));
        }
        if !(spec.s.is_finite() && (0.0..=lane.length).contains(&spec.s)) {
            return Err(ConfigError::invalid(
                field,
                format!("s = {} is off the lane", spec.s),
            ));
        }
        if !(spec.speed.is_finite() && spec.speed >= 0.0) {
            return Err(ConfigError::invalid(field, "speed must be >= 0"));
        }
        let dims = spec.dims.unwrap_or_else(|| spec.class.default_dims());
        if !dims.is_valid() {
            return Err(ConfigError::invalid(
                field,
                "dims must be strictly positive",
            ));
        }
        let kind = spec.control.unwrap_or(if pedestrian {
            ControlKind::Walker
        } else {
            ControlKind::Idm
        });
        let (control, speed) = match kind {
            ControlKind::Idm if !pedestrian => (Control::Idm, spec.speed),
            ControlKind::External if !pedestrian => (Control::External, spec.speed),
            ControlKind::Walker if pedestrian => (Control::Walker, spec.speed),
            ControlKind::Scripted => {
                let profile = SpeedProfile(spec.profile.clone().unwrap_or_default());
                profile.validate(&field)?;
                let v0 = profile.speed_at(0.0);
                (Control::Scripted(profile), v0)
            }
            other => {
                return Err(ConfigError::invalid(
                    field,
                    format!("control {other:?} does not apply to class {}", spec.class),
                ))
            }
        };
        let mut agent = AgentState {
            id: spec.id,
            class: spec.class,
            pose: Pose2D::default(),
            speed,
            accel: 0.0,
            dims,
            route: vec![spec.lane],
            route_index: 0,
            s: spec.s,
            reversed: false,
            control,
        };
        self.place(&mut agent);
        Ok(agent)
    }

    fn place(&self, agent: &mut AgentState) {
        let lane = self.layout.lane(agent.lane());
        let p = lane.point_at(agent.s);
        let yaw = lane.heading()
            + if agent.reversed {
                std::f64::consts::PI
            } else {
                0.0
            };
        agent.pose = Pose2D::new(p[0], p[1], yaw);
    }

    fn random_class(&self, key: u64) -> ObjectClass {
        let mut r = rng::keyed(self.config.seed, rng::DOMAIN_SPAWN, key);
        if r.random::<f64>() < self.config.demand.truck_fraction {
            ObjectClass::Truck
        } else {
            ObjectClass::Car
        }
    }

    pub fn initial_state(&self) -> Result<WorldState, ConfigError> {
        let mut agents = Vec::new();
        for spec in &self.config.agents {
            agents.push(self.make_agent(spec)?);
        }
        let mut next_id = agents.iter().map(|a| a.id + 1).max().unwrap_or(1);

        let demand = self.config.demand;
        let mut per_lane = [0usize; 4];
        let mut cursor = [10.0f64; 4];
        let lane_offset =
            rng::keyed(self.config.seed, rng::DOMAIN_SPAWN, u64::MAX).random_range(0..4usize);
        for k in 0..demand.vehicles as usize {
            let li = (k + lane_offset) % 4;
            let lane_id = LaneId::THROUGH[li];
            let class = self.random_class(next_id as u64);
            let dims = class.default_dims();
            let mut r = rng::keyed(self.config.seed, rng::DOMAIN_SPAWN, 1_000_000 + k as u64);
            let jitter = r.random_range(0.0..0.3) * demand.spawn_spacing;
            let s = cursor[li] + 0.5 * dims.length;
            let lane = self.layout.lane(lane_id);
            if s + 0.5 * dims.length > lane.length {
                return Err(ConfigError::invalid(
                    "demand.vehicles",
                    format!("{} vehicles do not fit on the approaches", demand.vehicles),
                ));
            }
            cursor[li] = s + 0.5 * dims.length + demand.spawn_spacing
                - dims.length.min(demand.spawn_spacing * 0.5)
                + jitter;
            per_lane[li] += 1;
            let spec = AgentSpec {
                id: next_id,
                class,
                lane: lane_id,
                s,
                speed: demand.initial_speed,
                control: Some(ControlKind::Idm),
                profile: None,
                dims: None,
            };
            agents.push(self.make_agent(&spec)?);
            next_id += 1;
        }
        for k in 0..demand.pedestrians as usize {
            let lane_id = LaneId::CROSSWALKS[k % 4];
            let lane = self.layout.lane(lane_id);
            let mut r = rng::keyed(self.config.seed, rng::DOMAIN_SPAWN, 2_000_000 + k as u64);
            let s = r.random_range(0.1..0.9) * lane.length;
            let spec = AgentSpec {
                id: next_id,
                class: ObjectClass::Pedestrian,
                lane: lane_id,
                s,
                speed: demand.pedestrian_speed,
                control: Some(ControlKind::Walker),
                profile: None,
                dims: None,
            };
            let mut agent = self.make_agent(&spec)?;
            agent.reversed = r.random::<bool>();
            self.place(&mut agent);
            agents.push(agent);
            next_id += 1;
        }

        agents.sort_by_key(|a| a.id);
        for w in agents.windows(2) {
            if w[0].id == w[1].id {
                return Err(ConfigError::DuplicateId(w[0].id));
            }
        }
        for i in 0..agents.len() {
            for j in (i + 1)..agents.len() {
                if footprints_overlap(&agents[i], &agents[j]) {
                    return Err(ConfigError::Overlap {
                        a: agents[i].id,
                        b: agents[j].id,
                    });
                }
            }
        }

        Ok(WorldState {
            tick: 0,
            sim_time: 0.0,
            agents,
            signal_phase: self.config.signal.phase_at(0),
            next_id,
            pending_spawns: 0,
        })
    }

    /// Advance one tick with no external commands.
    pub fn step_world(&self, state: &WorldState) -> WorldState {
        self.step(state, &BTreeMap::new()).state
    }

    /// Advance one tick. `commands` supplies accelerations for
    /// [`Control::External`] agents; missing entries mean zero.
    pub fn step(&self, state: &WorldState, commands: &BTreeMap<u32, f64>) -> StepOutput {
        let tick = state.tick;
        let t = state.sim_time;
        let idm = &self.config.idm;
        let mut events = Vec::new();

        let mut by_lane: BTreeMap<LaneId, Vec<usize>> = BTreeMap::new();
        for (i, a) in state.agents.iter().enumerate() {
            if a.class != ObjectClass::Pedestrian {
                by_lane.entry(a.lane()).or_default().push(i);
            }
        }
        let mut leader: Vec<Option<usize>> = vec![None; state.agents.len()];
        for idx in by_lane.values_mut() {
            idx.sort_by(|&a, &b| state.agents[a].s.total_cmp(&state.agents[b].s));
            for w in idx.windows(2) {
                leader[w[0]] = Some(w[1]);
            }
        }

        let mut agents = Vec::with_capacity(state.agents.len());
        for (i, a) in state.agents.iter().enumerate() {
            let accel = match &a.control {
                Control::Walker => 0.0,
                Control::External => commands.get(&a.id).copied().unwrap_or(0.0),
                Control::Scripted(profile) => (profile.speed_at(t + SIM_DT) - a.speed) / SIM_DT,
                Control::Idm => {
                    let cmd = match leader[i] {
                        Some(j) => {
                            let lead = &state.agents[j];
                            idm_acceleration(a.speed, lead.speed, lead.rear() - a.front(), idm)
                        }
                        None => idm_acceleration(a.speed, a.speed, f64::INFINITY, idm),
                    };
                    if cmd.collision_imminent {
                        events.push(SimEvent::CollisionImminent { tick, id: a.id });
                    }
                    let mut accel = cmd.accel;
                    if let Some(stop) = self.stop_gap(a, &state.signal_phase) {
                        accel = accel.min(idm_acceleration(a.speed, 0.0, stop, idm).accel);
                    }
                    accel
                }
            };

            let mut next = a.clone();
            let v_new = (a.speed + accel * SIM_DT).max(0.0);
            next.accel = (v_new - a.speed) / SIM_DT;
            let ds = a.speed * SIM_DT;
            next.speed = v_new;
            next.s = if a.reversed { a.s - ds } else { a.s + ds };

            if matches!(a.control, Control::Walker) {
                let len = self.layout.lane(a.lane()).length;
                if next.s > len {
                    next.s = 2.0 * len - next.s;
                    next.reversed = !next.reversed;
                } else if next.s < 0.0 {
                    next.s = -next.s;
                    next.reversed = !next.reversed;
                }
            } else {
                let mut despawn = false;
                loop {
                    let len = self.layout.lane(next.lane()).length;
                    if next.rear() <= len {
                        break;
                    }
                    if next.route_index + 1 < next.route.len() {
                        next.s -= len;
                        next.route_index += 1;
                    } else {
                        despawn = true;
                        break;
                    }
                }
                if despawn {
                    events.push(SimEvent::Despawned {
                        tick: tick + 1,
                        id: a.id,
                    });
                    continue;
                }
            }
            self.place(&mut next);
            agents.push(next);
        }

        let despawned = events
            .iter()
            .filter(|e| matches!(e, SimEvent::Despawned { .. }))
            .count() as u32;
        let mut next_id = state.next_id;
        let mut pending = state.pending_spawns;
        if self.config.demand.respawn {
            pending += despawned;
        }
        while pending > 0 {
            match self.try_spawn(&agents, next_id) {
                Some(agent) => {
                    events.push(SimEvent::Spawned {
                        tick: tick + 1,
                        id: agent.id,
                    });
                    agents.push(agent);
                    next_id += 1;
                    pending -= 1;
                }
                None => break,
            }
        }
        agents.sort_by_key(|a| a.id);

        let next_state = WorldState {
            tick: tick + 1,
            sim_time: (tick + 1) as f64 * SIM_DT,
            agents,
            signal_phase: self.config.signal.phase_at((tick + 1) * TICK_MS),
            next_id,
            pending_spawns: pending,
        };

        let before = collisions(state);
        for (follower, leader) in collisions(&next_state) {
            if !before.contains(&(follower, leader)) {
                log::warn!(
                    "tick {}: vehicle {follower} collided with {leader}",
                    tick + 1
                );
                events.push(SimEvent::Collision {
                    tick: tick + 1,
                    follower,
                    leader,
                });
            }
        }

        StepOutput {
            state: next_state,
            events,
        }
    }

    /// Gap to the stop line when the signal requires stopping there.
    fn stop_gap(&self, a: &AgentState, phase: &SignalPhase) -> Option<f64> {
        let lane = self.layout.lane(a.lane());
        let stop = lane.stop_s?;
        let gap = stop - a.front();
        if gap < 0.0 {
            return None;
        }
        match phase.light_for(a.lane()) {
            Light::Green => None,
            Light::Red => Some(gap.max(1e-3)),
            Light::Yellow => {
                let braking = a.speed * a.speed / (2.0 * self.config.idm.comfort_decel);
                (gap > braking).then_some(gap.max(1e-3))
            }
        }
    }

    fn try_spawn(&self, agents: &[AgentState], id: u32) -> Option<AgentState> {
        let class = self.random_class(id as u64);
        let dims = class.default_dims();
        let start = rng::keyed(self.config.seed, rng::DOMAIN_SPAWN, 3_000_000 + id as u64)
            .random_range(0..4usize);
        for k in 0..4 {
            let lane_id = LaneId::THROUGH[(start + k) % 4];
            let s = 0.5 * dims.length;
            let clear = agents
                .iter()
                .filter(|a| a.class != ObjectClass::Pedestrian && a.lane() == lane_id)
                .all(|a| a.rear() - (s + 0.5 * dims.length) >= self.config.demand.spawn_spacing);
            if clear {
                let spec = AgentSpec {
                    id,
                    class,
                    lane: lane_id,
                    s,
                    speed: self.config.demand.initial_speed,
                    control: Some(ControlKind::Idm),
                    profile: None,
                    dims: Some(dims),
                };
                return self.make_agent(&spec).ok();
            }
        }
        None
    }
}

fn footprints_overlap(a: &AgentState, b: &AgentState) -> bool {
    let pa = a.footprint().corners();
    let pb = b.footprint().corners();
    polygon_area(&clip_convex(&pa, &pb)) > 1e-9
}

/// Same-lane vehicle pairs whose boxes touch or overlap, as (follower, leader).
fn collisions(state: &WorldState) -> Vec<(u32, u32)> {
    let mut by_lane: BTreeMap<LaneId, Vec<&AgentState>> = BTreeMap::new();
    for a in &state.agents {
        if a.class != ObjectClass::Pedestrian {
            by_lane.entry(a.lane()).or_default().push(a);
        }
    }
    let mut out = Vec::new();
    for list in by_lane.values_mut() {
        list.sort_by(|a, b| a.s.total_cmp(&b.s));
        for w in list.windows(2) {
            if w[1].rear() - w[0].front() <= 0.0 {
                out.push((w[0].id, w[1].id));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(id: u32, lane: LaneId, s: f64, speed: f64) -> AgentSpec {
        AgentSpec {
            id,
            class: ObjectClass::Car,
            lane,
            s,
            speed,
            control: None,
            profile: None,
            dims: None,
        }
    }

    fn free_road() -> ScenarioConfig {
        ScenarioConfig {
            signal: SignalConfig {
                enabled: false,
                ..SignalConfig::default()
            },
            ..ScenarioConfig::empty()
        }
    }

    #[test]
    fn zero_demand_gives_empty_world() {
        let (_, state) = init_scenario(ScenarioConfig::empty()).unwrap();
        assert!(state.agents.is_empty());
        assert_eq!(state.tick, 0);
    }

    #[test]
    fn single_car_keeps_configured_speed() {
        let mut cfg = ScenarioConfig::empty();
        cfg.agents.push(car(1, LaneId::Eastbound, 2.25, 7.5));
        let (_, state) = init_scenario(cfg).unwrap();
        assert_eq!(state.agents.len(), 1);
        assert_eq!(state.agents[0].speed, 7.5);
        assert_eq!(state.agents[0].pose.x, -150.0 + 2.25);
    }

    #[test]
    fn demand_is_deterministic() {
        let cfg = ScenarioConfig {
            demand: DemandConfig {
                vehicles: 20,
                ..DemandConfig::default()
            },
            seed: 99,
            ..ScenarioConfig::default()
        };
        let (_, a) = init_scenario(cfg.clone()).unwrap();
        let (_, b) = init_scenario(cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.agents
                .iter()
                .filter(|x| x.class != ObjectClass::Pedestrian)
                .count(),
            20
        );
    }

    #[test]
    fn overlapping_spawns_are_rejected() {
        let mut cfg = ScenarioConfig::empty();
        cfg.agents.push(car(1, LaneId::Eastbound, 20.0, 0.0));
        cfg.agents.push(car(2, LaneId::Eastbound, 22.0, 0.0));
        assert!(matches!(
            init_scenario(cfg),
            Err(ConfigError::Overlap { a: 1, b: 2 })
        ));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut cfg = ScenarioConfig::empty();
        cfg.agents.push(car(4, LaneId::Eastbound, 20.0, 0.0));
        cfg.agents.push(car(4, LaneId::Westbound, 20.0, 0.0));
        assert!(matches!(
            init_scenario(cfg),
            Err(ConfigError::DuplicateId(4))
        ));
    }

    #[test]
    fn pedestrian_on_a_vehicle_lane_is_rejected() {
        let mut cfg = ScenarioConfig::empty();
        cfg.agents.push(AgentSpec {
            class: ObjectClass::Pedestrian,
            ..car(1, LaneId::Eastbound, 20.0, 1.0)
        });
        assert!(init_scenario(cfg).is_err());
    }

    #[test]
    fn empty_world_only_advances_time() {
        let (sc, s0) = init_scenario(ScenarioConfig::empty()).unwrap();
        let s1 = sc.step_world(&s0);
        assert_eq!(s1.tick, 1);
        assert!(s1.agents.is_empty());
        assert_eq!(s1.sim_time, SIM_DT);
    }

    #[test]
    fn free_car_speeds_up() {
        let mut cfg = free_road();
        cfg.agents.push(car(1, LaneId::Eastbound, 10.0, 5.0));
        let (sc, s0) = init_scenario(cfg).unwrap();
        let s1 = sc.step_world(&s0);
        assert!(s1.agents[0].speed > 5.0);
        assert_eq!(s1.agents[0].s, 10.5);
    }

    #[test]
    fn sim_time_is_tick_times_dt() {
        let (sc, mut s) = init_scenario(ScenarioConfig::default()).unwrap();
        for _ in 0..250 {
            s = sc.step_world(&s);
            assert_eq!(s.sim_time, s.tick as f64 * SIM_DT);
        }
    }

    #[test]
    fn red_light_stops_vehicle_at_the_line() {
        let mut cfg = ScenarioConfig::empty();
        // Westbound group (east-west) is red from 28 s; start the car late in
        // the green so it meets the red.
        cfg.signal.offset = 28.0;
        cfg.agents.push(car(1, LaneId::Eastbound, 60.0, 10.0));
        let (sc, mut s) = init_scenario(cfg).unwrap();
        let stop = sc.layout.lane(LaneId::Eastbound).stop_s.unwrap();
        for _ in 0..200 {
            s = sc.step_world(&s);
            assert!(s.agents[0].front() <= stop + 1e-6);
        }
        assert!(s.agents[0].speed < 0.05);
        assert!(stop - s.agents[0].front() < 3.0);
    }

    #[test]
    fn scripted_agent_follows_profile() {
        let mut cfg = free_road();
        cfg.agents.push(AgentSpec {
            control: Some(ControlKind::Scripted),
            profile: Some(vec![[0.0, 4.0], [1.0, 2.0]]),
            ..car(1, LaneId::Northbound, 30.0, 0.0)
        });
        let (sc, mut s) = init_scenario(cfg).unwrap();
        assert_eq!(s.agents[0].speed, 4.0);
        for _ in 0..10 {
            s = sc.step_world(&s);
        }
        assert!((s.agents[0].speed - 2.0).abs() < 1e-9);
        assert!((s.agents[0].accel + 2.0).abs() < 1e-9);
    }

    #[test]
    fn external_agent_obeys_commands() {
        let mut cfg = free_road();
        cfg.agents.push(AgentSpec {
            control: Some(ControlKind::External),
            ..car(1, LaneId::Southbound, 30.0, 3.0)
        });
        let (sc, s) = init_scenario(cfg).unwrap();
        let cmds = BTreeMap::from([(1, -1.0)]);
        let out = sc.step(&s, &cmds);
        assert!((out.state.agents[0].speed - 2.9).abs() < 1e-12);
        let out = sc.step(&s, &BTreeMap::from([(1, -100.0)]));
        assert_eq!(out.state.agents[0].speed, 0.0);
    }

    #[test]
    fn walkers_turn_around_at_the_curb() {
        let mut cfg = free_road();
        cfg.agents.push(AgentSpec {
            class: ObjectClass::Pedestrian,
            ..car(1, LaneId::CrosswalkEast, 10.0, 1.5)
        });
        let (sc, mut s) = init_scenario(cfg).unwrap();
        let len = sc.layout.lane(LaneId::CrosswalkEast).length;
        for _ in 0..300 {
            s = sc.step_world(&s);
            let w = &s.agents[0];
            assert!((0.0..=len).contains(&w.s));
            assert_eq!(w.speed, 1.5);
        }
    }

    #[test]
    fn vehicles_leaving_are_replaced() {
        let mut cfg = free_road();
        cfg.demand.respawn = true;
        cfg.agents.push(car(1, LaneId::Eastbound, 297.0, 10.0));
        let (sc, s0) = init_scenario(cfg).unwrap();
        let mut s = s0;
        let mut events = Vec::new();
        for _ in 0..10 {
            let out = sc.step(&s, &BTreeMap::new());
            events.extend(out.events);
            s = out.state;
        }
        assert!(events
            .iter()
            .any(|e| matches!(e, SimEvent::Despawned { id: 1, .. })));
        assert!(events
            .iter()
            .any(|e| matches!(e, SimEvent::Spawned { id: 2, .. })));
        assert_eq!(s.agents.len(), 1);
        assert_eq!(s.agents[0].id, 2);
    }

    #[test]
    fn speed_profile_interpolates() {
        let p = SpeedProfile(vec![[0.0, 0.0], [2.0, 4.0], [4.0, 4.0]]);
        assert_eq!(p.speed_at(-1.0), 0.0);
        assert_eq!(p.speed_at(1.0), 2.0);
        assert_eq!(p.speed_at(3.0), 4.0);
        assert_eq!(p.speed_at(9.0), 4.0);
    }
}
