//! Single four-way intersection: four straight through lanes, four
//! crosswalks and a two-group fixed-time signal plan.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneId {
    Eastbound,
    Westbound,
    Northbound,
    Southbound,
    CrosswalkEast,
    CrosswalkWest,
    CrosswalkNorth,
    CrosswalkSouth,
}

impl LaneId {
    pub const THROUGH: [LaneId; 4] = [
        LaneId::Eastbound,
        LaneId::Westbound,
        LaneId::Northbound,
        LaneId::Southbound,
    ];
    pub const CROSSWALKS: [LaneId; 4] = [
        LaneId::CrosswalkEast,
        LaneId::CrosswalkWest,
        LaneId::CrosswalkNorth,
        LaneId::CrosswalkSouth,
    ];

    pub fn is_crosswalk(self) -> bool {
        LaneId::CROSSWALKS.contains(&self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalGroup {
    EastWest,
    NorthSouth,
}

/// Straight lane segment parameterised by arc length `s ∈ [0, length]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: LaneId,
    pub start: Vec2,
    /// Unit direction of travel.
    pub dir: Vec2,
    pub length: f64,
    /// Arc length of the stop line, for signalised vehicle lanes.
    pub stop_s: Option<f64>,
    pub group: Option<SignalGroup>,
}

impl Lane {
    pub fn point_at(&self, s: f64) -> Vec2 {
        [
            self.start[0] + s * self.dir[0],
            self.start[1] + s * self.dir[1],
        ]
    }

    pub fn heading(&self) -> f64 {
        self.dir[1].atan2(self.dir[0])
    }

    /// `(s, lateral)` of a world point; lateral is positive to the left.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let d = [p[0] - self.start[0], p[1] - self.start[1]];
        let s = d[0] * self.dir[0] + d[1] * self.dir[1];
        let lat = -d[0] * self.dir[1] + d[1] * self.dir[0];
        (s, lat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadConfig {
    /// Length of each arm measured from the intersection center [m].
    pub arm_length: f64,
    pub lane_width: f64,
    /// Distance from the intersection center to each stop line [m].
    pub stop_line_offset: f64,
    /// Distance from the intersection center to each crosswalk centerline [m].
    pub crosswalk_offset: f64,
    /// Sidewalk overhang of a crosswalk beyond the carriageway on each side [m].
    pub sidewalk: f64,
}

impl Default for RoadConfig {
    fn default() -> Self {
        RoadConfig {
            arm_length: 150.0,
            lane_width: 3.5,
            stop_line_offset: 12.0,
            crosswalk_offset: 9.0,
            sidewalk: 2.0,
        }
    }
}

impl RoadConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = [
            ("road.arm_length", self.arm_length),
            ("road.lane_width", self.lane_width),
            ("road.stop_line_offset", self.stop_line_offset),
            ("road.crosswalk_offset", self.crosswalk_offset),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.sidewalk.is_finite() && self.sidewalk >= 0.0) {
            return Err(ConfigError::invalid("road.sidewalk", "must be >= 0"));
        }
        if self.stop_line_offset <= self.lane_width || self.stop_line_offset >= self.arm_length {
            return Err(ConfigError::invalid(
                "road.stop_line_offset",
                "must lie between the lane width and the arm length",
            ));
        }
        if self.crosswalk_offset >= self.stop_line_offset
            || self.crosswalk_offset <= self.lane_width
        {
            return Err(ConfigError::invalid(
                "road.crosswalk_offset",
                "must lie between the intersection box and the stop line",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadLayout {
    pub config: RoadConfig,
    lanes: Vec<Lane>,
}

impl RoadLayout {
    pub fn new(config: RoadConfig) -> Self {
        let l = config.arm_length;
        let hw = 0.5 * config.lane_width;
        let stop = l - config.stop_line_offset;
        let through = |id, start, dir, group| Lane {
            id,
            start,
            dir,
            length: 2.0 * l,
            stop_s: Some(stop),
            group: Some(group),
        };
        let c = config.crosswalk_offset;
        let half = config.lane_width + config.sidewalk;
        let walk = |id, start: Vec2, dir: Vec2| Lane {
            id,
            start,
            dir,
            length: 2.0 * half,
            stop_s: None,
            group: None,
        };
        let lanes = vec![
            through(
                LaneId::Eastbound,
                [-l, -hw],
                [1.0, 0.0],
                SignalGroup::EastWest,
            ),
            through(
                LaneId::Westbound,
                [l, hw],
                [-1.0, 0.0],
                SignalGroup::EastWest,
            ),
            through(
                LaneId::Northbound,
                [hw, -l],
                [0.0, 1.0],
                SignalGroup::NorthSouth,
            ),
            through(
                LaneId::Southbound,
                [-hw, l],
                [0.0, -1.0],
                SignalGroup::NorthSouth,
            ),
            walk(LaneId::CrosswalkEast, [c, -half], [0.0, 1.0]),
            walk(LaneId::CrosswalkWest, [-c, half], [0.0, -1.0]),
            walk(LaneId::CrosswalkNorth, [half, c], [-1.0, 0.0]),
            walk(LaneId::CrosswalkSouth, [-half, -c], [1.0, 0.0]),
        ];
        RoadLayout { config, lanes }
    }

    pub fn lane(&self, id: LaneId) -> &Lane {
        // Every LaneId variant is constructed in `new`.
        self.lanes
            .iter()
            .find(|lane| lane.id == id)
            .expect("layout holds every lane id")
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Light {
    Green,
    Yellow,
    Red,
}

/// Signal indication per approach, named by the travel direction of the
/// lane that approaches the stop line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalPhase {
    pub eastbound: Light,
    pub westbound: Light,
    pub northbound: Light,
    pub southbound: Light,
}

impl SignalPhase {
    pub fn all_green() -> Self {
        SignalPhase {
            eastbound: Light::Green,
            westbound: Light::Green,
            northbound: Light::Green,
            southbound: Light::Green,
        }
    }

    pub fn light_for(&self, lane: LaneId) -> Light {
        match lane {
            LaneId::Eastbound => self.eastbound,
            LaneId::Westbound => self.westbound,
            LaneId::Northbound => self.northbound,
            LaneId::Southbound => self.southbound,
            _ => Light::Green,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    pub enabled: bool,
    /// Green time per group [s].
    pub green: f64,
    pub yellow: f64,
    pub all_red: f64,
    /// Cycle offset [s].
    pub offset: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            enabled: true,
            green: 25.0,
            yellow: 3.0,
            all_red: 2.0,
            offset: 0.0,
        }
    }
}

impl SignalConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.green > 0.0 && self.yellow >= 0.0 && self.all_red >= 0.0 && self.offset >= 0.0) {
            return Err(ConfigError::invalid(
                "signal",
                "green must be > 0; yellow, all_red and offset must be >= 0",
            ));
        }
        Ok(())
    }

    fn ms(v: f64) -> u64 {
        (v * 1000.0).round() as u64
    }

    /// Fixed-time plan: east-west green, yellow, all-red, then the same for
    /// north-south. Evaluated on integer milliseconds.
    pub fn phase_at(&self, time_ms: u64) -> SignalPhase {
        if !self.enabled {
            return SignalPhase::all_green();
        }
        let (g, y, r) = (
            Self::ms(self.green),
            Self::ms(self.yellow),
            Self::ms(self.all_red),
        );
        let half = g + y + r;
        let t = (time_ms + Self::ms(self.offset)) % (2 * half);
        let light = |local: u64| {
            if local < g {
                Light::Green
            } else if local < g + y {
                Light::Yellow
            } else {
                Light::Red
            }
        };
        let (ew, ns) = if t < half {
            (light(t), Light::Red)
        } else {
            (Light::Red, light(t - half))
        };
        SignalPhase {
            eastbound: ew,
            westbound: ew,
            northbound: ns,
            southbound: ns,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lanes_meet_at_the_intersection() {
        let layout = RoadLayout::new(RoadConfig::default());
        let east = layout.lane(LaneId::Eastbound);
        let mid = east.point_at(150.0);
        assert_eq!(mid, [0.0, -1.75]);
        let (s, lat) = east.project([10.0, 0.0]);
        assert_eq!(s, 160.0);
        assert_eq!(lat, 1.75);
        let west = layout.lane(LaneId::Westbound);
        assert!((west.heading().abs() - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(west.stop_s, Some(138.0));
    }

    #[test]
    fn signal_plan_alternates_groups() {
        let plan = SignalConfig::default();
        let p = plan.phase_at(0);
        assert_eq!((p.eastbound, p.northbound), (Light::Green, Light::Red));
        let p = plan.phase_at(26_000);
        assert_eq!((p.eastbound, p.northbound), (Light::Yellow, Light::Red));
        let p = plan.phase_at(29_000);
        assert_eq!((p.eastbound, p.northbound), (Light::Red, Light::Red));
        let p = plan.phase_at(31_000);
        assert_eq!((p.eastbound, p.northbound), (Light::Red, Light::Green));
        let p = plan.phase_at(60_000);
        assert_eq!(p.eastbound, Light::Green);
        let off = SignalConfig {
            enabled: false,
            ..plan
        };
        assert_eq!(off.phase_at(31_000), SignalPhase::all_green());
    }

    #[test]
    fn crosswalk_offset_must_sit_before_the_stop_line() {
        let bad = RoadConfig {
            crosswalk_offset: 13.0,
            ..RoadConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
