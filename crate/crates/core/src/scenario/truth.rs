//! Ground-truth export: labelled boxes in the sensor frame and per-agent
//! trajectory rows in the world frame.

use serde::Serialize;

use super::{Dims, ObjectClass, WorldState};
use crate::geometry::{normalize_angle, OrientedBox};
use crate::lidar::SensorMount;
use crate::perception::Geofence;

/// An agent's 3D box in the sensor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBox {
    pub id: u32,
    pub class: ObjectClass,
    /// Box center; z is measured from the sensor, so the ground sits at
    /// `-mount height`.
    pub center: [f64; 3],
    pub dims: Dims,
    pub yaw: f64,
}

impl LabeledBox {
    pub fn footprint(&self) -> OrientedBox {
        OrientedBox::new(
            self.center[0],
            self.center[1],
            self.dims.length,
            self.dims.width,
            self.yaw,
        )
    }
}

/// Every agent whose box center lies inside `region`, in the sensor frame.
pub fn ground_truth_objects(
    state: &WorldState,
    mount: &SensorMount,
    region: &Geofence,
) -> Vec<LabeledBox> {
    state
        .agents
        .iter()
        .filter_map(|a| {
            let [x, y] = mount.pose.to_local([a.pose.x, a.pose.y]);
            let z = 0.5 * a.dims.height - mount.height;
            region.contains(x, y, z).then(|| LabeledBox {
                id: a.id,
                class: a.class,
                center: [x, y, z],
                dims: a.dims,
                yaw: normalize_angle(a.pose.yaw - mount.pose.yaw),
            })
        })
        .collect()
}

/// One line of the ground-truth trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthRow {
    pub tick: u64,
    pub id: u32,
    pub class: &'static str,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub v: f64,
    pub a: f64,
}

pub fn ground_truth_rows(state: &WorldState) -> impl Iterator<Item = GroundTruthRow> + '_ {
    state.agents.iter().map(move |a| GroundTruthRow {
        tick: state.tick,
        id: a.id,
        class: a.class.as_str(),
        x: a.pose.x,
        y: a.pose.y,
        yaw: a.pose.yaw,
        v: a.speed,
        a: a.accel,
    })
}
