//! The mirror side: a latest-frame-wins registry of reconstructed objects
//! in the world frame, queried by applications.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Pose2D};
use crate::perception::Geofence;
use crate::protocol::PerceptionFrame;
use crate::scenario::ObjectClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirroredObject {
    pub class: ObjectClass,
    /// World-frame center [m].
    pub x: f64,
    pub y: f64,
    pub l: f64,
    pub w: f64,
    /// World-frame yaw [rad].
    pub yaw: f64,
    pub conf: f64,
    pub frame_id: u64,
    pub frame_time_ms: u64,
    pub received_at_ms: u64,
}

/// Immutable result of a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorSnapshot {
    pub now_ms: u64,
    pub latest_frame_id: Option<u64>,
    /// Time since the last accepted frame; `None` if nothing was ever accepted.
    pub staleness_ms: Option<u64>,
    pub objects: Vec<MirroredObject>,
}

#[derive(Debug, Clone)]
pub struct MirrorRegistry {
    sensor_id: String,
    sensor_pose: Pose2D,
    latest_frame_id: Option<u64>,
    accepted_at_ms: Option<u64>,
    objects: Vec<MirroredObject>,
    accepted: u64,
    stale: u64,
}

impl MirrorRegistry {
    /// `sensor_pose` places the sensor frame of incoming detections in the
    /// world.
    pub fn new(sensor_id: impl Into<String>, sensor_pose: Pose2D) -> Self {
        MirrorRegistry {
            sensor_id: sensor_id.into(),
            sensor_pose,
            latest_frame_id: None,
            accepted_at_ms: None,
            objects: Vec::new(),
            accepted: 0,
            stale: 0,
        }
    }

    /// Replace the contents with `frame` if it is newer than anything seen
    /// so far; otherwise count it as stale. Returns whether it was accepted.
    pub fn apply_frame(&mut self, frame: &PerceptionFrame, now_ms: u64) -> bool {
        if self.latest_frame_id.is_some_and(|id| frame.frame_id <= id) {
            self.stale += 1;
            return false;
        }
        if frame.sensor_id != self.sensor_id {
            log::debug!(
                "frame {} from sensor `{}` applied to registry for `{}`",
                frame.frame_id,
                frame.sensor_id,
                self.sensor_id
            );
        }
        let pose = self.sensor_pose;
        self.objects = frame
            .objects
            .iter()
            .map(|o| {
                let [x, y] = pose.to_parent([o.x as f64, o.y as f64]);
                MirroredObject {
                    class: o.cls,
                    x,
                    y,
                    l: o.l as f64,
                    w: o.w as f64,
                    yaw: normalize_angle(o.yaw as f64 + pose.yaw),
                    conf: o.conf as f64,
                    frame_id: frame.frame_id,
                    frame_time_ms: frame.sim_time_ms,
                    received_at_ms: now_ms,
                }
            })
            .collect();
        self.latest_frame_id = Some(frame.frame_id);
        self.accepted_at_ms = Some(now_ms);
        self.accepted += 1;
        true
    }

    /// Current objects, optionally restricted to a planar world-frame region
    /// (its z interval is ignored).
    pub fn query_objects(&self, now_ms: u64, region: Option<&Geofence>) -> MirrorSnapshot {
        let objects = self
            .objects
            .iter()
            .filter(|o| region.map_or(true, |g| g.contains_xy(o.x, o.y)))
            .cloned()
            .collect();
        MirrorSnapshot {
            now_ms,
            latest_frame_id: self.latest_frame_id,
            staleness_ms: self.accepted_at_ms.map(|t| now_ms.saturating_sub(t)),
            objects,
        }
    }

    pub fn latest_frame_id(&self) -> Option<u64> {
        self.latest_frame_id
    }

    pub fn accepted_frames(&self) -> u64 {
        self.accepted
    }

    pub fn stale_frames(&self) -> u64 {
        self.stale
    }
}

impl MirrorSnapshot {
    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::WireObject;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn frame(id: u64, xs: &[f32]) -> PerceptionFrame {
        PerceptionFrame {
            frame_id: id,
            sim_time_ms: id * 100,
            sensor_id: "rsu".into(),
            objects: xs
                .iter()
                .map(|&x| WireObject {
                    cls: ObjectClass::Car,
                    x,
                    y: 0.0,
                    l: 4.5,
                    w: 1.8,
                    yaw: 0.0,
                    conf: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn never_fed_registry_is_empty_and_infinitely_stale() {
        let reg = MirrorRegistry::new("rsu", Pose2D::default());
        let snap = reg.query_objects(500, None);
        assert!(snap.objects.is_empty());
        assert_eq!(snap.staleness_ms, None);
    }

    #[test]
    fn first_frame_is_taken_with_zero_staleness() {
        let mut reg = MirrorRegistry::new("rsu", Pose2D::new(10.0, 8.0, 0.0));
        assert!(reg.apply_frame(&frame(1, &[5.0]), 300));
        let snap = reg.query_objects(300, None);
        assert_eq!(snap.staleness_ms, Some(0));
        assert_eq!(snap.objects.len(), 1);
        assert_eq!((snap.objects[0].x, snap.objects[0].y), (15.0, 8.0));
        assert_eq!(reg.query_objects(500, None).staleness_ms, Some(200));
    }

    #[test]
    fn late_frame_is_counted_and_ignored() {
        let mut reg = MirrorRegistry::new("rsu", Pose2D::default());
        reg.apply_frame(&frame(5, &[1.0]), 0);
        assert!(!reg.apply_frame(&frame(4, &[2.0]), 100));
        assert_eq!(reg.stale_frames(), 1);
        assert_eq!(reg.query_objects(100, None).objects[0].x, 1.0);
    }

    #[test]
    fn shuffled_delivery_ends_on_newest_frame() {
        let mut ids: Vec<u64> = (1..=100).collect();
        ids.shuffle(&mut rand_pcg::Pcg64Mcg::seed_from_u64(8));
        let mut reg = MirrorRegistry::new("rsu", Pose2D::default());
        for (k, id) in ids.iter().enumerate() {
            reg.apply_frame(&frame(*id, &[*id as f32]), k as u64);
        }
        let snap = reg.query_objects(1000, None);
        assert_eq!(snap.latest_frame_id, Some(100));
        assert_eq!(snap.objects[0].x, 100.0);
    }

    #[test]
    fn region_filter_matches_brute_force() {
        let xs: Vec<f32> = (0..10).map(|k| k as f32 * 7.0 - 10.0).collect();
        let mut reg = MirrorRegistry::new("rsu", Pose2D::default());
        reg.apply_frame(&frame(1, &xs), 0);
        let g = Geofence {
            x: [0.0, 25.0],
            ..Geofence::default()
        };
        let inside = reg.query_objects(0, Some(&g)).objects;
        let expected: Vec<f64> = xs
            .iter()
            .map(|&x| x as f64)
            .filter(|x| (0.0..=25.0).contains(x))
            .collect();
        assert_eq!(expected.len(), 4);
        assert_eq!(inside.iter().map(|o| o.x).collect::<Vec<_>>(), expected);
    }

    #[test]
    fn queries_are_read_only() {
        let mut reg = MirrorRegistry::new("rsu", Pose2D::default());
        reg.apply_frame(&frame(1, &[3.0, 4.0]), 0);
        assert_eq!(reg.query_objects(100, None), reg.query_objects(100, None));
    }
}
