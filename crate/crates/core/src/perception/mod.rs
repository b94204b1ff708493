//! Geofencing, bird's-eye-view rasterization, a geometric reference
//! detector and detection metrics.

mod bev;
mod detect;
mod eval;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geometry::{normalize_angle, OrientedBox};
use crate::lidar::PointCloudFrame;
use crate::scenario::{LabeledBox, ObjectClass};

pub use bev::{build_bev, normalize_point, BevConfig, BevMap, DensityNorm};
pub use detect::{DetectorParams, ReferenceDetector};
pub use eval::{evaluate, evaluate_frames, f1_score, ClassMetrics, EvalReport, FrameResult};

/// Axis-aligned crop region in the sensor frame; all intervals closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geofence {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
}

impl Default for Geofence {
    fn default() -> Self {
        Geofence {
            x: [0.0, 50.0],
            y: [-25.0, 25.0],
            z: [-2.74, 1.36],
        }
    }
}

impl Geofence {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, [lo, hi]) in [
            ("geofence.x", self.x),
            ("geofence.y", self.y),
            ("geofence.z", self.z),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ConfigError::invalid(
                    name,
                    format!("need min < max, got [{lo}, {hi}]"),
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        self.contains_xy(x, y) && (self.z[0]..=self.z[1]).contains(&z)
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        (self.x[0]..=self.x[1]).contains(&x) && (self.y[0]..=self.y[1]).contains(&y)
    }

    /// Keep the points inside the region, preserving order.
    pub fn apply(&self, frame: &PointCloudFrame) -> PointCloudFrame {
        let points = frame
            .points
            .iter()
            .filter(|p| self.contains(p.x as f64, p.y as f64, p.z as f64))
            .copied()
            .collect();
        PointCloudFrame::new(frame.tick, frame.mount, points)
    }
}

/// Crop a frame to `g`.
pub fn geofence(frame: &PointCloudFrame, g: &Geofence) -> PointCloudFrame {
    g.apply(frame)
}

/// One detected object in the sensor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class: ObjectClass,
    pub bbox: OrientedBox,
    pub confidence: f64,
}

/// Everything a detector may look at for one frame. Only the ideal detector
/// reads `ground_truth`.
pub struct PerceptionInput<'a> {
    pub cloud: &'a PointCloudFrame,
    pub ground_truth: &'a [LabeledBox],
}

pub trait Detector {
    fn detect(&self, input: &PerceptionInput<'_>) -> Vec<Detection>;
}

/// Returns the ground-truth boxes unchanged with confidence 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdealDetector;

impl Detector for IdealDetector {
    fn detect(&self, input: &PerceptionInput<'_>) -> Vec<Detection> {
        input
            .ground_truth
            .iter()
            .map(|b| Detection {
                class: b.class,
                bbox: OrientedBox::new(
                    b.center[0],
                    b.center[1],
                    b.dims.length,
                    b.dims.width,
                    normalize_angle(b.yaw),
                ),
                confidence: 1.0,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    #[default]
    Reference,
    Ideal,
}

/// Build the configured detector behind the common interface.
pub fn make_detector(kind: DetectorKind, params: DetectorParams) -> Box<dyn Detector + Send> {
    match kind {
        DetectorKind::Reference => Box::new(ReferenceDetector::new(params)),
        DetectorKind::Ideal => Box::new(IdealDetector),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lidar::{LidarConfig, Point};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn pt(x: f32, y: f32, z: f32, i: f32) -> Point {
        Point { x, y, z, i }
    }

    #[test]
    fn far_point_removed_interior_kept() {
        let g = Geofence::default();
        let frame = PointCloudFrame::new(
            0,
            LidarConfig::default().mount(),
            vec![pt(60.0, 0.0, 0.0, 0.5), pt(25.0, 0.0, -1.0, 0.3)],
        );
        let out = g.apply(&frame);
        assert_eq!(out.points, vec![pt(25.0, 0.0, -1.0, 0.3)]);
    }

    #[test]
    fn bounds_are_closed() {
        let g = Geofence::default();
        assert!(g.contains(0.0, -25.0, -2.74));
        assert!(g.contains(50.0, 25.0, 1.36));
        assert!(!g.contains(50.000_001, 0.0, 0.0));
    }

    #[test]
    fn inverted_interval_rejected() {
        let g = Geofence {
            z: [1.0, -1.0],
            ..Geofence::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn random_frame_matches_brute_force() {
        let mut r = rand_pcg::Pcg64Mcg::seed_from_u64(5);
        let points: Vec<Point> = (0..10_000)
            .map(|_| {
                pt(
                    r.random_range(-20.0..70.0),
                    r.random_range(-40.0..40.0),
                    r.random_range(-4.0..3.0),
                    r.random(),
                )
            })
            .collect();
        let frame = PointCloudFrame::new(0, LidarConfig::default().mount(), points.clone());
        let g = Geofence::default();
        let expected: Vec<Point> = points
            .into_iter()
            .filter(|p| {
                let (x, y, z) = (p.x as f64, p.y as f64, p.z as f64);
                (0.0..=50.0).contains(&x)
                    && (-25.0..=25.0).contains(&y)
                    && (-2.74..=1.36).contains(&z)
            })
            .collect();
        assert_eq!(g.apply(&frame).points, expected);
    }

    proptest! {
        #[test]
        fn idempotent(xs in proptest::collection::vec((-10.0f32..60.0, -30.0f32..30.0, -3.0f32..2.0), 0..200)) {
            let points = xs.into_iter().map(|(x, y, z)| pt(x, y, z, 0.5)).collect();
            let frame = PointCloudFrame::new(0, LidarConfig::default().mount(), points);
            let g = Geofence::default();
            let once = g.apply(&frame);
            prop_assert_eq!(g.apply(&once).points, once.points.clone());
            prop_assert!(once.len() <= frame.len());
        }
    }
}
