//! Roadside spinning LiDAR: analytic ray casting against the scenario's
//! agents and ground plane, followed by range noise, attenuation and dropoff.

mod degrade;
mod raycast;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, LidarError};
use crate::geometry::Pose2D;

pub use degrade::degrade;
pub use raycast::{cast_rays, HitTarget, RawHit};

/// Where the sensor sits: planar pose in the world frame plus height above
/// the road. The sensor frame has x along `pose.yaw`, z up and its origin at
/// the optical center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorMount {
    pub pose: Pose2D,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarConfig {
    pub channels: u32,
    pub mount_height: f64,
    pub range_max: f64,
    pub rotation_hz: f64,
    /// Elevation of the top channel [deg].
    pub upper_fov: f64,
    /// Elevation of the bottom channel [deg].
    pub lower_fov: f64,
    /// Atmospheric attenuation a [1/m].
    pub attenuation: f64,
    pub noise_stddev: f64,
    pub dropoff_rate: f64,
    pub dropoff_intensity_limit: f64,
    pub dropoff_zero_intensity: f64,
    /// Horizontal angle between columns [deg].
    pub azimuth_step: f64,
    pub pose: Pose2D,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig {
            channels: 64,
            mount_height: 1.73,
            range_max: 100.0,
            rotation_hz: 10.0,
            upper_fov: 2.0,
            lower_fov: -24.9,
            attenuation: 0.004,
            noise_stddev: 0.01,
            dropoff_rate: 0.45,
            dropoff_intensity_limit: 0.8,
            dropoff_zero_intensity: 0.4,
            azimuth_step: 0.2,
            pose: Pose2D::default(),
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.channels == 0 {
            return Err(ConfigError::invalid("lidar.channels", "must be > 0"));
        }
        if !(self.lower_fov < self.upper_fov) || self.lower_fov < -90.0 || self.upper_fov > 90.0 {
            return Err(ConfigError::invalid(
                "lidar.lower_fov",
                "need -90 <= lower_fov < upper_fov <= 90",
            ));
        }
        for (name, v) in [
            ("lidar.mount_height", self.mount_height),
            ("lidar.range_max", self.range_max),
            ("lidar.rotation_hz", self.rotation_hz),
            ("lidar.azimuth_step", self.azimuth_step),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if self.azimuth_step > 360.0 {
            return Err(ConfigError::invalid(
                "lidar.azimuth_step",
                "must not exceed 360",
            ));
        }
        if !(self.attenuation.is_finite() && self.attenuation >= 0.0) {
            return Err(ConfigError::invalid("lidar.attenuation", "must be >= 0"));
        }
        if !(self.noise_stddev.is_finite() && self.noise_stddev >= 0.0) {
            return Err(ConfigError::invalid("lidar.noise_stddev", "must be >= 0"));
        }
        for (name, v) in [
            ("lidar.dropoff_rate", self.dropoff_rate),
            ("lidar.dropoff_zero_intensity", self.dropoff_zero_intensity),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::invalid(
                    name,
                    format!("must be in [0, 1], got {v}"),
                ));
            }
        }
        // A limit above 1 is allowed and means nothing is exempt.
        if !(self.dropoff_intensity_limit.is_finite() && self.dropoff_intensity_limit >= 0.0) {
            return Err(ConfigError::invalid(
                "lidar.dropoff_intensity_limit",
                "must be >= 0",
            ));
        }
        Ok(())
    }

    pub fn mount(&self) -> SensorMount {
        SensorMount {
            pose: self.pose,
            height: self.mount_height,
        }
    }

    pub fn columns(&self) -> usize {
        ((360.0 / self.azimuth_step).round() as usize).max(1)
    }

    pub fn ray_count(&self) -> usize {
        self.columns() * self.channels as usize
    }

    /// Elevation of channel `k` [rad]; channels are evenly spaced from
    /// `lower_fov` to `upper_fov`.
    pub fn elevation(&self, k: u32) -> f64 {
        let deg = if self.channels == 1 {
            self.lower_fov
        } else {
            self.lower_fov
                + (self.upper_fov - self.lower_fov) * k as f64 / (self.channels - 1) as f64
        };
        deg.to_radians()
    }

    /// Azimuth of column `j` relative to the sensor heading [rad], starting
    /// at -180°.
    pub fn azimuth(&self, j: usize) -> f64 {
        let step = 360.0 / self.columns() as f64;
        (-180.0 + step * j as f64).to_radians()
    }
}

/// Received intensity after atmospheric attenuation, `e^(-a·d)` with unit
/// emitted intensity.
pub fn intensity(d: f64, a: f64) -> Result<f64, LidarError> {
    if d < 0.0 || d.is_nan() {
        return Err(LidarError::NegativeDistance(d));
    }
    if a < 0.0 || a.is_nan() {
        return Err(LidarError::NegativeAttenuation(a));
    }
    Ok((-a * d).exp())
}

/// One LiDAR point in the sensor frame, stored as KITTI does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub i: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudFrame {
    pub tick: u64,
    pub mount: SensorMount,
    pub points: Vec<Point>,
}

impl PointCloudFrame {
    pub fn new(tick: u64, mount: SensorMount, points: Vec<Point>) -> Self {
        PointCloudFrame {
            tick,
            mount,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// KITTI velodyne layout: little-endian `f32` quadruples `(x, y, z, i)`.
    pub fn to_bin_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.points.len() * 16);
        for p in &self.points {
            for v in [p.x, p.y, p.z, p.i] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn points_from_bin_bytes(bytes: &[u8]) -> Option<Vec<Point>> {
        if bytes.len() % 16 != 0 {
            return None;
        }
        let f = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        Some(
            bytes
                .chunks_exact(16)
                .map(|c| Point {
                    x: f(&c[0..4]),
                    y: f(&c[4..8]),
                    z: f(&c[8..12]),
                    i: f(&c[12..16]),
                })
                .collect(),
        )
    }

    pub fn write_bin(&self, path: &Path) -> Result<(), LidarError> {
        let io = |source| LidarError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = std::fs::File::create(path).map_err(io)?;
        file.write_all(&self.to_bin_bytes()).map_err(io)
    }

    pub fn read_bin_points(path: &Path) -> Result<Vec<Point>, LidarError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|source| LidarError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        Self::points_from_bin_bytes(&bytes).ok_or(LidarError::BadFrameLength {
            path: path.to_path_buf(),
            len: bytes.len(),
        })
    }
}

/// Full sensor pipeline for one tick: cast, then degrade with the tick's
/// noise streams.
pub fn scan(state: &crate::scenario::WorldState, cfg: &LidarConfig, seed: u64) -> PointCloudFrame {
    let hits = cast_rays(state, cfg);
    degrade(&hits, cfg, seed, state.tick)
}
