use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{Detection, Detector, PerceptionInput};
use crate::error::ConfigError;
use crate::geometry::{caliper_rectangles, convex_hull, OrientedBox, Vec2};
use crate::lidar::PointCloudFrame;
use crate::scenario::ObjectClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// Points within this height of the ground plane are discarded [m].
    pub ground_epsilon: f64,
    /// Ground plane height in the sensor frame; `None` uses `-mount height`.
    pub ground_z: Option<f64>,
    pub cluster_radius: f64,
    pub min_points: usize,
    /// Footprints smaller than this are pedestrians (or discarded when short) [m²].
    pub pedestrian_max_area: f64,
    pub pedestrian_min_height: f64,
    pub truck_min_area: f64,
    pub truck_min_height: f64,
    /// Cluster size that earns confidence 1.
    pub n_ref: f64,
    /// Rectangles within this relative area of the minimum compete on how
    /// closely the points hug their sides.
    pub tie_window: f64,
    /// A long cluster narrower than this is taken to be one visible face...
    pub thin_width: f64,
    /// ...and widened to this, away from the sensor.
    pub completed_width: f64,
    pub completion_min_length: f64,
    pub min_dim: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            ground_epsilon: 0.15,
            ground_z: None,
            cluster_radius: 0.7,
            min_points: 12,
            pedestrian_max_area: 1.0,
            pedestrian_min_height: 1.0,
            truck_min_area: 10.0,
            truck_min_height: 2.5,
            n_ref: 100.0,
            tie_window: 0.1,
            thin_width: 1.0,
            completed_width: 1.8,
            completion_min_length: 2.0,
            min_dim: 0.1,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("detector.cluster_radius", self.cluster_radius),
            ("detector.n_ref", self.n_ref),
            ("detector.completed_width", self.completed_width),
            ("detector.min_dim", self.min_dim),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.ground_epsilon >= 0.0 && self.tie_window >= 0.0) {
            return Err(ConfigError::invalid(
                "detector",
                "ground_epsilon and tie_window must be >= 0",
            ));
        }
        Ok(())
    }
}

/// Ground removal, fixed-radius clustering, rotating-calipers box fitting
/// and threshold classification.
#[derive(Debug, Clone, Default)]
pub struct ReferenceDetector {
    pub params: DetectorParams,
}

impl ReferenceDetector {
    pub fn new(params: DetectorParams) -> Self {
        ReferenceDetector { params }
    }

    pub fn detect_cloud(&self, cloud: &PointCloudFrame) -> Vec<Detection> {
        let p = &self.params;
        let ground = p.ground_z.unwrap_or(-cloud.mount.height);
        let kept: Vec<[f64; 3]> = cloud
            .points
            .iter()
            .map(|q| [q.x as f64, q.y as f64, q.z as f64])
            .filter(|q| q[2] > ground + p.ground_epsilon)
            .collect();
        let xy: Vec<Vec2> = kept.iter().map(|q| [q[0], q[1]]).collect();

        let mut out = Vec::new();
        for members in cluster_points(&xy, p.cluster_radius) {
            if members.len() < p.min_points {
                continue;
            }
            let pts: Vec<Vec2> = members.iter().map(|&i| xy[i]).collect();
            let top = members
                .iter()
                .map(|&i| kept[i][2])
                .fold(f64::NEG_INFINITY, f64::max);
            let height = top - ground;
            let Some(mut bbox) = fit_box(&pts, p.tie_window) else {
                continue;
            };
            bbox.length = bbox.length.max(p.min_dim);
            bbox.width = bbox.width.max(p.min_dim);
            if bbox.width < p.thin_width && bbox.length >= p.completion_min_length {
                complete_far_side(&mut bbox, p.completed_width);
            }
            let area = bbox.area();
            let class = if area < p.pedestrian_max_area {
                if height < p.pedestrian_min_height {
                    continue;
                }
                ObjectClass::Pedestrian
            } else if area >= p.truck_min_area || height >= p.truck_min_height {
                ObjectClass::Truck
            } else {
                ObjectClass::Car
            };
            out.push(Detection {
                class,
                bbox,
                confidence: (members.len() as f64 / p.n_ref).min(1.0),
            });
        }
        out
    }
}

impl Detector for ReferenceDetector {
    fn detect(&self, input: &PerceptionInput<'_>) -> Vec<Detection> {
        self.detect_cloud(input.cloud)
    }
}

/// Minimum-area rectangle, preferring among near-minimal candidates the one
/// whose sides the points hug most closely. An L-shaped scan of a car makes
/// the leg-aligned and hypotenuse-aligned rectangles tie on area.
fn fit_box(points: &[Vec2], tie_window: f64) -> Option<OrientedBox> {
    let hull = convex_hull(points);
    let rects = caliper_rectangles(&hull);
    let min_area = rects.iter().map(|r| r.area()).fold(f64::INFINITY, f64::min);
    if !min_area.is_finite() {
        return None;
    }
    let stride = (points.len() / 400).max(1);
    let closeness = |r: &crate::geometry::CaliperRect| {
        let sample = points.iter().step_by(stride);
        let n = sample.clone().count() as f64;
        sample.map(|&q| r.edge_distance(q)).sum::<f64>() / n
    };
    rects
        .iter()
        .filter(|r| r.area() <= min_area * (1.0 + tie_window) + 1e-9)
        .map(|r| (closeness(r), r))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, r)| r.to_box())
}

/// Widen a box seen only from one side, keeping the visible face fixed.
fn complete_far_side(b: &mut OrientedBox, width: f64) {
    let mut n = [-b.yaw.sin(), b.yaw.cos()];
    if n[0] * b.cx + n[1] * b.cy < 0.0 {
        n = [-n[0], -n[1]];
    }
    let shift = 0.5 * (width - b.width);
    b.cx += n[0] * shift;
    b.cy += n[1] * shift;
    b.width = width;
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of the "within `radius`" graph.
///
/// Points are binned on a grid of side `radius/√2`, so every cell is a
/// clique; only neighbouring cells need pairwise checks, and those stop at
/// the first close pair. Components are returned ordered by their smallest
/// point index, members ascending.
pub fn cluster_points(points: &[Vec2], radius: f64) -> Vec<Vec<usize>> {
    if points.is_empty() {
        return Vec::new();
    }
    let side = radius / std::f64::consts::SQRT_2 * (1.0 - 1e-9);
    let key = |p: Vec2| ((p[0] / side).floor() as i64, (p[1] / side).floor() as i64);
    let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, &p) in points.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }
    let keys: Vec<(i64, i64)> = cells.keys().copied().collect();
    let index: HashMap<(i64, i64), usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let members: Vec<&Vec<usize>> = cells.values().collect();

    let r2 = radius * radius;
    let close = |a: usize, b: usize| {
        let (p, q) = (points[a], points[b]);
        let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
        dx * dx + dy * dy <= r2
    };
    let mut uf = UnionFind::new(keys.len());
    for (ci, &(kx, ky)) in keys.iter().enumerate() {
        for dx in -2..=2i64 {
            for dy in -2..=2i64 {
                let Some(&cj) = index.get(&(kx + dx, ky + dy)) else {
                    continue;
                };
                if cj <= ci || uf.find(ci) == uf.find(cj) {
                    continue;
                }
                let linked = members[ci]
                    .iter()
                    .any(|&a| members[cj].iter().any(|&b| close(a, b)));
                if linked {
                    uf.union(ci, cj);
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (ci, m) in members.iter().enumerate() {
        groups
            .entry(uf.find(ci))
            .or_default()
            .extend(m.iter().copied());
    }
    let mut out: Vec<Vec<usize>> = groups
        .into_values()
        .map(|mut g| {
            g.sort_unstable();
            g
        })
        .collect();
    out.sort_by_key(|g| g[0]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn brute_force_components(points: &[Vec2], radius: f64) -> Vec<Vec<usize>> {
        let n = points.len();
        let mut label: Vec<usize> = (0..n).collect();
        loop {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    let d = (points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]);
                    if d <= radius && label[j] < label[i] {
                        label[i] = label[j];
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, l) in label.into_iter().enumerate() {
            groups.entry(l).or_default().push(i);
        }
        groups.into_values().collect()
    }

    #[test]
    fn clustering_matches_brute_force() {
        let mut r = rand_pcg::Pcg64Mcg::seed_from_u64(11);
        for _ in 0..20 {
            let pts: Vec<Vec2> = (0..300)
                .map(|_| [r.random_range(0.0..15.0), r.random_range(-5.0..5.0)])
                .collect();
            assert_eq!(cluster_points(&pts, 0.7), brute_force_components(&pts, 0.7));
        }
    }

    #[test]
    fn l_shape_fits_the_full_rectangle() {
        // Two visible faces of a 4 × 2 box rotated by 0.3 rad.
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let mut pts = Vec::new();
        for k in 0..=40 {
            let u = -2.0 + 0.1 * k as f64;
            pts.push([u, -1.0]);
        }
        for k in 0..=20 {
            let v = -1.0 + 0.1 * k as f64;
            pts.push([-2.0, v]);
        }
        let pts: Vec<Vec2> = pts
            .iter()
            .map(|p| [10.0 + c * p[0] - s * p[1], 5.0 + s * p[0] + c * p[1]])
            .collect();
        let b = fit_box(&pts, 0.1).unwrap();
        assert!(
            (b.cx - 10.0).abs() < 1e-6 && (b.cy - 5.0).abs() < 1e-6,
            "{b:?}"
        );
        assert!((b.length - 4.0).abs() < 1e-6 && (b.width - 2.0).abs() < 1e-6);
        assert!((b.yaw - 0.3).abs() < 1e-6);
    }

    #[test]
    fn thin_face_is_widened_away_from_sensor() {
        let mut b = OrientedBox::new(10.0, 0.0, 4.5, 0.05, 0.5 * std::f64::consts::PI);
        complete_far_side(&mut b, 1.8);
        assert!((b.cx - 10.875).abs() < 1e-9 && b.cy.abs() < 1e-9);
        assert_eq!(b.width, 1.8);
    }

    #[test]
    fn empty_cloud_gives_nothing() {
        let cloud = PointCloudFrame::new(0, crate::lidar::LidarConfig::default().mount(), vec![]);
        assert!(ReferenceDetector::default().detect_cloud(&cloud).is_empty());
    }
}
