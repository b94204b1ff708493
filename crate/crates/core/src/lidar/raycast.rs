use std::f64::consts::{PI, TAU};

use super::LidarConfig;
use crate::geometry::normalize_angle;
use crate::scenario::{ObjectClass, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitTarget {
    Ground,
    Agent(u32),
}

/// Geometric return of one ray, before any degradation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawHit {
    /// `column × channels + channel`.
    pub ray: u32,
    /// Sensor-frame point.
    pub point: [f64; 3],
    pub distance: f64,
    /// Unit ray direction in the sensor frame.
    pub dir: [f64; 3],
    pub target: HitTarget,
}

enum Shape {
    Box {
        id: u32,
        center: [f64; 3],
        half: [f64; 3],
        cos: f64,
        sin: f64,
    },
    Cylinder {
        id: u32,
        center: [f64; 2],
        radius: f64,
        z_min: f64,
        z_max: f64,
    },
}

impl Shape {
    fn id(&self) -> u32 {
        match self {
            Shape::Box { id, .. } | Shape::Cylinder { id, .. } => *id,
        }
    }

    /// Entry distance of a ray from the sensor origin, if it hits from outside.
    fn intersect(&self, d: [f64; 3]) -> Option<f64> {
        match *self {
            Shape::Box {
                center,
                half,
                cos,
                sin,
                ..
            } => {
                // Ray in the box frame.
                let ox = -center[0];
                let oy = -center[1];
                let o = [cos * ox + sin * oy, -sin * ox + cos * oy, -center[2]];
                let dir = [cos * d[0] + sin * d[1], -sin * d[0] + cos * d[1], d[2]];
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for i in 0..3 {
                    if dir[i].abs() < 1e-12 {
                        if o[i].abs() > half[i] {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (-half[i] - o[i]) / dir[i];
                    let t2 = (half[i] - o[i]) / dir[i];
                    t_near = t_near.max(t1.min(t2));
                    t_far = t_far.min(t1.max(t2));
                }
                (t_near <= t_far && t_near > 0.0).then_some(t_near)
            }
            Shape::Cylinder {
                center,
                radius,
                z_min,
                z_max,
                ..
            } => {
                let mut best = f64::INFINITY;
                let a = d[0] * d[0] + d[1] * d[1];
                if a > 1e-18 {
                    let b = -2.0 * (d[0] * center[0] + d[1] * center[1]);
                    let c = center[0] * center[0] + center[1] * center[1] - radius * radius;
                    let disc = b * b - 4.0 * a * c;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                            let z = t * d[2];
                            if t > 0.0 && (z_min..=z_max).contains(&z) {
                                best = best.min(t);
                            }
                        }
                    }
                }
                if d[2].abs() > 1e-12 {
                    for zc in [z_min, z_max] {
                        let t = zc / d[2];
                        let dx = t * d[0] - center[0];
                        let dy = t * d[1] - center[1];
                        if t > 0.0 && dx * dx + dy * dy <= radius * radius {
                            best = best.min(t);
                        }
                    }
                }
                best.is_finite().then_some(best)
            }
        }
    }
}

/// Cast one full sweep against every agent and the road plane. Returns the
/// nearest hit within range for each ray that hits anything, ordered by ray
/// index.
pub fn cast_rays(state: &WorldState, cfg: &LidarConfig) -> Vec<RawHit> {
    let mount = cfg.mount();
    let h = mount.height;
    let columns = cfg.columns();
    let channels = cfg.channels as usize;
    let step = TAU / columns as f64;

    let mut shapes = Vec::with_capacity(state.agents.len());
    let mut by_column: Vec<Vec<usize>> = vec![Vec::new(); columns];
    for agent in &state.agents {
        let [cx, cy] = mount.pose.to_local([agent.pose.x, agent.pose.y]);
        let d = agent.dims;
        let (shape, bound) = if agent.class == ObjectClass::Pedestrian {
            let radius = 0.5 * d.length.max(d.width);
            let shape = Shape::Cylinder {
                id: agent.id,
                center: [cx, cy],
                radius,
                z_min: -h,
                z_max: d.height - h,
            };
            (shape, radius)
        } else {
            let yaw = agent.pose.yaw - mount.pose.yaw;
            let shape = Shape::Box {
                id: agent.id,
                center: [cx, cy, 0.5 * d.height - h],
                half: [0.5 * d.length, 0.5 * d.width, 0.5 * d.height],
                cos: yaw.cos(),
                sin: yaw.sin(),
            };
            (shape, 0.5 * d.length.hypot(d.width))
        };
        let rho = cx.hypot(cy);
        if rho - bound > cfg.range_max {
            continue;
        }
        let idx = shapes.len();
        shapes.push(shape);
        if rho <= bound {
            by_column.iter_mut().for_each(|c| c.push(idx));
            continue;
        }
        let center = normalize_angle(cy.atan2(cx));
        let half = (bound / rho).asin();
        let first = ((center - half + PI) / step).floor() as i64 - 1;
        let last = ((center + half + PI) / step).ceil() as i64 + 1;
        for j in first..=last {
            by_column[j.rem_euclid(columns as i64) as usize].push(idx);
        }
    }

    let elevations: Vec<(f64, f64)> = (0..cfg.channels)
        .map(|k| {
            let e = cfg.elevation(k);
            (e.cos(), e.sin())
        })
        .collect();

    let mut hits = Vec::new();
    for (j, candidates) in by_column.iter().enumerate() {
        let az = cfg.azimuth(j);
        let (ca, sa) = (az.cos(), az.sin());
        for (k, &(ce, se)) in elevations.iter().enumerate() {
            let dir = [ce * ca, ce * sa, se];
            let mut best = f64::INFINITY;
            let mut target = HitTarget::Ground;
            if se < 0.0 {
                best = h / -se;
            }
            for &s in candidates {
                if let Some(t) = shapes[s].intersect(dir) {
                    if t < best {
                        best = t;
                        target = HitTarget::Agent(shapes[s].id());
                    }
                }
            }
            if best <= cfg.range_max {
                hits.push(RawHit {
                    ray: (j * channels + k) as u32,
                    point: [best * dir[0], best * dir[1], best * dir[2]],
                    distance: best,
                    dir,
                    target,
                });
            }
        }
    }
    hits
}
