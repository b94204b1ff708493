//! Planar geometry: poses, oriented boxes, convex hulls, rotating-calipers
//! rectangles and convex polygon clipping.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

pub type Vec2 = [f64; 2];

/// Wrap an angle into `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wrap an angle into `[0, π)`; boxes are symmetric under a half turn.
pub fn axis_angle(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

#[inline]
fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Default for Pose2D {
    fn default() -> Self {
        Pose2D::new(0.0, 0.0, 0.0)
    }
}

impl Pose2D {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Pose2D {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    /// Map a point given in this pose's local frame into the parent frame.
    pub fn to_parent(&self, p: Vec2) -> Vec2 {
        let (s, c) = self.yaw.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    /// Map a parent-frame point into this pose's local frame.
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        let (s, c) = self.yaw.sin_cos();
        let d = [p[0] - self.x, p[1] - self.y];
        [c * d[0] + s * d[1], -s * d[0] + c * d[1]]
    }

    /// Express `other` (a parent-frame pose) relative to `self`.
    pub fn relative(&self, other: &Pose2D) -> Pose2D {
        let p = self.to_local([other.x, other.y]);
        Pose2D::new(p[0], p[1], other.yaw - self.yaw)
    }

    /// Inverse of [`Pose2D::relative`]: lift a pose expressed in `self` into the parent frame.
    pub fn compose(&self, local: &Pose2D) -> Pose2D {
        let p = self.to_parent([local.x, local.y]);
        Pose2D::new(p[0], p[1], local.yaw + self.yaw)
    }
}

/// Rectangle in the plane: center, extent along its heading (`length`),
/// extent across it (`width`), heading `yaw`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub cx: f64,
    pub cy: f64,
    pub length: f64,
    pub width: f64,
    pub yaw: f64,
}

impl OrientedBox {
    pub fn new(cx: f64, cy: f64, length: f64, width: f64, yaw: f64) -> Self {
        OrientedBox {
            cx,
            cy,
            length,
            width,
            yaw,
        }
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.length.is_finite()
            && self.width.is_finite()
            && self.length > 0.0
            && self.width > 0.0
            && self.cx.is_finite()
            && self.cy.is_finite()
            && self.yaw.is_finite();
        if ok {
            Ok(())
        } else {
            Err(GeometryError::DegenerateBox {
                length: self.length,
                width: self.width,
            })
        }
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Vec2; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hl = 0.5 * self.length;
        let hw = 0.5 * self.width;
        let u = [c * hl, s * hl];
        let v = [-s * hw, c * hw];
        let o = [self.cx, self.cy];
        [
            [o[0] - u[0] - v[0], o[1] - u[1] - v[1]],
            [o[0] + u[0] - v[0], o[1] + u[1] - v[1]],
            [o[0] + u[0] + v[0], o[1] + u[1] + v[1]],
            [o[0] - u[0] + v[0], o[1] - u[1] + v[1]],
        ]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let local = Pose2D {
            x: self.cx,
            y: self.cy,
            yaw: self.yaw,
        }
        .to_local(p);
        local[0].abs() <= 0.5 * self.length && local[1].abs() <= 0.5 * self.width
    }

    /// Apply a rigid motion (rotation about the origin by `pose.yaw`, then translation).
    pub fn transformed(&self, pose: &Pose2D) -> OrientedBox {
        let c = pose.to_parent([self.cx, self.cy]);
        OrientedBox {
            cx: c[0],
            cy: c[1],
            yaw: self.yaw + pose.yaw,
            ..*self
        }
    }
}

/// Signed shoelace area; positive for counter-clockwise polygons.
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * acc
}

/// Sutherland–Hodgman: clip `subject` against the convex CCW polygon `clip`.
pub fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut output: Vec<Vec2> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = sub(b, a);
        let side = |p: Vec2| cross(edge, sub(p, a));
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(intersect(prev, cur, sp, sc));
                }
                output.push(cur);
            } else if sp >= 0.0 {
                output.push(intersect(prev, cur, sp, sc));
            }
        }
    }
    output
}

fn intersect(p: Vec2, q: Vec2, sp: f64, sq: f64) -> Vec2 {
    let t = sp / (sp - sq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Intersection-over-union of two oriented rectangles.
pub fn oriented_iou(a: &OrientedBox, b: &OrientedBox) -> Result<f64, GeometryError> {
    a.validate()?;
    b.validate()?;
    let inter = polygon_area(&clip_convex(&a.corners(), &b.corners())).max(0.0);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return Ok(0.0);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Andrew's monotone chain. Returns the hull counter-clockwise without
/// collinear vertices.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for &p in pts.iter() {
        while hull.len() >= 2
            && cross(
                sub(hull[hull.len() - 1], hull[hull.len() - 2]),
                sub(p, hull[hull.len() - 2]),
            ) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower
            && cross(
                sub(hull[hull.len() - 1], hull[hull.len() - 2]),
                sub(p, hull[hull.len() - 2]),
            ) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Bounding rectangle flush with one hull edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaliperRect {
    /// Unit vector along the supporting edge.
    pub axis: Vec2,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
}

impl CaliperRect {
    pub fn area(&self) -> f64 {
        (self.u_range.1 - self.u_range.0) * (self.v_range.1 - self.v_range.0)
    }

    fn normal(&self) -> Vec2 {
        [-self.axis[1], self.axis[0]]
    }

    /// Distance from `p` to the nearest side, for points inside the rectangle.
    pub fn edge_distance(&self, p: Vec2) -> f64 {
        let u = dot(p, self.axis);
        let v = dot(p, self.normal());
        (u - self.u_range.0)
            .min(self.u_range.1 - u)
            .min(v - self.v_range.0)
            .min(self.v_range.1 - v)
            .max(0.0)
    }

    /// As a box whose `length` is the longer side and `yaw` lies in `[0, π)`.
    pub fn to_box(&self) -> OrientedBox {
        let n = self.normal();
        let um = 0.5 * (self.u_range.0 + self.u_range.1);
        let vm = 0.5 * (self.v_range.0 + self.v_range.1);
        let cx = self.axis[0] * um + n[0] * vm;
        let cy = self.axis[1] * um + n[1] * vm;
        let du = self.u_range.1 - self.u_range.0;
        let dv = self.v_range.1 - self.v_range.0;
        let along = self.axis[1].atan2(self.axis[0]);
        if du >= dv {
            OrientedBox::new(cx, cy, du, dv, axis_angle(along))
        } else {
            OrientedBox::new(cx, cy, dv, du, axis_angle(along + 0.5 * PI))
        }
    }
}

/// Rotating calipers over a CCW convex hull: one flush rectangle per hull
/// edge, found in linear time by advancing the three extreme-point pointers.
pub fn caliper_rectangles(hull: &[Vec2]) -> Vec<CaliperRect> {
    let n = hull.len();
    match n {
        0 => return Vec::new(),
        1 => {
            let p = hull[0];
            return vec![CaliperRect {
                axis: [1.0, 0.0],
                u_range: (p[0], p[0]),
                v_range: (p[1], p[1]),
            }];
        }
        2 => {
            let d = sub(hull[1], hull[0]);
            let len = d[0].hypot(d[1]);
            let axis = [d[0] / len, d[1] / len];
            let normal = [-axis[1], axis[0]];
            let u0 = dot(hull[0], axis);
            let v0 = dot(hull[0], normal);
            return vec![CaliperRect {
                axis,
                u_range: (u0, u0 + len),
                v_range: (v0, v0),
            }];
        }
        _ => {}
    }

    let edge_axis = |i: usize| {
        let d = sub(hull[(i + 1) % n], hull[i]);
        let len = d[0].hypot(d[1]);
        [d[0] / len, d[1] / len]
    };
    let argmax = |f: &dyn Fn(Vec2) -> f64| {
        (0..n)
            .max_by(|&a, &b| f(hull[a]).total_cmp(&f(hull[b])))
            .unwrap_or(0)
    };

    let axis0 = edge_axis(0);
    let normal0 = [-axis0[1], axis0[0]];
    let mut right = argmax(&|p| dot(p, axis0));
    let mut top = argmax(&|p| dot(p, normal0));
    let mut left = argmax(&|p| -dot(p, axis0));

    let mut rects = Vec::with_capacity(n);
    for i in 0..n {
        let axis = edge_axis(i);
        let normal = [-axis[1], axis[0]];
        let advance = |idx: &mut usize, f: &dyn Fn(Vec2) -> f64| {
            for _ in 0..n {
                let next = (*idx + 1) % n;
                if f(hull[next]) > f(hull[*idx]) + 1e-12 {
                    *idx = next;
                } else {
                    break;
                }
            }
        };
        advance(&mut right, &|p| dot(p, axis));
        advance(&mut top, &|p| dot(p, normal));
        advance(&mut left, &|p| -dot(p, axis));
        rects.push(CaliperRect {
            axis,
            u_range: (dot(hull[left], axis), dot(hull[right], axis)),
            v_range: (dot(hull[i], normal), dot(hull[top], normal)),
        });
    }
    rects
}

/// Minimum-area enclosing rectangle of a point set.
pub fn min_area_rect(points: &[Vec2]) -> Option<OrientedBox> {
    let hull = convex_hull(points);
    caliper_rectangles(&hull)
        .into_iter()
        .min_by(|a, b| a.area().total_cmp(&b.area()))
        .map(|r| r.to_box())
}
