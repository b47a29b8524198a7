//! Ground-plane geometry: object footprints, convex clipping, overlap areas,
//! the object overlap rate and floor containment.
//!
//! All coordinates are meters on the z-up ground plane. Footprint
//! intersections are computed by Sutherland-Hodgman clipping against the
//! four half-planes of an oriented rectangle followed by a shoelace area.

use std::cmp::Ordering;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{BoxSize, FloorPlan, Layout, Placement};

/// Tolerance for point-on-edge classification, in meters.
pub const EPS: f64 = 1e-9;

/// Areas at or below this value are reported as zero.
pub const AREA_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("layout has no objects")]
    EmptyLayout,
    #[error("polygon has zero area")]
    Degenerate,
}

/// A point on the ground plane. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, other: Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Point2) -> Point2 {
        Point2::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        self.sub(other).norm()
    }

    /// Rotates the vector counter-clockwise by `angle` radians.
    pub fn rotate(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// How an object's footprint is derived from its placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FootprintMode {
    /// Rectangle rotated by the object's rotation.
    #[default]
    Oriented,
    /// Axis-aligned bounds of the rotated rectangle.
    AxisAligned,
}

impl std::str::FromStr for FootprintMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oriented" => Ok(Self::Oriented),
            "axis_aligned" | "axis-aligned" => Ok(Self::AxisAligned),
            other => Err(format!("unknown footprint mode `{other}`")),
        }
    }
}

/// An object's ground-plane footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect2D {
    pub center: Point2,
    pub half_width: f64,
    pub half_depth: f64,
    pub angle: f64,
}

impl OrientedRect2D {
    pub fn new(center: Point2, half_width: f64, half_depth: f64, angle: f64) -> Self {
        Self {
            center,
            half_width,
            half_depth,
            angle,
        }
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_width * self.half_depth
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Point2; 4] {
        let (hw, hd) = (self.half_width, self.half_depth);
        [
            Point2::new(-hw, -hd),
            Point2::new(hw, -hd),
            Point2::new(hw, hd),
            Point2::new(-hw, hd),
        ]
        .map(|p| self.center.add(p.rotate(self.angle)))
    }

    pub fn to_polygon(&self) -> Polygon2D {
        Polygon2D::new(self.corners().to_vec())
    }

    /// True if `p` lies inside or on the boundary (within [`EPS`]).
    pub fn contains(&self, p: Point2) -> bool {
        let local = p.sub(self.center).rotate(-self.angle);
        local.x.abs() <= self.half_width + EPS && local.y.abs() <= self.half_depth + EPS
    }

    /// Half extents of the axis-aligned bounds.
    pub fn aabb_half_extents(&self) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        let hx = self.half_width * c.abs() + self.half_depth * s.abs();
        let hy = self.half_width * s.abs() + self.half_depth * c.abs();
        (hx, hy)
    }

    fn order_key(&self) -> [f64; 5] {
        [
            self.center.x,
            self.center.y,
            self.half_width,
            self.half_depth,
            self.angle,
        ]
    }
}

/// A polygon given by its vertex ring. An empty vertex list is the empty set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polygon2D {
    pub vertices: Vec<Point2>,
}

impl Polygon2D {
    pub fn new(vertices: Vec<Point2>) -> Self {
        Self { vertices }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Shoelace sum halved; positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    /// Even-odd point-in-polygon test. Points on the boundary may land either way.
    pub fn contains(&self, p: Point2) -> bool {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return false;
        }
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (v[i], v[j]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// True if no two non-adjacent edges intersect and no adjacent edges fold back.
    pub fn is_simple(&self) -> bool {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            let (a1, a2) = (v[i], v[(i + 1) % n]);
            if a1.distance(a2) <= EPS {
                return false;
            }
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (b1, b2) = (v[j], v[(j + 1) % n]);
                if adjacent {
                    // Adjacent edges share one vertex; they must not overlap collinearly.
                    let shared = if j == i + 1 { a2 } else { a1 };
                    let a_other = if j == i + 1 { a1 } else { a2 };
                    let b_other = if j == i + 1 { b2 } else { b1 };
                    let d1 = a_other.sub(shared);
                    let d2 = b_other.sub(shared);
                    if d1.cross(d2).abs() <= EPS * d1.norm() * d2.norm() && d1.dot(d2) > 0.0 {
                        return false;
                    }
                } else if segments_intersect(a1, a2, b1, b2) {
                    return false;
                }
            }
        }
        true
    }

    /// Axis-aligned bounds as `(min, max)`; `None` when empty.
    pub fn bounds(&self) -> Option<(Point2, Point2)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        }))
    }
}

fn signed_area(v: &[Point2]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        sum += v[i].cross(v[(i + 1) % n]);
    }
    0.5 * sum
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    b.sub(a).cross(c.sub(a))
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) - EPS
        && p.x <= a.x.max(b.x) + EPS
        && p.y >= a.y.min(b.y) - EPS
        && p.y <= a.y.max(b.y) + EPS
}

/// Closed-segment intersection test, including touching and collinear overlap.
pub fn segments_intersect(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    let sign = |d: f64| {
        if d.abs() <= EPS {
            0
        } else if d > 0.0 {
            1
        } else {
            -1
        }
    };
    let (s1, s2, s3, s4) = (sign(d1), sign(d2), sign(d3), sign(d4));
    if s1 * s2 < 0 && s3 * s4 < 0 {
        return true;
    }
    (s1 == 0 && on_segment(b1, b2, a1))
        || (s2 == 0 && on_segment(b1, b2, a2))
        || (s3 == 0 && on_segment(a1, a2, b1))
        || (s4 == 0 && on_segment(a1, a2, b2))
}

/// Builds the footprint of an object with the given placement and box size.
pub fn footprint(placement: &Placement, size: &BoxSize, mode: FootprintMode) -> OrientedRect2D {
    let center = Point2::new(placement.position.x, placement.position.y);
    let rect = OrientedRect2D::new(
        center,
        size.width / 2.0,
        size.depth / 2.0,
        placement.rotation(),
    );
    match mode {
        FootprintMode::Oriented => rect,
        FootprintMode::AxisAligned => {
            let (hx, hy) = rect.aabb_half_extents();
            OrientedRect2D::new(center, hx, hy, 0.0)
        }
    }
}

/// Absolute polygon area; zero for fewer than three vertices.
pub fn polygon_area(p: &Polygon2D) -> f64 {
    signed_area(&p.vertices).abs()
}

/// Clips `subject` against the left half-plane of the directed edge `a -> b`.
fn clip_halfplane(subject: &[Point2], a: Point2, b: Point2) -> Vec<Point2> {
    let n = subject.len();
    let mut out = Vec::with_capacity(n + 2);
    if n == 0 {
        return out;
    }
    let edge = b.sub(a);
    let len = edge.norm();
    // Signed distance to the edge line, positive inside.
    let dist = |p: Point2| edge.cross(p.sub(a)) / len;
    for i in 0..n {
        let s = subject[i];
        let e = subject[(i + 1) % n];
        let (ds, de) = (dist(s), dist(e));
        let (s_in, e_in) = (ds >= -EPS, de >= -EPS);
        match (s_in, e_in) {
            (true, true) => out.push(e),
            (true, false) | (false, true) => {
                let denom = ds - de;
                if denom.abs() > f64::MIN_POSITIVE {
                    let t = ds / denom;
                    out.push(s.add(e.sub(s).scale(t)));
                }
                if e_in {
                    out.push(e);
                }
            }
            (false, false) => {}
        }
    }
    out
}

/// Intersection of `subject` with the rectangle `clip`.
///
/// Exact for convex subjects. Non-convex subjects may produce zero-width
/// bridges along the rectangle boundary; the area of the result is still
/// correct.
pub fn convex_clip(subject: &Polygon2D, clip: &OrientedRect2D) -> Polygon2D {
    if subject.is_empty() {
        return Polygon2D::empty();
    }
    let corners = clip.corners();
    let mut ring = subject.vertices.clone();
    for i in 0..4 {
        ring = clip_halfplane(&ring, corners[i], corners[(i + 1) % 4]);
        if ring.len() < 3 {
            return Polygon2D::empty();
        }
    }
    ring.dedup_by(|a, b| a.distance(*b) <= EPS);
    if ring.len() > 1 && ring[0].distance(ring[ring.len() - 1]) <= EPS {
        ring.pop();
    }
    if ring.len() < 3 {
        Polygon2D::empty()
    } else {
        Polygon2D::new(ring)
    }
}

/// Area of the intersection of two footprints. Exactly symmetric in its arguments.
pub fn overlap_area(a: &OrientedRect2D, b: &OrientedRect2D) -> f64 {
    // Quick reject on bounding circles.
    let ra = a.half_width.hypot(a.half_depth);
    let rb = b.half_width.hypot(b.half_depth);
    if a.center.distance(b.center) > ra + rb {
        return 0.0;
    }
    // Canonical argument order keeps the floating-point result symmetric.
    let (subject, clip) = match a
        .order_key()
        .partial_cmp(&b.order_key())
        .unwrap_or(Ordering::Equal)
    {
        Ordering::Greater => (b, a),
        _ => (a, b),
    };
    let area = convex_clip(&subject.to_polygon(), clip).area();
    if area <= AREA_EPS {
        0.0
    } else {
        area.min(a.area()).min(b.area())
    }
}

/// Footprints of every object in the layout, in object order.
pub fn footprints(layout: &Layout, mode: FootprintMode) -> Vec<OrientedRect2D> {
    layout
        .objects
        .iter()
        .map(|o| footprint(&o.placement, &o.size, mode))
        .collect()
}

/// Object overlap rate: the summed pairwise intersection area divided by
/// the summed footprint area. Not clamped; it can exceed 1 when three or
/// more footprints overlap.
pub fn oor(layout: &Layout, mode: FootprintMode) -> Result<f64, GeometryError> {
    if layout.objects.is_empty() {
        return Err(GeometryError::EmptyLayout);
    }
    let rects = footprints(layout, mode);
    Ok(oor_of_rects(&rects))
}

pub(crate) fn oor_of_rects(rects: &[OrientedRect2D]) -> f64 {
    let total: f64 = rects.iter().map(OrientedRect2D::area).sum();
    let mut inter = 0.0;
    for i in 0..rects.len() {
        for j in (i + 1)..rects.len() {
            inter += overlap_area(&rects[i], &rects[j]);
        }
    }
    inter / total
}

/// Footprint area lying outside the floor polygon.
///
/// Clips the floor against the rectangle and subtracts, so non-convex floors
/// are handled. Returns 0 when the footprint is inside to within [`AREA_EPS`].
pub fn containment_violation(rect: &OrientedRect2D, floor: &FloorPlan) -> f64 {
    let inside = convex_clip(&floor.polygon(), rect).area();
    let outside = rect.area() - inside;
    if outside <= AREA_EPS {
        0.0
    } else {
        outside
    }
}

/// Area-weighted centroid of a polygon.
pub fn polygon_centroid(p: &Polygon2D) -> Result<Point2, GeometryError> {
    let v = &p.vertices;
    let n = v.len();
    if n < 3 {
        return Err(GeometryError::Degenerate);
    }
    // Moments relative to the first vertex keep the sums well conditioned.
    let origin = v[0];
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p0 = v[i].sub(origin);
        let p1 = v[(i + 1) % n].sub(origin);
        let c = p0.cross(p1);
        a2 += c;
        cx += (p0.x + p1.x) * c;
        cy += (p0.y + p1.y) * c;
    }
    if a2.abs() <= AREA_EPS {
        return Err(GeometryError::Degenerate);
    }
    Ok(Point2::new(origin.x + cx / (3.0 * a2), origin.y + cy / (3.0 * a2)))
}

/// True when `angle` is a multiple of π/2 up to `tol`.
pub fn is_right_angle_multiple(angle: f64, tol: f64) -> bool {
    let k = (angle / FRAC_PI_2).round();
    (angle - k * FRAC_PI_2).abs() <= tol
}
