//! Reference obstacle shapes, the one-row porous lattice built from them,
//! and membership queries for the fluid domain.
//!
//! Points and velocities are `Complex64` throughout: `re` is the first
//! coordinate, `im` the second.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;
use thiserror::Error;

use crate::quadrature::Rect;

pub type Point = Complex64;

/// Polyline resolution used for curved boundaries and Jordan checks.
pub const BOUNDARY_RESOLUTION: usize = 2048;
/// Declared and re-measured corner angles must agree to this many radians.
pub const ANGLE_TOLERANCE: f64 = 1e-3;
const RHO_SAMPLES: usize = 1024;
const RHO_SHRINK: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("hole size and spacing must be positive (epsilon = {epsilon}, d_eps = {d_eps})")]
    NonPositiveScale { epsilon: f64, d_eps: f64 },
    #[error("one-sided tangents do not settle at parameter {param}")]
    DegenerateBoundary { param: f64 },
    #[error("corner {index}: declared angle {declared} but measured {measured}")]
    AngleMismatch { index: usize, declared: f64, measured: f64 },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    Disk,
    /// Counterclockwise vertex list.
    Polygon(Vec<Point>),
    /// Closed polyline read from data; corners are detected from turning.
    Custom(Vec<Point>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    /// Arclength parameter of the corner.
    pub param: f64,
    pub point: Point,
    /// Opening angle on the fluid side, radians.
    pub angle: f64,
}

/// A compact obstacle `K ⊂ [-1,1]²` with a counterclockwise boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleShape {
    pub name: String,
    pub kind: ShapeKind,
    pub corners: Vec<Corner>,
    /// Wedge slope at `(1, 0)`, present when a corner sits there.
    pub wedge_rho: Option<f64>,
    perimeter: f64,
}

fn fluid_angle(incoming: Complex64, outgoing: Complex64) -> f64 {
    let turn = (incoming.re * outgoing.im - incoming.im * outgoing.re)
        .atan2(incoming.re * outgoing.re + incoming.im * outgoing.im);
    PI + turn
}

fn wrap(s: f64, period: f64) -> f64 {
    s - period * (s / period).floor()
}

fn polyline_perimeter(v: &[Point]) -> f64 {
    (0..v.len()).map(|i| (v[(i + 1) % v.len()] - v[i]).norm()).sum()
}

fn signed_area(v: &[Point]) -> f64 {
    0.5 * (0..v.len())
        .map(|i| {
            let a = v[i];
            let b = v[(i + 1) % v.len()];
            a.re * b.im - a.im * b.re
        })
        .sum::<f64>()
}

fn is_right_tip(p: Point) -> bool {
    (p - Complex64::new(1.0, 0.0)).norm() < 1e-9
}

impl ObstacleShape {
    /// Closed unit disk.
    pub fn disk() -> Self {
        Self { name: "disk".into(), kind: ShapeKind::Disk, corners: Vec::new(), wedge_rho: None, perimeter: 2.0 * PI }
    }

    /// Square with vertices `(±1,0)`, `(0,±1)`.
    pub fn square() -> Self {
        let mut s = Self::regular_polygon(4).expect("square is valid");
        s.name = "square".into();
        s
    }

    /// Regular `n`-gon inscribed in the unit circle with a vertex at `(1,0)`.
    pub fn regular_polygon(n: usize) -> Result<Self, GeometryError> {
        if n < 3 {
            return Err(GeometryError::InvalidShape(format!("regular polygon needs n >= 3, got {n}")));
        }
        let v: Vec<Point> = (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)).collect();
        let mut s = Self::polygon(v)?;
        s.name = format!("regular-polygon:{n}");
        Ok(s)
    }

    /// Polygon from vertices; orientation is normalized to counterclockwise
    /// and the list rotated so that a vertex at `(1,0)` comes first.
    pub fn polygon(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidShape("polygon needs at least 3 vertices".into()));
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        if let Some(k) = vertices.iter().position(|p| is_right_tip(*p)) {
            vertices.rotate_left(k);
        }
        let n = vertices.len();
        let mut corners = Vec::with_capacity(n);
        let mut param = 0.0;
        for k in 0..n {
            let prev = vertices[(k + n - 1) % n];
            let next = vertices[(k + 1) % n];
            let angle = fluid_angle(vertices[k] - prev, next - vertices[k]);
            corners.push(Corner { param, point: vertices[k], angle });
            param += (next - vertices[k]).norm();
        }
        let perimeter = polyline_perimeter(&vertices);
        let mut shape = Self { name: "polygon".into(), kind: ShapeKind::Polygon(vertices), corners, wedge_rho: None, perimeter };
        shape.wedge_rho = shape.estimate_rho();
        Ok(shape)
    }

    /// Closed polyline from data. Vertices turning by more than
    /// `corner_turn` radians are declared corners.
    pub fn custom(name: &str, mut points: Vec<Point>, corner_turn: f64) -> Result<Self, GeometryError> {
        if points.len() < 3 {
            return Err(GeometryError::InvalidShape("custom boundary needs at least 3 points".into()));
        }
        if signed_area(&points) < 0.0 {
            points.reverse();
        }
        if let Some(k) = points.iter().position(|p| is_right_tip(*p)) {
            points.rotate_left(k);
        }
        let n = points.len();
        let mut corners = Vec::new();
        let mut param = 0.0;
        for k in 0..n {
            let prev = points[(k + n - 1) % n];
            let next = points[(k + 1) % n];
            let angle = fluid_angle(points[k] - prev, next - points[k]);
            if (angle - PI).abs() > corner_turn {
                corners.push(Corner { param, point: points[k], angle });
            }
            param += (next - points[k]).norm();
        }
        let perimeter = polyline_perimeter(&points);
        let mut shape = Self { name: format!("custom:{name}"), kind: ShapeKind::Custom(points), corners, wedge_rho: None, perimeter };
        shape.wedge_rho = shape.estimate_rho();
        Ok(shape)
    }

    /// Replace the declared corner angles (re-measurement happens in
    /// [`check_hypotheses`]).
    pub fn with_declared_angles(mut self, angles: &[f64]) -> Self {
        for (c, a) in self.corners.iter_mut().zip(angles) {
            c.angle = *a;
        }
        self
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn vertices(&self) -> Option<&[Point]> {
        match &self.kind {
            ShapeKind::Disk => None,
            ShapeKind::Polygon(v) | ShapeKind::Custom(v) => Some(v),
        }
    }

    /// Boundary point at arclength `s` (taken modulo the perimeter).
    pub fn boundary_point(&self, s: f64) -> Point {
        let s = wrap(s, self.perimeter);
        match &self.kind {
            ShapeKind::Disk => Complex64::from_polar(1.0, s),
            ShapeKind::Polygon(v) | ShapeKind::Custom(v) => {
                let mut acc = 0.0;
                for k in 0..v.len() {
                    let a = v[k];
                    let b = v[(k + 1) % v.len()];
                    let len = (b - a).norm();
                    if s <= acc + len || k == v.len() - 1 {
                        let t = ((s - acc) / len).clamp(0.0, 1.0);
                        return a + (b - a) * t;
                    }
                    acc += len;
                }
                v[0]
            }
        }
    }

    /// Outward unit normal at arclength `s` (one-sided, from the segment
    /// starting at `s`, for polygons).
    pub fn outward_normal(&self, s: f64) -> Complex64 {
        match &self.kind {
            ShapeKind::Disk => Complex64::from_polar(1.0, wrap(s, 2.0 * PI)),
            _ => {
                let h = 1e-9 * self.perimeter;
                let t = self.boundary_point(s + h) - self.boundary_point(s - h);
                let t = t / t.norm();
                // ccw boundary: outward normal is the tangent rotated by -90°
                Complex64::new(t.im, -t.re)
            }
        }
    }

    /// `n` equispaced arclength nodes `(s, point)`.
    pub fn boundary_nodes(&self, n: usize) -> Vec<(f64, Point)> {
        (0..n)
            .map(|k| {
                let s = self.perimeter * (k as f64 + 0.5) / n as f64;
                (s, self.boundary_point(s))
            })
            .collect()
    }

    /// Boundary polyline used for winding and intersection tests.
    pub fn polyline(&self) -> Vec<Point> {
        match &self.kind {
            ShapeKind::Disk => (0..BOUNDARY_RESOLUTION)
                .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / BOUNDARY_RESOLUTION as f64))
                .collect(),
            ShapeKind::Polygon(v) | ShapeKind::Custom(v) => v.clone(),
        }
    }

    /// Closed-set membership `p ∈ K`; boundary points count as inside.
    pub fn contains(&self, p: Point) -> bool {
        match &self.kind {
            ShapeKind::Disk => p.norm() <= 1.0 + 1e-12,
            ShapeKind::Polygon(v) | ShapeKind::Custom(v) => winding_contains(v, p),
        }
    }

    pub fn bounding_box(&self) -> Rect {
        match &self.kind {
            ShapeKind::Disk => Rect::new(-1.0, 1.0, -1.0, 1.0),
            ShapeKind::Polygon(v) | ShapeKind::Custom(v) => {
                let mut r = Rect::new(v[0].re, v[0].re, v[0].im, v[0].im);
                for p in v {
                    r.x0 = r.x0.min(p.re);
                    r.x1 = r.x1.max(p.re);
                    r.y0 = r.y0.min(p.im);
                    r.y1 = r.y1.max(p.im);
                }
                r
            }
        }
    }

    pub fn area(&self) -> f64 {
        match &self.kind {
            ShapeKind::Disk => PI,
            ShapeKind::Polygon(v) | ShapeKind::Custom(v) => signed_area(v).abs(),
        }
    }

    /// Horizontal chord of `K` at height `s`: `(min x, max x)`, or `None`
    /// when the line misses `K`.
    pub fn chord(&self, s: f64) -> Option<(f64, f64)> {
        match &self.kind {
            ShapeKind::Disk => {
                if s.abs() > 1.0 {
                    None
                } else {
                    let h = (1.0 - s * s).max(0.0).sqrt();
                    Some((-h, h))
                }
            }
            ShapeKind::Polygon(v) | ShapeKind::Custom(v) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for k in 0..v.len() {
                    let a = v[k];
                    let b = v[(k + 1) % v.len()];
                    let (ymin, ymax) = (a.im.min(b.im), a.im.max(b.im));
                    if s < ymin || s > ymax {
                        continue;
                    }
                    if (b.im - a.im).abs() < 1e-300 {
                        lo = lo.min(a.re.min(b.re));
                        hi = hi.max(a.re.max(b.re));
                    } else {
                        let t = (s - a.im) / (b.im - a.im);
                        let x = a.re + t * (b.re - a.re);
                        lo = lo.min(x);
                        hi = hi.max(x);
                    }
                }
                if lo.is_finite() {
                    Some((lo, hi))
                } else {
                    None
                }
            }
        }
    }

    /// Distance from the origin to the boundary (radius of the largest
    /// centered disk inside `K` when the origin is interior).
    pub fn inner_radius(&self) -> f64 {
        if !self.contains(Complex64::new(0.0, 0.0)) {
            return 0.0;
        }
        match &self.kind {
            ShapeKind::Disk => 1.0,
            ShapeKind::Polygon(v) | ShapeKind::Custom(v) => (0..v.len())
                .map(|k| segment_distance(Complex64::new(0.0, 0.0), v[k], v[(k + 1) % v.len()]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Distance from `p` to the boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match &self.kind {
            ShapeKind::Disk => (p.norm() - 1.0).abs(),
            ShapeKind::Polygon(v) | ShapeKind::Custom(v) => (0..v.len())
                .map(|k| segment_distance(p, v[k], v[(k + 1) % v.len()]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn has_right_tip_corner(&self) -> bool {
        self.corners.iter().any(|c| is_right_tip(c.point))
    }

    /// Largest wedge slope passing on sampled heights, shrunk by 10%.
    fn estimate_rho(&self) -> Option<f64> {
        if !self.has_right_tip_corner() {
            return None;
        }
        let rho = self.raw_wedge_slope();
        if rho > 0.0 {
            Some(RHO_SHRINK * rho)
        } else {
            None
        }
    }

    fn raw_wedge_slope(&self) -> f64 {
        let mut rho = f64::INFINITY;
        for k in 0..RHO_SAMPLES {
            let s = -1.0 + 2.0 * (k as f64 + 0.5) / RHO_SAMPLES as f64;
            if s == 0.0 {
                continue;
            }
            if let Some((_, hi)) = self.chord(s) {
                rho = rho.min((1.0 - hi) / s.abs());
            }
        }
        rho
    }

    /// Corner-separation radius: a sixth of the smallest corner distance.
    pub fn corner_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.corners.iter().enumerate() {
            for b in self.corners.iter().skip(i + 1) {
                best = best.min((a.point - b.point).norm());
            }
        }
        best / 6.0
    }

    /// True when `K` is mirror symmetric about the horizontal axis.
    pub fn is_vertically_symmetric(&self) -> bool {
        (0..64).all(|k| {
            let s = (k as f64 + 0.5) / 64.0;
            match (self.chord(s), self.chord(-s)) {
                (Some(a), Some(b)) => (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9,
                (None, None) => true,
                _ => false,
            }
        })
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Winding-number membership for a closed polyline; points within `1e-12`
/// of an edge count as inside.
pub fn winding_contains(v: &[Point], p: Point) -> bool {
    let n = v.len();
    let mut winding = 0i32;
    for k in 0..n {
        let a = v[k];
        let b = v[(k + 1) % n];
        if segment_distance(p, a, b) <= 1e-12 {
            return true;
        }
        let cross = (b.re - a.re) * (p.im - a.im) - (p.re - a.re) * (b.im - a.im);
        if a.im <= p.im {
            if b.im > p.im && cross > 0.0 {
                winding += 1;
            }
        } else if b.im <= p.im && cross < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q.re - p.re) * (r.im - p.im) - (q.im - p.im) * (r.re - p.re);
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub passed: bool,
    /// Human-readable witness of the failure (or a note on a pass).
    pub witness: Option<String>,
}

impl HypothesisCheck {
    fn pass() -> Self {
        Self { passed: true, witness: None }
    }
    fn fail(w: String) -> Self {
        Self { passed: false, witness: Some(w) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    /// Jordan curve, piecewise regular away from finitely many corners.
    pub jordan: HypothesisCheck,
    /// Corner at `(1,0)` with a wedge bound.
    pub wedge: HypothesisCheck,
    /// Every corner angle in `(π, 2π)`.
    pub corner_angles: HypothesisCheck,
    pub measured_angles: Vec<f64>,
    pub rho: Option<f64>,
    pub inner_radius: f64,
    pub fits_unit_box: bool,
    pub symmetric: bool,
    pub notes: Vec<String>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.jordan.passed && self.wedge.passed && self.corner_angles.passed
    }
}

/// Fluid angle at a corner re-measured from secant tangents at shrinking
/// offsets.
pub fn measure_corner_angle(shape: &ObstacleShape, param: f64) -> Result<f64, GeometryError> {
    let x = shape.boundary_point(param);
    let mut prev: Option<f64> = None;
    let mut last = 0.0;
    for h in [1e-3, 1e-4, 1e-5] {
        let h = h * shape.perimeter();
        let incoming = x - shape.boundary_point(param - h);
        let outgoing = shape.boundary_point(param + h) - x;
        if incoming.norm() == 0.0 || outgoing.norm() == 0.0 {
            return Err(GeometryError::DegenerateBoundary { param });
        }
        let a = fluid_angle(incoming, outgoing);
        if let Some(p) = prev {
            if (a - p).abs() > ANGLE_TOLERANCE {
                return Err(GeometryError::DegenerateBoundary { param });
            }
        }
        prev = Some(a);
        last = a;
    }
    Ok(last)
}

/// Checks the Jordan, wedge and corner-angle hypotheses on `shape`.
pub fn check_hypotheses(shape: &ObstacleShape) -> Result<HypothesisReport, GeometryError> {
    let mut notes = Vec::new();
    let poly = shape.polyline();
    let n = poly.len();
    let mut jordan = HypothesisCheck::pass();
    if !matches!(shape.kind, ShapeKind::Disk) {
        'outer: for i in 0..n {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                    jordan = HypothesisCheck::fail(format!("edges {i} and {j} intersect"));
                    break 'outer;
                }
            }
        }
    }

    let mut measured = Vec::with_capacity(shape.corners.len());
    for (k, c) in shape.corners.iter().enumerate() {
        let m = measure_corner_angle(shape, c.param)?;
        if (m - c.angle).abs() > ANGLE_TOLERANCE {
            return Err(GeometryError::AngleMismatch { index: k, declared: c.angle, measured: m });
        }
        measured.push(m);
    }

    let mut corner_angles = HypothesisCheck::pass();
    for (k, a) in measured.iter().enumerate() {
        if !(*a > PI && *a < 2.0 * PI) {
            corner_angles = HypothesisCheck::fail(format!("corner {k} has fluid angle {a:.6} outside (pi, 2pi)"));
            break;
        }
    }
    if measured.is_empty() {
        notes.push("no corners declared; corner-angle condition holds vacuously".into());
    }

    let wedge = if !shape.has_right_tip_corner() {
        notes.push("no corner at (1,0)".into());
        HypothesisCheck::fail("no corner at (1,0)".into())
    } else {
        let raw = shape.raw_wedge_slope();
        if raw > 0.0 {
            HypothesisCheck::pass()
        } else {
            HypothesisCheck::fail(format!("wedge slope estimate {raw:.3e} is not positive"))
        }
    };

    let bb = shape.bounding_box();
    let fits_unit_box = bb.x0 >= -1.0 - 1e-12 && bb.x1 <= 1.0 + 1e-12 && bb.y0 >= -1.0 - 1e-12 && bb.y1 <= 1.0 + 1e-12;
    if !fits_unit_box {
        notes.push("shape does not fit in [-1,1]^2".into());
    }
    let inner_radius = shape.inner_radius();
    if inner_radius <= 0.0 {
        notes.push("no disk around the origin inside the shape".into());
    }
    let symmetric = shape.is_vertically_symmetric();
    if !symmetric {
        notes.push("shape is not symmetric about the horizontal axis".into());
    }
    if jordan.passed && !(fits_unit_box && inner_radius > 0.0) {
        jordan = HypothesisCheck::fail("shape must fit [-1,1]^2 and contain a disk around the origin".into());
    }

    Ok(HypothesisReport {
        jordan,
        wedge,
        corner_angles,
        measured_angles: measured,
        rho: shape.wedge_rho,
        inner_radius,
        fits_unit_box,
        symmetric,
        notes,
    })
}

/// `N_ε` copies `z_i + (ε/2) K` spread along the unit segment.
#[derive(Debug, Clone)]
pub struct PorousLattice {
    pub epsilon: f64,
    pub d_eps: f64,
    pub n_holes: usize,
    pub centers: Vec<Point>,
    pub shape: Arc<ObstacleShape>,
}

/// `[(1 + d) / (ε + d)]`, robust to round-off when the ratio is integral.
pub fn hole_count(epsilon: f64, d_eps: f64) -> usize {
    let r = (1.0 + d_eps) / (epsilon + d_eps);
    let mut n = r.floor();
    if (n + 1.0) * (epsilon + d_eps) <= (1.0 + d_eps) * (1.0 + 8.0 * f64::EPSILON) {
        n += 1.0;
    }
    n.max(0.0) as usize
}

pub fn build_lattice(shape: Arc<ObstacleShape>, epsilon: f64, d_eps: f64) -> Result<PorousLattice, GeometryError> {
    if !(epsilon > 0.0) || !(d_eps > 0.0) {
        return Err(GeometryError::NonPositiveScale { epsilon, d_eps });
    }
    let n_holes = hole_count(epsilon, d_eps);
    let centers = (0..n_holes)
        .map(|i| Complex64::new(0.5 * epsilon + i as f64 * (epsilon + d_eps), 0.0))
        .collect();
    Ok(PorousLattice { epsilon, d_eps, n_holes, centers, shape })
}

impl PorousLattice {
    pub fn half_eps(&self) -> f64 {
        0.5 * self.epsilon
    }

    pub fn period(&self) -> f64 {
        self.epsilon + self.d_eps
    }

    /// Reference coordinates of `x` for hole `i`: `(x - z_i) / (ε/2)`.
    pub fn to_reference(&self, i: usize, x: Point) -> Point {
        (x - self.centers[i]) / self.half_eps()
    }

    pub fn from_reference(&self, i: usize, p: Point) -> Point {
        self.centers[i] + p * self.half_eps()
    }

    /// Index of the hole containing `x` (closed), if any.
    pub fn hole_at(&self, x: Point) -> Option<usize> {
        if self.n_holes == 0 {
            return None;
        }
        let guess = ((x.re - self.half_eps()) / self.period()).round();
        let lo = (guess - 1.0).max(0.0) as usize;
        let hi = ((guess + 1.0).max(0.0) as usize).min(self.n_holes - 1);
        (lo..=hi).find(|&i| self.shape.contains(self.to_reference(i, x)))
    }

    /// True iff `x` lies outside every closed inclusion.
    pub fn in_fluid(&self, x: Point) -> bool {
        self.hole_at(x).is_none()
    }

    pub fn hole_box(&self, i: usize) -> Rect {
        let b = self.shape.bounding_box();
        let h = self.half_eps();
        let c = self.centers[i];
        Rect::new(c.re + h * b.x0, c.re + h * b.x1, c.im + h * b.y0, c.im + h * b.y1)
    }

    pub fn hole_boxes(&self) -> impl Iterator<Item = Rect> + '_ {
        (0..self.n_holes).map(move |i| self.hole_box(i))
    }

    /// Boundary nodes of hole `i` with outward normals.
    pub fn hole_boundary_nodes(&self, i: usize, n: usize) -> Vec<(Point, Complex64)> {
        self.shape
            .boundary_nodes(n)
            .into_iter()
            .map(|(s, p)| (self.from_reference(i, p), self.shape.outward_normal(s)))
            .collect()
    }

    /// Closed polyline at distance `offset` outside hole `i`, with the
    /// offset corner points included so chords stay in the fluid near
    /// convex corners.
    pub fn hole_contour(&self, i: usize, n: usize, offset: f64) -> Vec<Point> {
        let off = offset / self.half_eps();
        let mut pts: Vec<(f64, Point)> =
            self.shape.boundary_nodes(n).into_iter().map(|(s, p)| (s, p + self.shape.outward_normal(s) * off)).collect();
        let h = 1e-9 * self.shape.perimeter;
        for c in &self.shape.corners {
            let n1 = self.shape.outward_normal(c.param - h);
            let n2 = self.shape.outward_normal(c.param + h);
            let cos = (n1 * n2.conj()).re;
            pts.push((c.param, c.point + (n1 + n2) * (off / (1.0 + cos))));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.into_iter().map(|(_, p)| self.from_reference(i, p)).collect()
    }

    /// Minimal gap between consecutive holes measured on boundary nodes.
    pub fn min_gap_sampled(&self, nodes: usize) -> f64 {
        if self.n_holes < 2 {
            return f64::INFINITY;
        }
        let a: Vec<Point> = self.shape.boundary_nodes(nodes).into_iter().map(|(_, p)| self.from_reference(0, p)).collect();
        let shift = Complex64::new(self.period(), 0.0);
        let mut best = f64::INFINITY;
        for p in &a {
            for q in &a {
                best = best.min((q + shift - p).norm());
            }
        }
        best
    }
}

/// Point list helper for tests and callers that need every hole's boundary.
pub fn lattice_boundary(lattice: &PorousLattice, nodes_per_hole: usize) -> Vec<Point> {
    let mut out = vec![];
    for i in 0..lattice.n_holes {
        out.extend(lattice.hole_boundary_nodes(i, nodes_per_hole).into_iter().map(|(p, _)| p));
    }
    out
}
