//! Exterior Riemann maps `T: K^c → {|ζ| > 1}` with `T(z) = βz + h(z)`.
//!
//! Polygons go through the exterior Schwarz–Christoffel representation of
//! the inverse map `g = T⁻¹`,
//!
//! ```text
//! g'(ζ) = C ∏ (1 − ζ_k/ζ)^{a_k},   a_k = θ_k/π − 1,   C = 1/β,
//! ```
//!
//! with prevertices `ζ_k` on the unit circle. The forward map is obtained by
//! damped Newton on `g`. The disk maps by the identity.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{check_hypotheses, GeometryError, ObstacleShape, Point, ShapeKind};
use crate::quadrature::{adaptive, GaussRule, QuadratureError};

const SERIES_RADIUS: f64 = 1.5;
const SERIES_TERMS: usize = 160;
const EDGE_NODES: usize = 32;
const SOLVE_TOL: f64 = 1e-10;
const SOLVE_MAX_ITER: usize = 80;
const NEWTON_MAX_ITER: usize = 80;
const GUESS_RADII: [f64; 14] = [0.0, 1e-4, 1e-3, 4e-3, 0.01, 0.025, 0.05, 0.1, 0.18, 0.3, 0.5, 0.8, 1.2, 2.0];
const GUESS_ANGLES: usize = 256;
/// Probe ray range for corner exponents.
pub const PROBE_R_MIN: f64 = 1e-4;
pub const PROBE_R_MAX: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConformalError {
    #[error("exterior map parameter solve stalled at residual {residual:.3e}")]
    ParameterProblemDiverged { residual: f64 },
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),
    #[error("shape violates the map hypotheses: {0}")]
    HypothesisViolated(String),
    #[error("the origin has no conjugate point")]
    OriginConjugate,
    #[error("probe ray from corner {corner} enters the obstacle at r = {r:.3e}")]
    RayExitsDomain { corner: usize, r: f64 },
    #[error("shape has no corner {0}")]
    NoSuchCorner(usize),
    #[error("point ({re}, {im}) lies inside the obstacle")]
    InsideObstacle { re: f64, im: f64 },
    #[error("point ({re}, {im}) lies inside the unit disk")]
    InsideUnitDisk { re: f64, im: f64 },
    #[error("forward map did not converge at ({re}, {im}), residual {residual:.3e}")]
    NotConverged { re: f64, im: f64, residual: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
}

/// Public description of how a map is represented.
#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    Identity,
    ExteriorSC { prevertices: Vec<Complex64>, exponents: Vec<f64> },
}

/// Solved Schwarz–Christoffel data for a polygon exterior.
#[derive(Debug, Clone)]
struct ScMap {
    prevertices: Vec<Complex64>,
    exponents: Vec<f64>,
    vertices: Vec<Point>,
    scale: f64,
    offset: Complex64,
    /// `q_m` with `g = offset + C(ζ + Σ q_m ζ^{1-m})`, index `m - 2`.
    laurent: Vec<Complex64>,
    /// `(ζ, g(ζ))` table used to seed Newton.
    guesses: Vec<(Complex64, Complex64)>,
    guess_extent: f64,
    /// `C ζ_k ∏_{j≠k}(1 − ζ_j/ζ_k)^{a_j}`: `g ≈ v_k + F_k s^{α_k}/α_k` with
    /// `ζ = ζ_k(1 + s)`.
    corner_factors: Vec<Complex64>,
    corner_radius: f64,
    shape: Arc<ObstacleShape>,
}

#[derive(Debug, Clone)]
pub struct ConformalMap {
    kind: MapKind,
    beta: f64,
    remainder_bound: f64,
    sc: Option<ScMap>,
}

/// `y / |y|²`.
pub fn conjugate_point(y: Point) -> Result<Point, ConformalError> {
    let n2 = y.norm_sqr();
    if n2 == 0.0 {
        return Err(ConformalError::OriginConjugate);
    }
    Ok(y / n2)
}

/// Builds the exterior map of a disk or polygon shape.
pub fn map_for_shape(shape: &ObstacleShape) -> Result<ConformalMap, ConformalError> {
    if let ShapeKind::Custom(_) = shape.kind {
        return Err(ConformalError::UnsupportedShape(format!("{} (only disks and polygons are mapped)", shape.name)));
    }
    let report = check_hypotheses(shape)?;
    if !report.jordan.passed {
        return Err(ConformalError::HypothesisViolated(report.jordan.witness.unwrap_or_default()));
    }
    if !report.corner_angles.passed {
        return Err(ConformalError::HypothesisViolated(report.corner_angles.witness.unwrap_or_default()));
    }
    match &shape.kind {
        ShapeKind::Disk => Ok(ConformalMap::identity()),
        ShapeKind::Polygon(v) => {
            let exponents: Vec<f64> = shape.corners.iter().map(|c| c.angle / PI - 1.0).collect();
            let sc = ScMap::solve(v.clone(), exponents, Arc::new(shape.clone()))?;
            let mut map = ConformalMap {
                kind: MapKind::ExteriorSC { prevertices: sc.prevertices.clone(), exponents: sc.exponents.clone() },
                beta: 1.0 / sc.scale,
                remainder_bound: 0.0,
                sc: Some(sc),
            };
            map.remainder_bound = map.estimate_remainder(5.0)?;
            Ok(map)
        }
        ShapeKind::Custom(_) => unreachable!(),
    }
}

impl ConformalMap {
    pub fn identity() -> Self {
        Self { kind: MapKind::Identity, beta: 1.0, remainder_bound: 0.0, sc: None }
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Estimated `sup |T(x) − βx|` over `|x| ≥ 5`.
    pub fn remainder_bound(&self) -> f64 {
        self.remainder_bound
    }

    pub fn is_identity(&self) -> bool {
        self.sc.is_none()
    }

    /// `T(x)` for `x` on the closed fluid side.
    pub fn forward(&self, x: Point) -> Result<Complex64, ConformalError> {
        self.forward_with_derivative(x).map(|(t, _)| t)
    }

    /// `T'(x)`, from the product formula.
    pub fn derivative(&self, x: Point) -> Result<Complex64, ConformalError> {
        self.forward_with_derivative(x).map(|(_, d)| d)
    }

    /// `(T(x), T'(x))` with one Newton solve.
    pub fn forward_with_derivative(&self, x: Point) -> Result<(Complex64, Complex64), ConformalError> {
        match &self.sc {
            None => {
                if x.norm() < 1.0 - 1e-12 {
                    return Err(ConformalError::InsideObstacle { re: x.re, im: x.im });
                }
                Ok((x, Complex64::new(1.0, 0.0)))
            }
            Some(sc) => {
                let z = sc.forward(x)?;
                Ok((z, 1.0 / sc.gp(z)))
            }
        }
    }

    /// `T⁻¹(y)` for `|y| ≥ 1`.
    pub fn inverse(&self, y: Complex64) -> Result<Point, ConformalError> {
        let r = y.norm();
        if r < 1.0 - 1e-12 {
            return Err(ConformalError::InsideUnitDisk { re: y.re, im: y.im });
        }
        let y = if r < 1.0 { y / r } else { y };
        match &self.sc {
            None => Ok(y),
            Some(sc) => sc.g(y),
        }
    }

    /// `(T⁻¹)'(y)`.
    pub fn inverse_derivative(&self, y: Complex64) -> Complex64 {
        match &self.sc {
            None => Complex64::new(1.0, 0.0),
            Some(sc) => sc.gp(y),
        }
    }

    /// `g''(ζ)/g'(ζ)` for `g = T⁻¹`.
    pub fn inverse_log_derivative(&self, z: Complex64) -> Complex64 {
        match &self.sc {
            None => Complex64::new(0.0, 0.0),
            Some(sc) => sc
                .prevertices
                .iter()
                .zip(&sc.exponents)
                .map(|(zk, ak)| zk * *ak / (z * (z - zk)))
                .sum(),
        }
    }

    /// `|T(R)| / R` on the positive real axis.
    pub fn far_field_ratio(&self, r: f64) -> Result<f64, ConformalError> {
        Ok(self.forward(Complex64::new(r, 0.0))?.norm() / r)
    }

    fn estimate_remainder(&self, radius: f64) -> Result<f64, ConformalError> {
        let mut sup: f64 = 0.0;
        for k in 0..256 {
            let x = Complex64::from_polar(radius, 2.0 * PI * k as f64 / 256.0);
            sup = sup.max((self.forward(x)? - x * self.beta).norm());
        }
        // sampled maximum on the circle, padded for between-sample growth
        Ok(1.01 * sup)
    }

    /// Vertices reproduced by the map, `g(ζ_k)`.
    pub fn mapped_vertices(&self) -> Result<Vec<Point>, ConformalError> {
        match &self.sc {
            None => Ok(Vec::new()),
            Some(sc) => sc.prevertices.iter().map(|z| sc.g(*z)).collect(),
        }
    }
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_cross(p: Complex64, q: Complex64, a: Complex64, b: Complex64) -> bool {
    let d1 = cross(q - p, a - p);
    let d2 = cross(q - p, b - p);
    let d3 = cross(b - a, p - a);
    let d4 = cross(b - a, q - a);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn wrap_angle(a: f64) -> f64 {
    let t = a - 2.0 * PI * ((a + PI) / (2.0 * PI)).floor();
    if t >= PI {
        t - 2.0 * PI
    } else {
        t
    }
}

fn softmax_gaps(s: &[f64]) -> Vec<f64> {
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| 2.0 * PI * v / total).collect()
}

/// Unknowns: `[t_0, s_1, …, s_{n-1}, ln C]`, prevertex gaps `2π softmax(0, s)`.
fn unpack(u: &[f64]) -> (Vec<f64>, f64) {
    let n = u.len() - 1;
    let mut s = vec![0.0];
    s.extend_from_slice(&u[1..n]);
    let gaps = softmax_gaps(&s);
    let mut t = Vec::with_capacity(n);
    let mut acc = u[0];
    for g in gaps.iter() {
        t.push(acc);
        acc += g;
    }
    (t, u[n].exp())
}

struct EdgeRules {
    /// Jacobi rules with weight `(1 + x)^{a_k}` (left half) and
    /// `(1 − x)^{a_k}` (right half), per corner.
    left: Vec<GaussRule>,
    right: Vec<GaussRule>,
}

impl EdgeRules {
    fn new(a: &[f64]) -> Self {
        Self {
            left: a.iter().map(|ak| GaussRule::jacobi(EDGE_NODES, 0.0, *ak)).collect(),
            right: a.iter().map(|ak| GaussRule::jacobi(EDGE_NODES, *ak, 0.0)).collect(),
        }
    }
}

/// `∏_j |2 sin((t − t_j)/2)|^{a_j}` = `|g'(e^{it})| / C`.
fn boundary_density(t: f64, ts: &[f64], a: &[f64]) -> f64 {
    ts.iter().zip(a).map(|(tj, aj)| (2.0 * (0.5 * (t - tj)).sin()).abs().powf(*aj)).product()
}

/// Length of the image of the arc `[t_k, t_{k+1}]`, divided by `C`.
fn edge_length(k: usize, ts: &[f64], a: &[f64], rules: &EdgeRules) -> f64 {
    let n = ts.len();
    let t0 = ts[k];
    let t1 = if k + 1 == n { ts[0] + 2.0 * PI } else { ts[k + 1] };
    let k1 = (k + 1) % n;
    let mid = 0.5 * (t0 + t1);
    let h = 0.5 * (mid - t0);
    let mut sum = 0.0;
    for (x, w) in rules.left[k].nodes.iter().zip(&rules.left[k].weights) {
        let t = t0 + h * (1.0 + x);
        // divide out the endpoint factor (t − t0)^{a_k} ~ (h(1+x))^{a_k}
        sum += w * h * boundary_density(t, ts, a) / (1.0 + x).powf(a[k]);
    }
    for (x, w) in rules.right[k1].nodes.iter().zip(&rules.right[k1].weights) {
        let t = mid + h * (1.0 + x);
        sum += w * h * boundary_density(t, ts, a) / (1.0 - x).powf(a[k1]);
    }
    sum
}

fn sc_residual(u: &[f64], a: &[f64], lengths: &[f64], edge0_dir: f64, rules: &EdgeRules) -> Vec<f64> {
    let n = a.len();
    let (ts, c) = unpack(u);
    let mut res = Vec::with_capacity(n + 1);
    let moment: Complex64 = ts.iter().zip(a).map(|(t, ak)| Complex64::from_polar(*ak, *t)).sum();
    res.push(moment.re);
    res.push(moment.im);
    for k in 0..n - 2 {
        res.push(c * edge_length(k, &ts, a, rules) / lengths[k] - 1.0);
    }
    // direction of edge 0 from the boundary value of g' at the arc midpoint
    let tm = 0.5 * (ts[0] + ts[1]);
    let zeta = Complex64::from_polar(1.0, tm);
    let dir = sc_gp_unit(zeta, &ts, a) * Complex64::i() * zeta;
    res.push(wrap_angle(dir.arg() - edge0_dir));
    res
}

fn sc_gp_unit(z: Complex64, ts: &[f64], a: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (t, ak) in ts.iter().zip(a) {
        let f = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, *t) / z;
        acc += f.ln() * *ak;
    }
    acc.exp()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl ScMap {
    fn solve(vertices: Vec<Point>, a: Vec<f64>, shape: Arc<ObstacleShape>) -> Result<Self, ConformalError> {
        let n = vertices.len();
        let lengths: Vec<f64> = (0..n).map(|k| (vertices[(k + 1) % n] - vertices[k]).norm()).collect();
        let edge0_dir = (vertices[1] - vertices[0]).arg();
        let rules = EdgeRules::new(&a);
        let centroid: Complex64 = vertices.iter().sum::<Complex64>() / n as f64;

        // initial guess: prevertex angles from the vertex directions
        let mut angles: Vec<f64> = vertices.iter().map(|v| (v - centroid).arg()).collect();
        for k in 1..n {
            while angles[k] <= angles[k - 1] {
                angles[k] += 2.0 * PI;
            }
        }
        let mut u = vec![0.0; n + 1];
        u[0] = angles[0];
        let gap0 = angles[1] - angles[0];
        for k in 1..n {
            let next = if k + 1 == n { angles[0] + 2.0 * PI } else { angles[k + 1] };
            u[k] = ((next - angles[k]) / gap0).max(1e-3).ln();
        }
        u[n] = (shape.area() / PI).sqrt().ln();

        let mut f = sc_residual(&u, &a, &lengths, edge0_dir, &rules);
        let mut norm = max_abs(&f);
        for _ in 0..SOLVE_MAX_ITER {
            if norm < SOLVE_TOL {
                break;
            }
            let h = 1e-7;
            let mut jac = DMatrix::<f64>::zeros(n + 1, n + 1);
            for j in 0..=n {
                let mut up = u.clone();
                up[j] += h;
                let fp = sc_residual(&up, &a, &lengths, edge0_dir, &rules);
                for i in 0..=n {
                    jac[(i, j)] = (fp[i] - f[i]) / h;
                }
            }
            let rhs = DVector::from_iterator(n + 1, f.iter().map(|v| -v));
            let step = match jac.lu().solve(&rhs) {
                Some(s) => s,
                None => return Err(ConformalError::ParameterProblemDiverged { residual: norm }),
            };
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, d)| x + lambda * d).collect();
                let ft = sc_residual(&trial, &a, &lengths, edge0_dir, &rules);
                let nt = max_abs(&ft);
                if nt.is_finite() && nt < norm {
                    u = trial;
                    f = ft;
                    norm = nt;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if !(norm < SOLVE_TOL) {
            return Err(ConformalError::ParameterProblemDiverged { residual: norm });
        }

        let (ts, scale) = unpack(&u);
        let prevertices: Vec<Complex64> = ts.iter().map(|t| Complex64::from_polar(1.0, *t)).collect();
        let laurent = laurent_coefficients(&prevertices, &a);
        let mut sc = ScMap {
            prevertices,
            exponents: a,
            vertices,
            scale,
            offset: Complex64::new(0.0, 0.0),
            laurent,
            guesses: Vec::new(),
            guess_extent: 0.0,
            corner_factors: Vec::new(),
            corner_radius: 0.0,
            shape,
        };
        let v0 = sc.g(sc.prevertices[0])?;
        sc.offset = sc.vertices[0] - v0;
        for k in 0..n {
            let vk = sc.g(sc.prevertices[k])?;
            let err = (vk - sc.vertices[k]).norm();
            if err > 1e-8 {
                return Err(ConformalError::ParameterProblemDiverged { residual: err });
            }
        }
        sc.corner_factors = (0..n)
            .map(|k| {
                let zk = sc.prevertices[k];
                let mut acc = Complex64::new(0.0, 0.0);
                for j in (0..n).filter(|j| *j != k) {
                    acc += (Complex64::new(1.0, 0.0) - sc.prevertices[j] / zk).ln() * sc.exponents[j];
                }
                acc.exp() * zk * sc.scale
            })
            .collect();
        sc.corner_radius = 0.1 * (0..n).map(|k| (sc.vertices[(k + 1) % n] - sc.vertices[k]).norm()).fold(f64::INFINITY, f64::min);
        sc.build_guesses()?;
        Ok(sc)
    }

    fn gp(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (zk, ak) in self.prevertices.iter().zip(&self.exponents) {
            let f = Complex64::new(1.0, 0.0) - zk / z;
            if f.norm_sqr() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            acc += f.ln() * *ak;
        }
        acc.exp() * self.scale
    }

    fn laurent_eval(&self, z: Complex64) -> Complex64 {
        let w = 1.0 / z;
        let mut s = Complex64::new(0.0, 0.0);
        for q in self.laurent.iter().rev() {
            s = s * w + q;
        }
        self.offset + (z + s * w) * self.scale
    }

    fn path_integral(&self, a: Complex64, b: Complex64) -> Result<Complex64, ConformalError> {
        let d = b - a;
        let tol = 1e-14 * self.scale.max(1.0) * d.norm().max(1e-3);
        Ok(adaptive(|s| self.gp(a + d * s) * d, 0.0, 1.0, tol, 400)?)
    }

    /// `g(ζ) = T⁻¹(ζ)` for `|ζ| ≥ 1`.
    fn g(&self, z: Complex64) -> Result<Complex64, ConformalError> {
        let r = z.norm();
        if r >= SERIES_RADIUS {
            return Ok(self.laurent_eval(z));
        }
        let anchor = z * (SERIES_RADIUS / r);
        Ok(self.laurent_eval(anchor) + self.path_integral(anchor, z)?)
    }

    fn crosses_cut(&self, p: Complex64, q: Complex64) -> bool {
        self.prevertices.iter().any(|zk| segments_cross(p, q, Complex64::new(0.0, 0.0), *zk))
    }

    /// `g(q)` from a known `g(p)`.
    fn g_from(&self, p: Complex64, gp: Complex64, q: Complex64) -> Result<Complex64, ConformalError> {
        if (q - p).norm() > 0.5 || self.crosses_cut(p, q) {
            return self.g(q);
        }
        Ok(gp + self.path_integral(p, q)?)
    }

    fn build_guesses(&mut self) -> Result<(), ConformalError> {
        let mut table = Vec::with_capacity(GUESS_RADII.len() * GUESS_ANGLES);
        let mut extent: f64 = 0.0;
        for dr in GUESS_RADII {
            for k in 0..GUESS_ANGLES {
                let z = Complex64::from_polar(1.0 + dr, 2.0 * PI * (k as f64 + 0.5) / GUESS_ANGLES as f64);
                let w = self.g(z)?;
                extent = extent.max(w.norm());
                table.push((z, w));
            }
        }
        for zk in self.prevertices.clone() {
            table.push((zk, self.g(zk)?));
        }
        self.guesses = table;
        self.guess_extent = extent;
        Ok(())
    }

    fn initial_guess(&self, x: Point) -> Complex64 {
        if x.norm() > self.guess_extent {
            let z = (x - self.offset) / self.scale;
            return if z.norm() > 1.0 { z } else { z / z.norm() * 1.5 };
        }
        for (k, v) in self.vertices.iter().enumerate() {
            if (x - v).norm() < self.corner_radius {
                let alpha = 1.0 + self.exponents[k];
                let w = (x - v) * alpha / self.corner_factors[k];
                let z = self.prevertices[k] * (1.0 + w.powf(1.0 / alpha));
                return if z.norm() < 1.0 { z / z.norm() } else { z };
            }
        }
        let mut best = (f64::INFINITY, Complex64::new(2.0, 0.0));
        for (z, w) in &self.guesses {
            let d = (w - x).norm_sqr();
            if d < best.0 {
                best = (d, *z);
            }
        }
        best.1
    }

    fn forward(&self, x: Point) -> Result<Complex64, ConformalError> {
        if self.shape.contains(x) && self.shape.boundary_distance(x) > 1e-12 {
            return Err(ConformalError::InsideObstacle { re: x.re, im: x.im });
        }
        let tol = 1e-13 * (1.0 + x.norm());
        let mut z = self.initial_guess(x);
        let mut gz = self.g(z)?;
        let mut res = (gz - x).norm();
        for _ in 0..NEWTON_MAX_ITER {
            if res <= tol {
                break;
            }
            let d = self.gp(z);
            let step = if d.norm_sqr() > 0.0 {
                -(gz - x) / d
            } else {
                // exactly at a prevertex: nudge outward
                z * 1e-6
            };
            let mut lambda = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let mut trial = z + step * lambda;
                let r = trial.norm();
                if r < 1.0 {
                    trial /= r;
                }
                let gt = self.g_from(z, gz, trial)?;
                let rt = (gt - x).norm();
                if rt < res {
                    z = trial;
                    gz = gt;
                    res = rt;
                    moved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !moved {
                break;
            }
        }
        // re-evaluate from scratch so incremental drift cannot hide
        let check = (self.g(z)? - x).norm();
        if check > 1e-10 * (1.0 + x.norm()) {
            return Err(ConformalError::NotConverged { re: x.re, im: x.im, residual: check });
        }
        Ok(z)
    }
}

/// Coefficients `q_m = −p_m/(m−1)`, `m ≥ 2`, where
/// `∏(1 − ζ_k w)^{a_k} = Σ p_m w^m`.
fn laurent_coefficients(prevertices: &[Complex64], a: &[f64]) -> Vec<Complex64> {
    let n = SERIES_TERMS;
    let mut s = vec![Complex64::new(0.0, 0.0); n + 1];
    for m in 1..=n {
        s[m] = prevertices.iter().zip(a).map(|(z, ak)| z.powu(m as u32) * *ak).sum();
    }
    let mut p = vec![Complex64::new(0.0, 0.0); n + 1];
    p[0] = Complex64::new(1.0, 0.0);
    for m in 1..=n {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 1..=m {
            acc += s[j] * p[m - j];
        }
        p[m] = -acc / m as f64;
    }
    (2..=n).map(|m| -p[m] / (m as f64 - 1.0)).collect()
}

/// Corner exponent fit along the fluid bisector.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerAsymptotics {
    pub corner_index: usize,
    pub fitted_exponent: f64,
    pub predicted_exponent: f64,
    pub holder_mu: f64,
    /// `(r, |T'(x_k + r e)|)` samples along the ray.
    pub samples: Vec<(f64, f64)>,
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Hölder modulus `min_k π/θ_k` (1 without corners).
pub fn holder_mu(shape: &ObstacleShape) -> f64 {
    shape.corners.iter().map(|c| PI / c.angle).fold(1.0, f64::min)
}

/// Unit vector along the bisector of the fluid wedge at corner `k`.
pub fn fluid_bisector(shape: &ObstacleShape, k: usize) -> Option<Complex64> {
    let c = shape.corners.get(k)?;
    let h = 1e-6 * shape.perimeter();
    let e1 = shape.boundary_point(c.param - h) - c.point;
    let e2 = shape.boundary_point(c.param + h) - c.point;
    let solid = e1 / e1.norm() + e2 / e2.norm();
    if solid.norm() < 1e-14 {
        return None;
    }
    Some(-solid / solid.norm())
}

pub fn probe_corner_exponent(map: &ConformalMap, shape: &ObstacleShape, k: usize) -> Result<CornerAsymptotics, ConformalError> {
    let corner = shape.corners.get(k).ok_or(ConformalError::NoSuchCorner(k))?;
    let dir = fluid_bisector(shape, k).ok_or(ConformalError::NoSuchCorner(k))?;
    let n = 41;
    let mut samples = Vec::with_capacity(n);
    for j in 0..n {
        let r = PROBE_R_MIN * (PROBE_R_MAX / PROBE_R_MIN).powf(j as f64 / (n - 1) as f64);
        let x = corner.point + dir * r;
        if shape.contains(x) {
            return Err(ConformalError::RayExitsDomain { corner: k, r });
        }
        samples.push((r, map.derivative(x)?.norm()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let (slope, _) = linear_fit(&xs, &ys);
    Ok(CornerAsymptotics {
        corner_index: k,
        fitted_exponent: slope,
        predicted_exponent: PI / corner.angle - 1.0,
        holder_mu: holder_mu(shape),
        samples,
    })
}

/// Slope of the fit over the first `j + 1` samples, for each `j ≥ 1`.
pub fn running_fits(samples: &[(f64, f64)]) -> Vec<Option<f64>> {
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    (0..samples.len()).map(|j| if j == 0 { None } else { Some(linear_fit(&xs[..=j], &ys[..=j]).0) }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderEstimate {
    /// Exponent used in `M max{|x−y|^μ, |x−y|}`.
    pub mu: f64,
    /// Empirical exponent from the small-separation envelope.
    pub mu_hat: f64,
    pub m_hat: f64,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn random_collar_point(shape: &ObstacleShape, rng: &mut ChaCha8Rng) -> Point {
    loop {
        let x = Complex64::from_polar(3.0 * rng.gen::<f64>().sqrt(), rng.gen::<f64>() * 2.0 * PI);
        if !shape.contains(x) {
            return x;
        }
    }
}

/// Two fluid points at comparable distance `r` from a corner (or a boundary
/// point when there are no corners), typically on different sides.
fn random_straddling_pair(shape: &ObstacleShape, rng: &mut ChaCha8Rng) -> (Point, Point) {
    let focus = if shape.corners.is_empty() {
        shape.boundary_point(rng.gen::<f64>() * shape.perimeter())
    } else {
        shape.corners[rng.gen_range(0..shape.corners.len())].point
    };
    loop {
        let r = log_uniform(rng, 1e-6, 1e-1);
        let x = focus + Complex64::from_polar(r, rng.gen::<f64>() * 2.0 * PI);
        let y = focus + Complex64::from_polar(r * (0.5 + 1.5 * rng.gen::<f64>()), rng.gen::<f64>() * 2.0 * PI);
        if !shape.contains(x) && !shape.contains(y) {
            return (x, y);
        }
    }
}

/// Empirical `M` in `|T(x)−T(y)| ≤ M max{|x−y|^μ, |x−y|}` on the radius-3
/// collar, and the exponent of the small-separation envelope.
pub fn probe_holder(map: &ConformalMap, shape: &ObstacleShape, n_pairs: usize, seed: u64) -> Result<HolderEstimate, ConformalError> {
    let mu = holder_mu(shape);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m_hat: f64 = 0.0;
    // half-decade bins on |x − y| ∈ [1e-6, 1e-2]
    let nb = 8;
    let mut envelope = vec![0.0f64; nb];
    for p in 0..n_pairs {
        let (x, y) = if p % 2 == 1 {
            random_straddling_pair(shape, &mut rng)
        } else {
            (random_collar_point(shape, &mut rng), random_collar_point(shape, &mut rng))
        };
        let d = (x - y).norm();
        if d == 0.0 {
            continue;
        }
        let dt = (map.forward(x)? - map.forward(y)?).norm();
        m_hat = m_hat.max(dt / d.powf(mu).max(d));
        let b = ((d.log10() + 6.0) * 2.0).floor();
        if b >= 0.0 && (b as usize) < nb {
            envelope[b as usize] = envelope[b as usize].max(dt);
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (b, e) in envelope.iter().enumerate() {
        if *e > 0.0 {
            xs.push(-6.0 + (b as f64 + 1.0) * 0.5);
            ys.push(e.log10());
        }
    }
    let mu_hat = if xs.len() >= 2 { linear_fit(&xs, &ys).0 } else { f64::NAN };
    Ok(HolderEstimate { mu, mu_hat, m_hat })
}

/// Empirical Lipschitz constant of `T⁻¹` over pairs with `1 ≤ |ζ| ≤ 3`.
pub fn probe_inverse_lipschitz(map: &ConformalMap, n_pairs: usize, seed: u64) -> Result<f64, ConformalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng| {
        let r = if rng.gen::<bool>() { 1.0 + 1e-3 * rng.gen::<f64>() } else { 1.0 + 2.0 * rng.gen::<f64>() };
        Complex64::from_polar(r, 2.0 * PI * rng.gen::<f64>())
    };
    let mut m: f64 = 0.0;
    for _ in 0..n_pairs {
        let a = sample(&mut rng);
        let b = if rng.gen::<bool>() { a * Complex64::from_polar(1.0, 1e-3 * (rng.gen::<f64>() - 0.5)) } else { sample(&mut rng) };
        let d = (a - b).norm();
        if d == 0.0 {
            continue;
        }
        m = m.max((map.inverse(a)? - map.inverse(b)?).norm() / d);
    }
    Ok(m)
}

/// `T_i(x) = T((x − z_i)/(ε/2))`.
#[derive(Debug, Clone)]
pub struct RescaledMap {
    pub map: Arc<ConformalMap>,
    pub center: Point,
    pub epsilon: f64,
}

pub fn rescaled_map(map: Arc<ConformalMap>, center: Point, epsilon: f64) -> RescaledMap {
    RescaledMap { map, center, epsilon }
}

impl RescaledMap {
    fn half(&self) -> f64 {
        0.5 * self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.map.beta()
    }

    pub fn forward(&self, x: Point) -> Result<Complex64, ConformalError> {
        self.map.forward((x - self.center) / self.half())
    }

    pub fn derivative(&self, x: Point) -> Result<Complex64, ConformalError> {
        Ok(self.map.derivative((x - self.center) / self.half())? / self.half())
    }

    pub fn forward_with_derivative(&self, x: Point) -> Result<(Complex64, Complex64), ConformalError> {
        let (t, d) = self.map.forward_with_derivative((x - self.center) / self.half())?;
        Ok((t, d / self.half()))
    }

    pub fn inverse(&self, y: Complex64) -> Result<Point, ConformalError> {
        Ok(self.map.inverse(y)? * self.half() + self.center)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_examples() {
        assert_eq!(conjugate_point(Complex64::new(2.0, 0.0)).unwrap(), Complex64::new(0.5, 0.0));
        assert_eq!(conjugate_point(Complex64::new(0.0, -4.0)).unwrap(), Complex64::new(0.0, -0.25));
        assert!(matches!(conjugate_point(Complex64::new(0.0, 0.0)), Err(ConformalError::OriginConjugate)));
        let p = Complex64::from_polar(1.0, 0.7);
        assert!((conjugate_point(p).unwrap() - p).norm() < 1e-15);
    }

    #[test]
    fn laurent_of_square_has_fourfold_symmetry() {
        let z: Vec<Complex64> = (0..4).map(|k| Complex64::from_polar(1.0, PI * k as f64 / 2.0)).collect();
        let q = laurent_coefficients(&z, &[0.5; 4]);
        // only powers ζ^{1-m} with m ≡ 0 mod 4 survive
        for (i, c) in q.iter().enumerate() {
            let m = i + 2;
            if m % 4 != 0 {
                assert!(c.norm() < 1e-14, "m={m} {c}");
            }
        }
        // (1 − w^4)^{1/2} = 1 − w^4/2 − …, so q_4 = (1/2)/3
        assert!((q[2].re - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - (-PI)).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_angle(-0.5 - 2.0 * PI) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_rescaled() {
        let m = Arc::new(ConformalMap::identity());
        let r = rescaled_map(m, Complex64::new(0.05, 0.0), 0.1);
        assert!((r.forward(Complex64::new(0.1, 0.0)).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((r.derivative(Complex64::new(0.2, 0.0)).unwrap().re - 20.0).abs() < 1e-12);
        assert!((r.inverse(Complex64::new(0.0, 1.0)).unwrap() - Complex64::new(0.05, 0.05)).norm() < 1e-15);
    }
}
