//! Vorticity fields, whole-plane Biot–Savart velocities, the one-obstacle
//! Green function and its zero-circulation exterior velocity.
//!
//! Velocities are complex numbers `u₁ + i u₂`. The perpendicular of `v` is
//! `i v`, so `∇^⊥ ln|F(x)| = i·conj(F'(x)/F(x))` for holomorphic `F`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;
use thiserror::Error;

use crate::conformal::{conjugate_point, ConformalError, ConformalMap};
use crate::geometry::Point;
use crate::quadrature::{adaptive, GaussRule, QuadratureError, Rect};

/// Mollification half-width for indicator-type fields.
pub const MOLLIFIER_WIDTH: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("quadrature budget exceeded: estimate {estimate:.3e} above tolerance {tol:.3e}")]
    QuadratureBudgetExceeded { estimate: f64, tol: f64 },
    #[error("evaluation on the obstacle boundary at ({re}, {im})")]
    BoundaryEvaluation { re: f64, im: f64 },
    #[error("contour node {index} lies outside the fluid")]
    ContourHitsObstacle { index: usize },
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
}

impl From<QuadratureError> for FieldError {
    fn from(e: QuadratureError) -> Self {
        match e {
            QuadratureError::BudgetExceeded { estimate, tol } => FieldError::QuadratureBudgetExceeded { estimate, tol },
            QuadratureError::InvalidSpec(s) => FieldError::InvalidField(s.to_string()),
        }
    }
}

/// Quintic smoothstep: 0 below 0, 1 above 1, C² in between.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

pub fn smoothstep_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (1.0 - t) * (1.0 - t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `(1 − ρ²/r²)²` on `ρ < r`.
    Bump,
    /// Indicator of `B(0, r)` smoothed over `|ρ − r| < δ`.
    MollifiedDisk { delta: f64 },
}

/// Radially symmetric building block `A·p(|x − c|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
    pub profile: Profile,
}

impl Blob {
    pub fn support_radius(&self) -> f64 {
        match self.profile {
            Profile::Bump => self.radius,
            Profile::MollifiedDisk { delta } => self.radius + delta,
        }
    }

    /// Radii where the profile changes formula.
    fn breaks(&self) -> Vec<f64> {
        match self.profile {
            Profile::Bump => vec![0.0, self.radius],
            Profile::MollifiedDisk { delta } => vec![0.0, self.radius - delta, self.radius + delta],
        }
    }

    pub fn radial(&self, rho: f64) -> f64 {
        match self.profile {
            Profile::Bump => {
                if rho >= self.radius {
                    0.0
                } else {
                    let s = 1.0 - rho * rho / (self.radius * self.radius);
                    self.amplitude * s * s
                }
            }
            Profile::MollifiedDisk { delta } => self.amplitude * smoothstep((self.radius + delta - rho) / (2.0 * delta)),
        }
    }

    pub fn radial_derivative(&self, rho: f64) -> f64 {
        match self.profile {
            Profile::Bump => {
                if rho >= self.radius {
                    0.0
                } else {
                    let r2 = self.radius * self.radius;
                    -4.0 * self.amplitude * rho * (1.0 - rho * rho / r2) / r2
                }
            }
            Profile::MollifiedDisk { delta } => {
                -self.amplitude * smoothstep_derivative((self.radius + delta - rho) / (2.0 * delta)) / (2.0 * delta)
            }
        }
    }

    pub fn mass(&self) -> f64 {
        match self.profile {
            Profile::Bump => self.amplitude * PI * self.radius * self.radius / 3.0,
            Profile::MollifiedDisk { .. } => {
                // ρ·smoothstep is a polynomial of degree 6 per piece
                let rule = GaussRule::legendre(6);
                let b = self.breaks();
                let mut m = 0.0;
                for w in b.windows(2) {
                    m += rule.integrate(w[0], w[1], |r| r * self.radial(r));
                }
                2.0 * PI * m
            }
        }
    }

    pub fn grad_linf(&self) -> f64 {
        match self.profile {
            Profile::Bump => 8.0 * self.amplitude.abs() / (3.0 * 3f64.sqrt() * self.radius),
            Profile::MollifiedDisk { delta } => self.amplitude.abs() * 15.0 / (8.0 * 2.0 * delta),
        }
    }
}

/// Compactly supported vorticity made of disjoint radial blobs.
#[derive(Debug, Clone, PartialEq)]
pub struct VorticityField {
    pub name: String,
    pub blobs: Vec<Blob>,
    pub support_box: Rect,
    pub l1_norm: f64,
    pub linf_norm: f64,
    pub grad_linf_norm: f64,
    pub total_mass: f64,
}

impl VorticityField {
    pub fn from_blobs(name: &str, blobs: Vec<Blob>) -> Result<Self, FieldError> {
        if blobs.is_empty() {
            return Err(FieldError::InvalidField("no blobs".into()));
        }
        for b in &blobs {
            if !(b.radius > 0.0) || !b.amplitude.is_finite() {
                return Err(FieldError::InvalidField(format!("blob radius {} amplitude {}", b.radius, b.amplitude)));
            }
            if let Profile::MollifiedDisk { delta } = b.profile {
                if !(delta > 0.0 && delta < b.radius) {
                    return Err(FieldError::InvalidField("mollifier width must lie in (0, r)".into()));
                }
            }
        }
        for (i, a) in blobs.iter().enumerate() {
            for b in blobs.iter().skip(i + 1) {
                if (a.center - b.center).norm() < a.support_radius() + b.support_radius() {
                    return Err(FieldError::InvalidField("blob supports overlap".into()));
                }
            }
        }
        let mut bx = Rect { x0: f64::INFINITY, x1: f64::NEG_INFINITY, y0: f64::INFINITY, y1: f64::NEG_INFINITY };
        for b in &blobs {
            let r = b.support_radius();
            bx.x0 = bx.x0.min(b.center.re - r);
            bx.x1 = bx.x1.max(b.center.re + r);
            bx.y0 = bx.y0.min(b.center.im - r);
            bx.y1 = bx.y1.max(b.center.im + r);
        }
        Ok(Self {
            name: name.into(),
            support_box: bx,
            l1_norm: blobs.iter().map(|b| b.mass().abs()).sum(),
            linf_norm: blobs.iter().map(|b| b.amplitude.abs()).fold(0.0, f64::max),
            grad_linf_norm: blobs.iter().map(|b| b.grad_linf()).fold(0.0, f64::max),
            total_mass: blobs.iter().map(|b| b.mass()).sum(),
            blobs,
        })
    }

    /// The identically vanishing field.
    pub fn zero() -> Self {
        Self {
            name: "zero".into(),
            blobs: Vec::new(),
            support_box: Rect::new(0.0, 0.0, 0.0, 0.0),
            l1_norm: 0.0,
            linf_norm: 0.0,
            grad_linf_norm: 0.0,
            total_mass: 0.0,
        }
    }

    /// Unit-peak bump `(1 − |x−c|²/r²)²` on `B(c, r)`.
    pub fn bump(center: Point, radius: f64) -> Result<Self, FieldError> {
        Self::from_blobs(
            &format!("bump:{},{},{}", center.re, center.im, radius),
            vec![Blob { center, radius, amplitude: 1.0, profile: Profile::Bump }],
        )
    }

    /// The default field: bump at `(0.5, 0.8)` with radius `0.2`.
    pub fn default_bump() -> Self {
        Self::bump(Complex64::new(0.5, 0.8), 0.2).expect("default bump is valid")
    }

    pub fn mollified_disk(center: Point, radius: f64) -> Result<Self, FieldError> {
        Self::from_blobs(
            &format!("mollified-disk:{},{},{}", center.re, center.im, radius),
            vec![Blob { center, radius, amplitude: 1.0, profile: Profile::MollifiedDisk { delta: MOLLIFIER_WIDTH } }],
        )
    }

    /// Positive bump at `c₁`, negative bump at `c₂`.
    pub fn dipole(c1: Point, c2: Point, radius: f64) -> Result<Self, FieldError> {
        Self::from_blobs(
            &format!("dipole:{},{},{},{},{}", c1.re, c1.im, c2.re, c2.im, radius),
            vec![
                Blob { center: c1, radius, amplitude: 1.0, profile: Profile::Bump },
                Blob { center: c2, radius, amplitude: -1.0, profile: Profile::Bump },
            ],
        )
    }

    /// Parses `bump:cx,cy,r`, `mollified-disk:cx,cy,r` or
    /// `dipole:cx1,cy1,cx2,cy2,r`.
    pub fn parse(spec: &str) -> Result<Self, FieldError> {
        if spec.trim() == "zero" {
            return Ok(Self::zero());
        }
        let (kind, args) = spec.split_once(':').ok_or_else(|| FieldError::InvalidField(format!("missing ':' in {spec:?}")))?;
        let nums: Result<Vec<f64>, _> = args.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let nums = nums.map_err(|_| FieldError::InvalidField(format!("bad number in {spec:?}")))?;
        let need = |n: usize| {
            if nums.len() == n {
                Ok(())
            } else {
                Err(FieldError::InvalidField(format!("{kind} takes {n} numbers, got {}", nums.len())))
            }
        };
        match kind.trim() {
            "bump" => {
                need(3)?;
                Self::bump(Complex64::new(nums[0], nums[1]), nums[2])
            }
            "mollified-disk" => {
                need(3)?;
                Self::mollified_disk(Complex64::new(nums[0], nums[1]), nums[2])
            }
            "dipole" => {
                need(5)?;
                Self::dipole(Complex64::new(nums[0], nums[1]), Complex64::new(nums[2], nums[3]), nums[4])
            }
            other => Err(FieldError::InvalidField(format!("unknown field kind {other:?}"))),
        }
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.blobs
            .iter()
            .map(|b| {
                let r = (x - b.center).norm();
                if r < b.support_radius() {
                    b.radial(r)
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn gradient(&self, x: Point) -> Complex64 {
        let mut g = Complex64::new(0.0, 0.0);
        for b in &self.blobs {
            let d = x - b.center;
            let r = d.norm();
            if r > 0.0 && r < b.support_radius() {
                g += d / r * b.radial_derivative(r);
            }
        }
        g
    }

    /// `‖f‖_{L¹}^{1/2} ‖f‖_{L∞}^{1/2}`.
    pub fn l1_linf(&self) -> f64 {
        (self.l1_norm * self.linf_norm).sqrt()
    }

    /// Distance from `x` to the support (0 inside).
    pub fn support_distance(&self, x: Point) -> f64 {
        self.blobs.iter().map(|b| ((x - b.center).norm() - b.support_radius()).max(0.0)).fold(f64::INFINITY, f64::min)
    }

    /// Polar product rule about each blob center: Gauss–Legendre in the
    /// radius (split at profile breaks) times the trapezoid in angle.
    pub fn source_rule(&self, n_radial: usize, n_angular: usize) -> SourceRule {
        let rule = GaussRule::legendre(n_radial);
        let mut nodes = Vec::new();
        for b in &self.blobs {
            let br = b.breaks();
            for w in br.windows(2) {
                for (r, wr) in rule.mapped(w[0], w[1]) {
                    let val = b.radial(r) * r * wr * 2.0 * PI / n_angular as f64;
                    for k in 0..n_angular {
                        // half-step offset keeps nodes off the axes
                        let t = 2.0 * PI * (k as f64 + 0.5) / n_angular as f64;
                        nodes.push((b.center + Complex64::from_polar(r, t), val));
                    }
                }
            }
        }
        SourceRule { nodes, core: 0.0 }
    }
}

/// Weighted source points `(y_j, f(y_j) dA_j)` with an optional blob core.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceRule {
    pub nodes: Vec<(Point, f64)>,
    /// Regularization radius `δ` of the kernel `(x−y)^⊥/(|x−y|² + δ²)`.
    pub core: f64,
}

impl SourceRule {
    pub fn mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.1).sum()
    }

    /// Whole-plane velocity `Σ w_j K(x − y_j)`.
    pub fn biot_savart(&self, x: Point) -> Complex64 {
        let d2 = self.core * self.core;
        let mut u = Complex64::new(0.0, 0.0);
        for (y, w) in &self.nodes {
            let v = x - y;
            let den = v.norm_sqr() + d2;
            if den > 0.0 {
                u += Complex64::i() * v * (*w / den);
            }
        }
        u / (2.0 * PI)
    }

    /// Whole-plane stream function `(1/2π) Σ w_j ln|x − y_j|` (regularized).
    pub fn stream(&self, x: Point) -> f64 {
        let d2 = self.core * self.core;
        self.nodes.iter().map(|(y, w)| w * 0.5 * ((x - y).norm_sqr() + d2).ln()).sum::<f64>() / (2.0 * PI)
    }
}

/// Whole-plane kernel `(1/2π)(x−y)^⊥/|x−y|²`.
pub fn bs_kernel(v: Complex64) -> Complex64 {
    Complex64::i() * v / (2.0 * PI * v.norm_sqr())
}

/// `−(i/2π) ∫ e^{iφ} ∫ f(x + ρe^{iφ}) dρ dφ` restricted to one blob.
fn polar_split_blob(b: &Blob, x: Point, tol: f64) -> Result<Complex64, FieldError> {
    let d = x - b.center;
    let dist = d.norm();
    let big = b.support_radius();
    let radii = b.breaks();
    let rule = GaussRule::legendre(8);
    let ray = |phi: f64| -> Complex64 {
        let e = Complex64::from_polar(1.0, phi);
        let bb = (e.conj() * d).re;
        let c0 = d.norm_sqr();
        // ρ where the ray crosses each profile circle
        let mut cuts: Vec<f64> = Vec::with_capacity(6);
        for r in radii.iter().skip(1) {
            let disc = bb * bb - (c0 - r * r);
            if disc > 0.0 {
                let s = disc.sqrt();
                for rho in [-bb - s, -bb + s] {
                    if rho > 0.0 {
                        cuts.push(rho);
                    }
                }
            }
        }
        if dist < big {
            cuts.push(0.0);
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            acc += rule.integrate(w[0], w[1], |rho| {
                let y = d + e * rho;
                b.radial(y.norm())
            });
        }
        e * acc
    };
    let (lo, hi) = if dist < big {
        (0.0, 2.0 * PI)
    } else {
        let half = (big / dist).asin();
        let c = (-d).arg();
        (c - half, c + half)
    };
    let v: Complex64 = adaptive(ray, lo, hi, tol * 2.0 * PI, 4000)?;
    Ok(-Complex64::i() * v / (2.0 * PI))
}

/// Whole-plane velocity `K_{R²}[f](x)` with polar splitting about `x`.
pub fn biot_savart(f: &VorticityField, x: Point, tol: f64) -> Result<Complex64, FieldError> {
    if !(tol > 0.0) {
        return Err(FieldError::InvalidField("tolerance must be positive".into()));
    }
    let share = tol / f.blobs.len() as f64;
    let mut u = Complex64::new(0.0, 0.0);
    for b in &f.blobs {
        u += polar_split_blob(b, x, share)?;
    }
    Ok(u)
}

/// `G_K(x, y)` from the images `T(x)`, `T(y)`.
pub fn green_from_images(tx: Complex64, ty: Complex64) -> Result<f64, FieldError> {
    for t in [tx, ty] {
        if t.norm() <= 1.0 + 1e-12 {
            return Err(FieldError::BoundaryEvaluation { re: t.re, im: t.im });
        }
    }
    let ty_star = conjugate_point(ty)?;
    Ok(((tx - ty).norm() / ((tx - ty_star).norm() * ty.norm())).ln() / (2.0 * PI))
}

/// One-obstacle Dirichlet Green function.
pub fn green_exterior(map: &ConformalMap, x: Point, y: Point) -> Result<f64, FieldError> {
    green_from_images(map.forward(x)?, map.forward(y)?)
}

/// `∇^⊥_x` of `ln|T(x)−T(y)| − ln|T(x)−T(y)*|` minus the whole-plane
/// singular part `∇^⊥ ln|x−y|`, all divided by `2π`.
fn green_remainder(x: Point, tx: Complex64, dtx: Complex64, y: Point, ty: Complex64, ty_star: Complex64) -> Complex64 {
    let s = dtx / (tx - ty) - dtx / (tx - ty_star) - 1.0 / (x - y);
    Complex64::i() * s.conj() / (2.0 * PI)
}

/// Zero-circulation velocity outside a single obstacle driven by `f`.
///
/// The source images `T(y_j)` are computed once.
#[derive(Debug, Clone)]
pub struct ExteriorVelocity<'a> {
    pub map: &'a ConformalMap,
    pub field: Option<&'a VorticityField>,
    pub rule: SourceRule,
    images: Vec<(Complex64, Complex64)>,
    pub tol: f64,
}

impl<'a> ExteriorVelocity<'a> {
    pub fn new(map: &'a ConformalMap, rule: SourceRule, field: Option<&'a VorticityField>, tol: f64) -> Result<Self, FieldError> {
        let images = rule
            .nodes
            .iter()
            .map(|(y, _)| {
                let t = map.forward(*y)?;
                Ok((t, conjugate_point(t)?))
            })
            .collect::<Result<Vec<_>, FieldError>>()?;
        Ok(Self { map, field, rule, images, tol })
    }

    pub fn velocity(&self, x: Point) -> Result<Complex64, FieldError> {
        let (tx, dtx) = self.map.forward_with_derivative(x)?;
        if tx.norm() < 1.0 - 1e-12 {
            return Err(FieldError::BoundaryEvaluation { re: x.re, im: x.im });
        }
        let mut u = match self.field {
            Some(f) => biot_savart(f, x, 0.5 * self.tol)?,
            None => self.rule.biot_savart(x),
        };
        for ((y, w), (ty, ts)) in self.rule.nodes.iter().zip(&self.images) {
            if (x - y).norm() < 1e-9 * (1.0 + x.norm()) {
                // removable singularity: T'/(T(x)−T(y)) − 1/(x−y) → T''/(2T')
                let lim = -self.map.inverse_log_derivative(tx) * dtx * 0.5 - dtx / (tx - ts);
                u += Complex64::i() * lim.conj() * (*w / (2.0 * PI));
            } else {
                u += green_remainder(x, tx, dtx, *y, *ty, *ts) * *w;
            }
        }
        let mass = self.rule.mass();
        u += Complex64::i() * (dtx / tx).conj() * (mass / (2.0 * PI));
        Ok(u)
    }
}

/// `∇^⊥∫G_K f + (∫f/2π)∇^⊥ln|T|` at `x`, refining the source rule until two
/// successive resolutions agree to `tol`.
pub fn exterior_velocity(map: &ConformalMap, f: &VorticityField, x: Point, tol: f64) -> Result<Complex64, FieldError> {
    let mut n = 8;
    let mut prev: Option<Complex64> = None;
    while n <= 128 {
        let ev = ExteriorVelocity::new(map, f.source_rule(n, 4 * n), Some(f), tol)?;
        let u = ev.velocity(x)?;
        if let Some(p) = prev {
            if (u - p).norm() <= tol {
                return Ok(u);
            }
        }
        prev = Some(u);
        n *= 2;
    }
    Err(FieldError::QuadratureBudgetExceeded { estimate: f64::NAN, tol })
}

/// Labels where a velocity came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    WholePlane,
    ExteriorOneObstacle,
    Corrector,
    Reflected,
}

pub trait VelocityField {
    fn velocity(&self, x: Point) -> Result<Complex64, FieldError>;
    fn provenance(&self) -> Provenance;
}

/// `K_{R²}[f]` with polar splitting.
#[derive(Debug, Clone)]
pub struct WholePlaneVelocity<'a> {
    pub field: &'a VorticityField,
    pub tol: f64,
}

impl VelocityField for WholePlaneVelocity<'_> {
    fn velocity(&self, x: Point) -> Result<Complex64, FieldError> {
        biot_savart(self.field, x, self.tol)
    }
    fn provenance(&self) -> Provenance {
        Provenance::WholePlane
    }
}

impl VelocityField for ExteriorVelocity<'_> {
    fn velocity(&self, x: Point) -> Result<Complex64, FieldError> {
        ExteriorVelocity::velocity(self, x)
    }
    fn provenance(&self) -> Provenance {
        Provenance::ExteriorOneObstacle
    }
}

/// `∮ u·τ` over a closed polyline, Gauss–Legendre with `order` nodes per
/// segment. Every node must satisfy `in_fluid`.
pub fn circulation<V, P>(u: &V, contour: &[Point], in_fluid: P, order: usize) -> Result<f64, FieldError>
where
    V: VelocityField + ?Sized,
    P: Fn(Point) -> bool,
{
    let rule = GaussRule::legendre(order);
    let n = contour.len();
    let mut total = 0.0;
    for k in 0..n {
        let a = contour[k];
        let b = contour[(k + 1) % n];
        let tangent = b - a;
        for (s, w) in rule.mapped(0.0, 1.0) {
            let p = a + tangent * s;
            if !in_fluid(p) {
                return Err(FieldError::ContourHitsObstacle { index: k });
            }
            let v = u.velocity(p)?;
            total += w * (v.conj() * tangent).re;
        }
    }
    Ok(total)
}

/// Circle polyline with `n` vertices.
pub fn circle_contour(center: Point, radius: f64, n: usize) -> Vec<Point> {
    (0..n).map(|k| center + Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64)).collect()
}
