//! Quadrature rules and region integrators shared by every other module.
//!
//! Three families live here:
//!
//! * fixed rules (Gauss–Legendre, Gauss–Jacobi) and an adaptive
//!   Gauss–Kronrod integrator for real or complex integrands on an interval;
//! * area integrators over rectangles with holes removed (adaptive quadtree
//!   with cut-cell masking) and a dense-grid sup-norm search;
//! * a fibered integrator for regions that are unions of horizontal fibers
//!   `x1 in [a(x2), b(x2)]`, which is how cutoff supports are integrated.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;
#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;
use thiserror::Error;

use crate::geometry::{Point, PorousLattice};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature budget exceeded: error estimate {estimate:e} above tolerance {tol:e}")]
    BudgetExceeded { estimate: f64, tol: f64 },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(&'static str),
}

/// Error-control knobs for the area integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Gauss–Legendre points per cell side.
    pub base_order: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-8, max_subdivisions: 20_000, base_order: 6 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.abs_tol > 0.0) {
            return Err(QuadratureError::InvalidSpec("abs_tol must be positive"));
        }
        if self.base_order < 4 {
            return Err(QuadratureError::InvalidSpec("base_order must be at least 4"));
        }
        if self.max_subdivisions == 0 {
            return Err(QuadratureError::InvalidSpec("max_subdivisions must be positive"));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0: x0.min(x1), x1: x0.max(x1), y0: y0.min(y1), y1: y0.max(y1) }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Complex64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn contains(&self, p: Point) -> bool {
        p.re >= self.x0 && p.re <= self.x1 && p.im >= self.y0 && p.im <= self.y1
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    pub fn expand(&self, margin: f64) -> Rect {
        Rect::new(self.x0 - margin, self.x1 + margin, self.y0 - margin, self.y1 + margin)
    }

    fn quarters(&self) -> [Rect; 4] {
        let c = self.center();
        [
            Rect::new(self.x0, c.re, self.y0, c.im),
            Rect::new(c.re, self.x1, self.y0, c.im),
            Rect::new(self.x0, c.re, c.im, self.y1),
            Rect::new(c.re, self.x1, c.im, self.y1),
        ]
    }
}

/// Pairwise (cascade) summation; the result does not depend on how the
/// caller chunked the work, only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        let mut s = 0.0;
        for v in values {
            s += *v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Gauss–Legendre rule with `n` points on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn legendre(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Gauss–Jacobi rule for the weight `(1 - x)^alpha (1 + x)^beta`.
    pub fn jacobi(n: usize, alpha: f64, beta: f64) -> Self {
        assert!(n >= 1 && alpha > -1.0 && beta > -1.0);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        let alfbet = alpha + beta;
        let mut z = 0.0;
        for i in 0..n {
            // initial guesses follow the classical asymptotic placement
            if i == 0 {
                let an = alpha / nf;
                let bn = beta / nf;
                let r1 = (1.0 + alpha) * (2.78 / (4.0 + nf * nf) + 0.768 * an / nf);
                let r2 = 1.0 + 1.48 * an + 0.96 * bn + 0.452 * an * an + 0.83 * an * bn;
                z = 1.0 - r1 / r2;
            } else if i == 1 {
                let r1 = (4.1 + alpha) / ((1.0 + alpha) * (1.0 + 0.156 * alpha));
                let r2 = 1.0 + 0.06 * (nf - 8.0) * (1.0 + 0.12 * alpha) / nf;
                let r3 = 1.0 + 0.012 * beta * (1.0 + 0.25 * beta.abs()) / nf;
                z -= (1.0 - z) * r1 * r2 * r3;
            } else if i == 2 {
                let r1 = (1.67 + 0.28 * alpha) / (1.0 + 0.37 * alpha);
                let r2 = 1.0 + 0.22 * (nf - 8.0) / nf;
                let r3 = 1.0 + 8.0 * beta / ((6.28 + beta) * nf * nf);
                z -= (nodes[0] - z) * r1 * r2 * r3;
            } else if i == n - 2 {
                let r1 = (1.0 + 0.235 * beta) / (0.766 + 0.119 * beta);
                let r2 = 1.0 / (1.0 + 0.639 * (nf - 4.0) / (1.0 + 0.71 * (nf - 4.0)));
                let r3 = 1.0 / (1.0 + 20.0 * alpha / ((7.5 + alpha) * nf * nf));
                z += (z - nodes[n - 4]) * r1 * r2 * r3;
            } else if i == n - 1 {
                let r1 = (1.0 + 0.37 * beta) / (1.67 + 0.28 * beta);
                let r2 = 1.0 / (1.0 + 0.22 * (nf - 8.0) / nf);
                let r3 = 1.0 / (1.0 + 8.0 * alpha / ((6.28 + alpha) * nf * nf));
                z += (z - nodes[n - 3]) * r1 * r2 * r3;
            } else {
                z = 3.0 * nodes[i - 1] - 3.0 * nodes[i - 2] + nodes[i - 3];
            }
            let mut pp = 0.0;
            let mut temp = 0.0;
            for _ in 0..200 {
                temp = 2.0 + alfbet;
                let mut p1 = (alpha - beta + temp * z) / 2.0;
                let mut p2 = 1.0;
                for j in 2..=n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    temp = 2.0 * jf + alfbet;
                    let a = 2.0 * jf * (jf + alfbet) * (temp - 2.0);
                    let b = (temp - 1.0) * (alpha * alpha - beta * beta + temp * (temp - 2.0) * z);
                    let c = 2.0 * (jf - 1.0 + alpha) * (jf - 1.0 + beta) * temp;
                    p1 = (b * p2 - c * p3) / a;
                }
                pp = (nf * (alpha - beta - temp * z) * p1
                    + 2.0 * (nf + alpha) * (nf + beta) * p2)
                    / (temp * (1.0 - z * z));
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            nodes[i] = z;
            weights[i] = (libm::lgamma(alpha + nf) + libm::lgamma(beta + nf)
                - libm::lgamma(nf + 1.0)
                - libm::lgamma(nf + alfbet + 1.0))
            .exp()
                * temp
                * 2.0.powf(alfbet)
                / (pp * p2_at(n, alpha, beta, z));
        }
        // nodes come out descending
        nodes.reverse();
        weights.reverse();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes.iter().zip(self.weights.iter()).map(move |(x, w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
    }
    let nf = n as f64;
    let dp = nf * (z * p1 - p2) / (z * z - 1.0);
    (p1, dp)
}

// P_{n-1}^{(alpha,beta)}(z), needed by the Jacobi weight formula.
fn p2_at(n: usize, alpha: f64, beta: f64, z: f64) -> f64 {
    let alfbet = alpha + beta;
    let mut p1 = (alpha - beta + (2.0 + alfbet) * z) / 2.0;
    let mut p2 = 1.0;
    for j in 2..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        let temp = 2.0 * jf + alfbet;
        let a = 2.0 * jf * (jf + alfbet) * (temp - 2.0);
        let b = (temp - 1.0) * (alpha * alpha - beta * beta + temp * (temp - 2.0) * z);
        let c = 2.0 * (jf - 1.0 + alpha) * (jf - 1.0 + beta) * temp;
        p1 = (b * p2 - c * p3) / a;
    }
    p2
}

/// Values the adaptive interval integrator can accumulate.
pub trait Integrand: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Integrand, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron = kron + s * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * WG[j / 2];
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    let err = (kron - gauss).magnitude();
    (kron, err)
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration on `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate drops below `abs_tol` or `max_segments` is reached.
pub fn adaptive<T: Integrand, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<T, QuadratureError> {
    if a == b {
        return Ok(T::zero());
    }
    let (value, err) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, err });
    let mut total = value;
    let mut total_err = err;
    let mut segments = 1;
    while total_err > abs_tol {
        if segments >= max_segments {
            return Err(QuadratureError::BudgetExceeded { estimate: total_err, tol: abs_tol });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted floating point resolution
            heap.push(worst);
            return Err(QuadratureError::BudgetExceeded { estimate: total_err, tol: abs_tol });
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.err + e1 + e2;
        heap.push(Segment { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, err: e2 });
        segments += 1;
    }
    // re-sum to shed the drift of incremental updates
    let mut sum = T::zero();
    for s in heap.iter() {
        sum = sum + s.value;
    }
    let _ = total;
    Ok(sum)
}

/// Tensor Gauss–Legendre integral over a rectangle.
pub fn integrate_rect<F: FnMut(Point) -> f64>(rect: &Rect, rule: &GaussRule, mut f: F) -> f64 {
    let mut acc = 0.0;
    for (y, wy) in rule.mapped(rect.y0, rect.y1) {
        for (x, wx) in rule.mapped(rect.x0, rect.x1) {
            acc += wx * wy * f(Complex64::new(x, y));
        }
    }
    acc
}

/// Domain description for the hole-aware area integrator.
pub trait AreaDomain {
    /// True when the point belongs to the integration domain.
    fn contains(&self, p: Point) -> bool;
    /// True when the domain boundary may cross the rectangle.
    fn boundary_may_cross(&self, rect: &Rect) -> bool;
}

/// Whole plane, no holes.
pub struct Plane;

impl AreaDomain for Plane {
    fn contains(&self, _p: Point) -> bool {
        true
    }
    fn boundary_may_cross(&self, _rect: &Rect) -> bool {
        false
    }
}

impl AreaDomain for PorousLattice {
    fn contains(&self, p: Point) -> bool {
        self.in_fluid(p)
    }
    fn boundary_may_cross(&self, rect: &Rect) -> bool {
        self.hole_boxes().any(|b| b.intersects(rect))
    }
}

/// Integral of `g` over `regions ∩ domain` with adaptive quadtree cells.
///
/// Smooth cells are accepted when the parent rule and the sum of its four
/// children agree within a share of `abs_tol` proportional to the cell area.
/// Cells crossed by a hole boundary are refined down to `min_cell` and then
/// integrated with a masked rule (quadrature points inside holes dropped).
pub fn integrate_region<F, D>(
    g: F,
    regions: &[Rect],
    domain: &D,
    min_cell: f64,
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError>
where
    F: Fn(Point) -> f64,
    D: AreaDomain + ?Sized,
{
    spec.validate()?;
    let rule = GaussRule::legendre(spec.base_order);
    let total_area: f64 = regions.iter().map(Rect::area).sum();
    if total_area == 0.0 {
        return Ok(0.0);
    }
    let masked = |r: &Rect| -> f64 {
        integrate_rect(r, &rule, |p| if domain.contains(p) { g(p) } else { 0.0 })
    };
    let mut stack: Vec<(Rect, f64)> = regions.iter().map(|r| (*r, masked(r))).collect();
    let mut accepted: Vec<f64> = Vec::new();
    let mut budget = spec.max_subdivisions;
    let mut worst = 0.0f64;
    while let Some((cell, coarse)) = stack.pop() {
        let cut = domain.boundary_may_cross(&cell);
        let size = cell.width().max(cell.height());
        if cut && size <= min_cell {
            accepted.push(coarse);
            continue;
        }
        let kids = cell.quarters();
        let fine: [f64; 4] = [masked(&kids[0]), masked(&kids[1]), masked(&kids[2]), masked(&kids[3])];
        let fine_sum = pairwise_sum(&fine);
        let share = spec.abs_tol * cell.area() / total_area;
        let diff = (fine_sum - coarse).abs();
        if !cut && diff <= share {
            // Richardson-style: keep the finer estimate
            accepted.push(fine_sum);
            continue;
        }
        if budget == 0 {
            worst = worst.max(diff);
            accepted.push(fine_sum);
            continue;
        }
        budget -= 1;
        for (k, v) in kids.iter().zip(fine.iter()) {
            stack.push((*k, *v));
        }
    }
    if worst > 0.0 {
        return Err(QuadratureError::BudgetExceeded { estimate: worst, tol: spec.abs_tol });
    }
    Ok(pairwise_sum(&accepted))
}

/// `sqrt(∫ |g|²)` over `regions ∩ domain`.
pub fn l2_norm_region<F, D>(
    g: F,
    regions: &[Rect],
    domain: &D,
    min_cell: f64,
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError>
where
    F: Fn(Point) -> Complex64,
    D: AreaDomain + ?Sized,
{
    let sq = integrate_region(|p| g(p).norm_sqr(), regions, domain, min_cell, spec)?;
    Ok(sq.max(0.0).sqrt())
}

/// Dense-grid maximum of `g` with one local refinement pass around the top
/// decile of grid values.
pub fn sup_norm_region<F>(g: F, regions: &[Rect], grid: usize) -> f64
where
    F: Fn(Point) -> f64,
{
    let grid = grid.max(2);
    let mut samples: Vec<(f64, Point, f64, f64)> = Vec::new();
    for r in regions {
        let hx = r.width() / (grid - 1) as f64;
        let hy = r.height() / (grid - 1) as f64;
        for j in 0..grid {
            for i in 0..grid {
                let p = Complex64::new(r.x0 + hx * i as f64, r.y0 + hy * j as f64);
                samples.push((g(p).abs(), p, hx, hy));
            }
        }
    }
    if samples.is_empty() {
        return 0.0;
    }
    let mut values: Vec<f64> = samples.iter().map(|s| s.0).collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let cutoff = values[(values.len() / 10).min(values.len() - 1)];
    let mut best = values[0];
    for (v, p, hx, hy) in samples.iter() {
        if *v < cutoff {
            continue;
        }
        for j in -2i32..=2 {
            for i in -2i32..=2 {
                let q = *p + Complex64::new(0.25 * hx * i as f64, 0.25 * hy * j as f64);
                if regions.iter().any(|r| r.contains(q)) {
                    best = best.max(g(q).abs());
                }
            }
        }
    }
    best
}

/// One horizontal fiber of a fibered region: `x1 in [a, b]` at fixed `x2`.
/// `grade_a` / `grade_b` request geometric panel grading toward that end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fiber {
    pub a: f64,
    pub b: f64,
    pub grade_a: bool,
    pub grade_b: bool,
}

impl Fiber {
    pub fn plain(a: f64, b: f64) -> Self {
        Self { a, b, grade_a: false, grade_b: false }
    }
}

/// Panel layout for the fibered integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    pub order: usize,
    /// uniform panels per fiber interval
    pub panels: usize,
    /// geometric levels added toward graded ends (ratio 2)
    pub grading_levels: usize,
}

impl Default for FiberSpec {
    fn default() -> Self {
        Self { order: 12, panels: 2, grading_levels: 12 }
    }
}

fn panel_breaks(a: f64, b: f64, panels: usize, grade_a: bool, grade_b: bool, levels: usize) -> Vec<f64> {
    let mut pts = Vec::new();
    let len = b - a;
    if len <= 0.0 {
        return pts;
    }
    let panels = panels.max(1);
    for k in 0..=panels {
        pts.push(a + len * k as f64 / panels as f64);
    }
    let first = len / panels as f64;
    if grade_a {
        let mut h = first;
        for _ in 0..levels {
            h *= 0.5;
            pts.push(a + h);
        }
    }
    if grade_b {
        let mut h = first;
        for _ in 0..levels {
            h *= 0.5;
            pts.push(b - h);
        }
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
    pts
}

/// Integral over the region `{(x1, x2): x2 in [y_breaks], x1 in fibers(x2)}`.
///
/// `y_breaks` are the kinks of the fiber endpoints in `x2` (consecutive
/// entries delimit smooth panels); `y_grade` lists the `x2` values toward
/// which panels are geometrically graded. Node values are reduced with
/// pairwise summation so the result is independent of evaluation order.
pub fn integrate_fibered<G, Fb>(
    g: G,
    y_breaks: &[f64],
    y_grade: &[f64],
    fibers: Fb,
    spec: &FiberSpec,
) -> f64
where
    G: Fn(Point) -> f64,
    Fb: Fn(f64) -> Vec<Fiber>,
{
    let nodes = fibered_nodes(y_breaks, y_grade, fibers, spec);
    let vals: Vec<f64> = nodes.iter().map(|(p, w)| w * g(*p)).collect();
    pairwise_sum(&vals)
}

/// The weighted nodes used by [`integrate_fibered`], exposed so callers can
/// evaluate integrands in parallel.
pub fn fibered_nodes<Fb>(y_breaks: &[f64], y_grade: &[f64], fibers: Fb, spec: &FiberSpec) -> Vec<(Point, f64)>
where
    Fb: Fn(f64) -> Vec<Fiber>,
{
    let rule = GaussRule::legendre(spec.order);
    let mut ys: Vec<f64> = Vec::new();
    let mut sorted: Vec<f64> = y_breaks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    sorted.dedup();
    for w in sorted.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let ga = y_grade.iter().any(|g| (g - lo).abs() <= 1e-14 * (1.0 + lo.abs()));
        let gb = y_grade.iter().any(|g| (g - hi).abs() <= 1e-14 * (1.0 + hi.abs()));
        let brk = panel_breaks(lo, hi, spec.panels, ga, gb, spec.grading_levels);
        for p in brk.windows(2) {
            ys.push(p[0]);
            ys.push(p[1]);
        }
    }
    let mut out = Vec::new();
    for pair in ys.chunks(2) {
        for (y, wy) in rule.mapped(pair[0], pair[1]) {
            for fb in fibers(y) {
                let brk = panel_breaks(fb.a, fb.b, spec.panels, fb.grade_a, fb.grade_b, spec.grading_levels);
                for p in brk.windows(2) {
                    for (x, wx) in rule.mapped(p[0], p[1]) {
                        out.push((Complex64::new(x, y), wx * wy));
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = GaussRule::legendre(6);
        let v = r.integrate(0.0, 2.0, |x| x.powi(11));
        assert!((v - 2.0f64.powi(12) / 12.0).abs() < 1e-10);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_weights_match_beta_function() {
        // ∫ (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1, b+1)
        for &(a, b) in &[(0.0, 0.5), (0.3, 0.0), (0.25, 0.75)] {
            let r = GaussRule::jacobi(10, a, b);
            let s: f64 = r.weights.iter().sum();
            let exact = (2.0f64).powf(a + b + 1.0)
                * (libm::lgamma(a + 1.0) + libm::lgamma(b + 1.0) - libm::lgamma(a + b + 2.0)).exp();
            assert!((s - exact).abs() < 1e-12, "{a} {b} {s} {exact}");
            // first moment
            let m1: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| x * w).sum();
            let exact_m1 = exact * (b - a) / (a + b + 2.0);
            assert!((m1 - exact_m1).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_handles_algebraic_endpoint() {
        let v: f64 = adaptive(|x: f64| x.powf(0.3), 0.0, 1.0, 1e-12, 2000).unwrap();
        assert!((v - 1.0 / 1.3).abs() < 1e-11);
        let c: Complex64 =
            adaptive(|t: f64| Complex64::new(0.0, t).exp(), 0.0, PI, 1e-13, 100).unwrap();
        assert!((c - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn adaptive_reports_budget() {
        let r: Result<f64, _> = adaptive(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, 1e-14, 5);
        assert!(matches!(r, Err(QuadratureError::BudgetExceeded { .. })));
    }

    #[test]
    fn unit_square_area() {
        let spec = QuadratureSpec::default();
        let v = l2_norm_region(|_| Complex64::new(1.0, 0.0), &[Rect::new(0.0, 1.0, 0.0, 1.0)], &Plane, 1e-3, &spec)
            .unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    struct DiskHole;
    impl AreaDomain for DiskHole {
        fn contains(&self, p: Point) -> bool {
            (p - Complex64::new(0.5, 0.5)).norm() > 0.25
        }
        fn boundary_may_cross(&self, r: &Rect) -> bool {
            let c = Complex64::new(0.5, 0.5);
            let nx = c.re.clamp(r.x0, r.x1);
            let ny = c.im.clamp(r.y0, r.y1);
            let near = (Complex64::new(nx, ny) - c).norm();
            let far = [
                Complex64::new(r.x0, r.y0),
                Complex64::new(r.x1, r.y0),
                Complex64::new(r.x0, r.y1),
                Complex64::new(r.x1, r.y1),
            ]
            .iter()
            .map(|q| (q - c).norm())
            .fold(0.0, f64::max);
            near <= 0.25 && far >= 0.25
        }
    }

    #[test]
    fn square_minus_disk_area() {
        // exact area oracle: 1 - π/16
        let spec = QuadratureSpec { abs_tol: 1e-6, max_subdivisions: 200_000, base_order: 4 };
        let v = l2_norm_region(|_| Complex64::new(1.0, 0.0), &[Rect::new(0.0, 1.0, 0.0, 1.0)], &DiskHole, 2e-4, &spec)
            .unwrap();
        let exact = (1.0 - PI / 16.0).sqrt();
        assert!((v - exact).abs() < 1e-4, "{v} vs {exact}");
    }

    #[test]
    fn sup_of_linear_function() {
        let v = sup_norm_region(|p| p.re, &[Rect::new(0.0, 1.0, 0.0, 1.0)], 41);
        assert!((v - 1.0).abs() < 1e-3);
    }

    #[test]
    fn fibered_triangle_area() {
        // triangle 0 <= x2 <= 1, 0 <= x1 <= 1 - x2
        let v = integrate_fibered(|_| 1.0, &[0.0, 1.0], &[], |y| vec![Fiber::plain(0.0, 1.0 - y)], &FiberSpec::default());
        assert!((v - 0.5).abs() < 1e-13);
        let w = integrate_fibered(
            |p| p.norm().powf(-1.0 / 3.0),
            &[0.0, 1.0],
            &[0.0],
            |_| vec![Fiber { a: 0.0, b: 1.0, grade_a: true, grade_b: false }],
            &FiberSpec::default(),
        );
        let reference: f64 = integrate_fibered(
            |p| p.norm().powf(-1.0 / 3.0),
            &[0.0, 1.0],
            &[0.0],
            |_| vec![Fiber { a: 0.0, b: 1.0, grade_a: true, grade_b: false }],
            &FiberSpec { order: 16, panels: 4, grading_levels: 30 },
        );
        assert!((w - reference).abs() < 1e-4);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-10);
    }
}
