//! Cutoffs around each hole, the corrected velocity `v^ε[f] = ∇^⊥ψ^ε` and
//! the four cell terms `w¹…w⁴` of the residual `K[f] − v^ε[f]`.
//!
//! Cutoffs are written in hole-local coordinates `ξ = x − z_i`.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;
use thiserror::Error;

use crate::conformal::{rescaled_map, ConformalError, ConformalMap, RescaledMap};
use crate::fields::{biot_savart, smoothstep, smoothstep_derivative, FieldError, Provenance, SourceRule, VelocityField, VorticityField};
use crate::geometry::{ObstacleShape, Point, PorousLattice};
use crate::quadrature::{fibered_nodes, pairwise_sum, Fiber, FiberSpec, Rect};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrectorError {
    #[error("cutoff regime does not fit epsilon = {epsilon}, d_eps = {d_eps}")]
    RegimeMismatch { epsilon: f64, d_eps: f64 },
    #[error("invalid cutoff: {0}")]
    InvalidCutoff(String),
    #[error("no hole {0}")]
    NoSuchHole(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
}

/// Non-increasing step: 1 for `s ≤ 0`, 0 for `s ≥ 1`.
pub fn step(s: f64) -> f64 {
    1.0 - smoothstep(s)
}

pub fn step_derivative(s: f64) -> f64 {
    -smoothstep_derivative(s)
}

/// Right inner edge of the cutoff in units of `ε/2`: `P(s)` at `s = 2ξ₂/ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RightEdge {
    /// `1 − ρ|s|`, from the wedge bound at the corner `(1, 0)`.
    Wedge { rho: f64 },
    /// `1 − κ s²`, for obstacles without a corner at `(1, 0)`.
    Parabola { kappa: f64 },
}

impl RightEdge {
    fn p(&self, s: f64) -> f64 {
        match *self {
            RightEdge::Wedge { rho } => 1.0 - rho * s.abs(),
            RightEdge::Parabola { kappa } => 1.0 - kappa * s * s,
        }
    }

    fn dp(&self, s: f64) -> f64 {
        match *self {
            RightEdge::Wedge { rho } => -rho * s.signum(),
            RightEdge::Parabola { kappa } => -2.0 * kappa * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffRegime {
    /// `φ(2ξ/ε)` with `φ ≡ 1` on `[−1,1]²`, `0` outside `[−1−δ, 1+δ]²`.
    SmoothSquare { delta: f64 },
    /// Slanted layers hugging the wedge at the corner `(1, 0)`.
    CornerAdapted { rho: f64 },
    /// Same layer construction with a parabolic right edge.
    ProfileAdapted { kappa: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cutoff {
    pub regime: CutoffRegime,
    pub epsilon: f64,
    pub d_eps: f64,
    pub support_box: Rect,
}

/// Value and gradient of a cutoff at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSample {
    pub value: f64,
    pub gradient: Complex64,
}

/// Smooth tensor cutoff; needs `δ ≤ d_ε/ε` for disjoint translates.
pub fn cutoff_smooth(epsilon: f64, d_eps: f64, delta: f64) -> Result<Cutoff, CorrectorError> {
    if !(epsilon > 0.0 && d_eps > 0.0) {
        return Err(CorrectorError::InvalidCutoff(format!("epsilon = {epsilon}, d_eps = {d_eps}")));
    }
    if !(delta > 0.0) {
        return Err(CorrectorError::InvalidCutoff(format!("delta = {delta} must be positive")));
    }
    if delta * epsilon > d_eps * (1.0 + 1e-12) {
        return Err(CorrectorError::RegimeMismatch { epsilon, d_eps });
    }
    let h = 0.5 * epsilon * (1.0 + delta);
    Ok(Cutoff { regime: CutoffRegime::SmoothSquare { delta }, epsilon, d_eps, support_box: Rect::new(-h, h, -h, h) })
}

/// Corner-adapted cutoff for `d_ε < ε` and wedge slope `0 < ρ < 1`.
pub fn cutoff_corner(epsilon: f64, d_eps: f64, rho: f64) -> Result<Cutoff, CorrectorError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(CorrectorError::InvalidCutoff(format!("rho = {rho} must lie in (0, 1)")));
    }
    layered(CutoffRegime::CornerAdapted { rho }, epsilon, d_eps)
}

/// Profile-adapted cutoff for `d_ε < ε` and `0 ≤ κ ≤ 1/2`.
pub fn cutoff_profile(epsilon: f64, d_eps: f64, kappa: f64) -> Result<Cutoff, CorrectorError> {
    if !(kappa >= 0.0 && kappa <= 0.5) {
        return Err(CorrectorError::InvalidCutoff(format!("kappa = {kappa} must lie in [0, 1/2]")));
    }
    layered(CutoffRegime::ProfileAdapted { kappa }, epsilon, d_eps)
}

fn layered(regime: CutoffRegime, epsilon: f64, d_eps: f64) -> Result<Cutoff, CorrectorError> {
    if !(epsilon > 0.0 && d_eps > 0.0) {
        return Err(CorrectorError::InvalidCutoff(format!("epsilon = {epsilon}, d_eps = {d_eps}")));
    }
    if d_eps >= epsilon {
        return Err(CorrectorError::RegimeMismatch { epsilon, d_eps });
    }
    let mut c = Cutoff { regime, epsilon, d_eps, support_box: Rect::new(0.0, 0.0, -epsilon, epsilon) };
    // the layers move monotonically in |ξ₂|, so the extremes sit at 0 and ε
    let hi = c.upper(0.0);
    let lo = c.upper(epsilon) - (epsilon + d_eps);
    c.support_box = Rect::new(lo.min(c.upper(0.0) - epsilon - d_eps), hi.max(c.upper(epsilon)), -epsilon, epsilon);
    Ok(c)
}

/// Largest `κ ≤ 1/2` with the right profile of `K` below `1 − κs²`.
pub fn parabola_kappa(shape: &ObstacleShape) -> Result<f64, CorrectorError> {
    let mut kappa: f64 = 0.5;
    for k in 1..=1024 {
        for s in [k as f64 / 1024.0, -(k as f64) / 1024.0] {
            if let Some((_, hi)) = shape.chord(s) {
                if hi > 1.0 + 1e-12 {
                    return Err(CorrectorError::InvalidCutoff(format!("{} leaves x1 <= 1", shape.name)));
                }
                kappa = kappa.min((1.0 - hi) / (s * s));
            }
        }
    }
    Ok(kappa.max(0.0))
}

/// Regime choice: smooth squares when `d_ε ≥ ε`, otherwise the corner
/// layers when `K` has its wedge at `(1, 0)`, else the parabolic layers.
pub fn cutoff_for(shape: &ObstacleShape, epsilon: f64, d_eps: f64) -> Result<Cutoff, CorrectorError> {
    if d_eps >= epsilon {
        return cutoff_smooth(epsilon, d_eps, 1.0);
    }
    match shape.wedge_rho {
        Some(rho) => cutoff_corner(epsilon, d_eps, rho.min(0.99)),
        None => cutoff_profile(epsilon, d_eps, parabola_kappa(shape)?),
    }
}

impl Cutoff {
    fn edge(&self) -> Option<RightEdge> {
        match self.regime {
            CutoffRegime::SmoothSquare { .. } => None,
            CutoffRegime::CornerAdapted { rho } => Some(RightEdge::Wedge { rho }),
            CutoffRegime::ProfileAdapted { kappa } => Some(RightEdge::Parabola { kappa }),
        }
    }

    /// Right inner edge `a(ξ₂)` and its derivative.
    fn inner_right(&self, x2: f64) -> (f64, f64) {
        let e = self.edge().expect("layered regime");
        let s = 2.0 * x2 / self.epsilon;
        (0.5 * self.epsilon * e.p(s), e.dp(s))
    }

    /// Outer right edge `m(ξ₂)`, the midpoint of the gap to the next hole.
    fn upper(&self, x2: f64) -> f64 {
        let (a, _) = self.inner_right(x2);
        0.5 * (a + 0.5 * self.epsilon + self.d_eps)
    }

    /// x1-breakpoints of the layered construction at height `ξ₂`:
    /// `[lb, −ε/2, a, ub]`.
    pub fn layer_breaks(&self, x2: f64) -> Option<[f64; 4]> {
        self.edge()?;
        let (a, _) = self.inner_right(x2);
        let ub = 0.5 * (a + 0.5 * self.epsilon + self.d_eps);
        let lb = ub - (self.epsilon + self.d_eps);
        Some([lb, -0.5 * self.epsilon, a, ub])
    }

    pub fn value(&self, xi: Point) -> f64 {
        self.sample(xi).value
    }

    pub fn gradient(&self, xi: Point) -> Complex64 {
        self.sample(xi).gradient
    }

    pub fn sample(&self, xi: Point) -> CutoffSample {
        let zero = CutoffSample { value: 0.0, gradient: Complex64::new(0.0, 0.0) };
        match self.regime {
            CutoffRegime::SmoothSquare { delta } => {
                let h = 0.5 * self.epsilon;
                let f1 = |t: f64| {
                    let s = (t.abs() / h - 1.0) / delta;
                    (step(s), step_derivative(s) * t.signum() / (h * delta))
                };
                let (a, da) = f1(xi.re);
                let (b, db) = f1(xi.im);
                CutoffSample { value: a * b, gradient: Complex64::new(da * b, a * db) }
            }
            _ => {
                let eps = self.epsilon;
                let (x1, x2) = (xi.re, xi.im);
                if x2.abs() >= eps {
                    return zero;
                }
                let sv = (2.0 * x2.abs() - eps) / eps;
                let v = step(sv);
                let dv = step_derivative(sv) * 2.0 * x2.signum() / eps;
                let (a, da) = self.inner_right(x2);
                let m = 0.5 * (a + 0.5 * eps + self.d_eps);
                let dm = 0.5 * da;
                let w = 0.5 * (0.5 * eps + self.d_eps - a);
                let dw = -0.5 * da;
                let ub = m;
                let lb = m - (eps + self.d_eps);
                if x1 >= ub || x1 <= lb {
                    return zero;
                }
                let al = (ub - x1) / w;
                let be = (x1 - lb) / w;
                let h = 1.0 - step(al) - step(be);
                let dal = (-1.0 / w, (dm - al * dw) / w);
                let dbe = (1.0 / w, (-dm - be * dw) / w);
                let h1 = -step_derivative(al) * dal.0 - step_derivative(be) * dbe.0;
                let h2 = -step_derivative(al) * dal.1 - step_derivative(be) * dbe.1;
                CutoffSample { value: v * h, gradient: Complex64::new(v * h1, dv * h + v * h2) }
            }
        }
    }

    fn grading_levels(&self) -> usize {
        (((self.epsilon / self.d_eps).log2()).max(0.0) as usize) + 6
    }

    /// Weighted nodes covering the support; with `hole` given, the hole
    /// `(ε/2)K` is cut out and fibers are graded toward its boundary.
    pub fn support_nodes(&self, hole: Option<&ObstacleShape>, spec: &FiberSpec) -> Vec<(Point, f64)> {
        let eps = self.epsilon;
        let h = 0.5 * eps;
        let mut y_breaks: Vec<f64>;
        let mut y_grade: Vec<f64> = Vec::new();
        let mut spec = *spec;
        match self.regime {
            CutoffRegime::SmoothSquare { .. } => {
                let b = self.support_box;
                y_breaks = vec![b.y0, -h, h, b.y1];
            }
            _ => {
                y_breaks = vec![-eps, -h, 0.0, h, eps];
                y_grade.push(0.0);
                spec.grading_levels = spec.grading_levels.max(self.grading_levels());
            }
        }
        if let Some(shape) = hole {
            let bb = shape.bounding_box();
            y_breaks.push(h * bb.y0);
            y_breaks.push(h * bb.y1);
            for c in &shape.corners {
                y_breaks.push(h * c.point.im);
                y_grade.push(h * c.point.im);
            }
            if shape.corners.is_empty() {
                y_grade.push(h * bb.y0);
                y_grade.push(h * bb.y1);
            }
        }
        let chord = |x2: f64| -> Option<(f64, f64)> {
            let shape = hole?;
            let (lo, hi) = shape.chord(x2 / h)?;
            if hi - lo <= 0.0 {
                return None;
            }
            Some((h * lo, h * hi))
        };
        let layered = self.layer_breaks(0.0).is_some();
        let fibers = |x2: f64| -> Vec<Fiber> {
            let mut pieces: Vec<(f64, f64)> = Vec::new();
            if layered {
                let br = self.layer_breaks(x2).expect("layered");
                pieces.push((br[0], br[1]));
                pieces.push((br[1], br[2]));
                pieces.push((br[2], br[3]));
            } else {
                let b = self.support_box;
                pieces.push((b.x0, -h));
                pieces.push((-h, h));
                pieces.push((h, b.x1));
            }
            let mut out = Vec::new();
            let cut = chord(x2);
            for (a, b) in pieces {
                if b <= a {
                    continue;
                }
                match cut {
                    Some((lo, hi)) if lo < b && hi > a => {
                        if lo > a {
                            out.push(Fiber { a, b: lo, grade_a: false, grade_b: true });
                        }
                        if hi < b {
                            out.push(Fiber { a: hi, b, grade_a: true, grade_b: false });
                        }
                    }
                    _ => out.push(Fiber::plain(a, b)),
                }
            }
            out
        };
        fibered_nodes(&y_breaks, &y_grade, fibers, &spec)
    }

    /// `(‖φ‖_{L⁴}, ‖∇φ‖_{L²})` over the plane.
    pub fn norms(&self, spec: &FiberSpec) -> (f64, f64) {
        let nodes = self.support_nodes(None, spec);
        let mut l4 = Vec::with_capacity(nodes.len());
        let mut g2 = Vec::with_capacity(nodes.len());
        for (p, w) in &nodes {
            let s = self.sample(*p);
            l4.push(w * s.value.powi(4));
            g2.push(w * s.gradient.norm_sqr());
        }
        (pairwise_sum(&l4).powf(0.25), pairwise_sum(&g2).sqrt())
    }
}

/// The four cell terms at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellValues {
    pub w1: f64,
    pub w2: f64,
    pub w3: Complex64,
    pub w4: Complex64,
}

/// Per-hole norms of the cell terms over the cutoff support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellNorms {
    pub hole: usize,
    pub sup_w1: f64,
    pub sup_w2: f64,
    pub l4_w3: f64,
    pub l4_w4: f64,
}

/// Quadrature resolution for corrector integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorSpec {
    /// Radial and angular node counts of the source rule.
    pub source_radial: usize,
    pub source_angular: usize,
    pub fibers: FiberSpec,
    /// Tolerance of the whole-plane Biot–Savart evaluation.
    pub tol: f64,
}

impl Default for CorrectorSpec {
    fn default() -> Self {
        Self { source_radial: 10, source_angular: 40, fibers: FiberSpec { order: 8, panels: 1, grading_levels: 8 }, tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
struct HoleData {
    map: RescaledMap,
    /// `(T_i(y_j), T_i(y_j)*)` per source node.
    images: Vec<(Complex64, Complex64)>,
}

/// Everything needed to evaluate `v^ε[f]` and the cell terms.
#[derive(Debug, Clone)]
pub struct Corrector<'a> {
    pub lattice: &'a PorousLattice,
    pub map: Arc<ConformalMap>,
    pub cutoff: Cutoff,
    pub field: &'a VorticityField,
    pub rule: SourceRule,
    pub spec: CorrectorSpec,
    holes: Vec<HoleData>,
}

impl<'a> Corrector<'a> {
    pub fn new(
        lattice: &'a PorousLattice,
        map: Arc<ConformalMap>,
        cutoff: Cutoff,
        field: &'a VorticityField,
        spec: CorrectorSpec,
    ) -> Result<Self, CorrectorError> {
        let rule = field.source_rule(spec.source_radial, spec.source_angular);
        let mut holes = Vec::with_capacity(lattice.n_holes);
        for i in 0..lattice.n_holes {
            let m = rescaled_map(map.clone(), lattice.centers[i], lattice.epsilon);
            let images = rule
                .nodes
                .iter()
                .map(|(y, _)| {
                    let t = m.forward(*y)?;
                    Ok((t, t / t.norm_sqr()))
                })
                .collect::<Result<Vec<_>, ConformalError>>()?;
            holes.push(HoleData { map: m, images });
        }
        Ok(Self { lattice, map, cutoff, field, rule, spec, holes })
    }

    pub fn n_holes(&self) -> usize {
        self.holes.len()
    }

    /// `φ_i(x)` and its gradient.
    pub fn cutoff_at(&self, i: usize, x: Point) -> CutoffSample {
        self.cutoff.sample(x - self.lattice.centers[i])
    }

    /// Hole whose cutoff support contains `x`, if any.
    pub fn support_hole(&self, x: Point) -> Option<usize> {
        if self.holes.is_empty() {
            return None;
        }
        let guess = ((x.re - self.lattice.half_eps()) / self.lattice.period()).round();
        let lo = (guess - 1.0).max(0.0) as usize;
        let hi = ((guess + 1.0).max(0.0) as usize).min(self.holes.len() - 1);
        (lo..=hi).find(|&i| {
            let xi = x - self.lattice.centers[i];
            self.cutoff.support_box.contains(xi) && self.cutoff.value(xi) > 0.0
        })
    }

    /// `w¹…w⁴` of hole `i` at `x`.
    pub fn cell_values(&self, i: usize, x: Point) -> Result<CellValues, CorrectorError> {
        let hole = self.holes.get(i).ok_or(CorrectorError::NoSuchHole(i))?;
        let (tx, dtx) = hole.map.forward_with_derivative(x)?;
        let eps = self.lattice.epsilon;
        let beta = hole.map.beta();
        let mut w1 = Vec::with_capacity(self.rule.nodes.len());
        let mut w2 = Vec::with_capacity(self.rule.nodes.len());
        let mut s3 = Complex64::new(0.0, 0.0);
        let mut s4 = Complex64::new(0.0, 0.0);
        let inv_tx = 1.0 / tx;
        for ((y, w), (ty, ts)) in self.rule.nodes.iter().zip(&hole.images) {
            let dx = x - y;
            let dt = tx - ty;
            let dstar = tx - ts;
            w1.push(w * (2.0 * beta * dx.norm() / (eps * dt.norm())).ln());
            w2.push(w * (dstar.norm() * inv_tx.norm()).ln());
            s3 += (1.0 / dx - dtx / dt) * *w;
            s4 += (1.0 / dstar - inv_tx) * *w;
        }
        Ok(CellValues {
            w1: pairwise_sum(&w1),
            w2: pairwise_sum(&w2),
            w3: Complex64::i() * s3.conj(),
            w4: Complex64::i() * (dtx * s4).conj(),
        })
    }

    /// `K[f](x) − v^ε[f](x)` from the cell terms.
    pub fn residual(&self, x: Point) -> Result<Complex64, CorrectorError> {
        match self.support_hole(x) {
            None => Ok(Complex64::new(0.0, 0.0)),
            Some(i) => {
                let c = self.cutoff_at(i, x);
                let w = self.cell_values(i, x)?;
                Ok(residual_from_cell(c, &w))
            }
        }
    }

    /// `v^ε[f](x) = ∇^⊥ψ^ε(x)`, assembled by the product rule from the
    /// whole-plane and single-hole stream functions.
    pub fn velocity(&self, x: Point) -> Result<Complex64, CorrectorError> {
        let k = biot_savart(self.field, x, self.spec.tol)?;
        let i = match self.support_hole(x) {
            None => return Ok(k),
            Some(i) => i,
        };
        let hole = &self.holes[i];
        let c = self.cutoff_at(i, x);
        let (tx, dtx) = hole.map.forward_with_derivative(x)?;
        let eps = self.lattice.epsilon;
        let beta = hole.map.beta();
        let mut a = Vec::with_capacity(self.rule.nodes.len());
        let mut b = Vec::with_capacity(self.rule.nodes.len());
        let mut sb = Complex64::new(0.0, 0.0);
        for ((y, w), (ty, ts)) in self.rule.nodes.iter().zip(&hole.images) {
            let dt = tx - ty;
            let dstar = tx - ts;
            a.push(w * (x - y).norm().ln());
            b.push(w * (eps * dt.norm() * tx.norm() / (2.0 * beta * dstar.norm())).ln());
            sb += (1.0 / dt - 1.0 / dstar) * *w;
        }
        sb += self.rule.mass() / tx;
        let a = pairwise_sum(&a);
        let b = pairwise_sum(&b);
        let grad_perp_b = Complex64::i() * (dtx * sb).conj();
        let grad_perp_phi = Complex64::i() * c.gradient;
        // ∇^⊥[(1−φ)A + φB]/2π with ∇^⊥A = 2πK[f]
        Ok(k * (1.0 - c.value) + (grad_perp_phi * (b - a) + grad_perp_b * c.value) / (2.0 * PI))
    }

    /// Weighted quadrature nodes on `supp φ_i ∩ Ω^ε`.
    pub fn support_nodes(&self, i: usize) -> Vec<(Point, f64)> {
        let z = self.lattice.centers[i];
        self.cutoff
            .support_nodes(Some(&self.lattice.shape), &self.spec.fibers)
            .into_iter()
            .map(|(p, w)| (p + z, w))
            .collect()
    }

    /// `∫_{supp φ_i} |K[f] − v^ε[f]|²`.
    pub fn residual_l2_squared_hole(&self, i: usize) -> Result<f64, CorrectorError> {
        let mut acc = Vec::new();
        for (x, w) in self.support_nodes(i) {
            let c = self.cutoff_at(i, x);
            let v = self.cell_values(i, x)?;
            acc.push(w * residual_from_cell(c, &v).norm_sqr());
        }
        Ok(pairwise_sum(&acc))
    }

    /// `‖K[f] − v^ε[f]‖_{L²(Ω^ε)}`.
    pub fn residual_l2(&self) -> Result<f64, CorrectorError> {
        let mut parts = Vec::with_capacity(self.holes.len());
        for i in 0..self.holes.len() {
            parts.push(self.residual_l2_squared_hole(i)?);
        }
        Ok(pairwise_sum(&parts).sqrt())
    }

    /// Sup of `|w¹|, |w²|` over support nodes and `L⁴` norms of `w³, w⁴`.
    pub fn cell_norms(&self, i: usize) -> Result<CellNorms, CorrectorError> {
        let mut sup1: f64 = 0.0;
        let mut sup2: f64 = 0.0;
        let mut l3 = Vec::new();
        let mut l4 = Vec::new();
        for (x, w) in self.support_nodes(i) {
            let v = self.cell_values(i, x)?;
            sup1 = sup1.max(v.w1.abs());
            sup2 = sup2.max(v.w2.abs());
            l3.push(w * v.w3.norm_sqr().powi(2));
            l4.push(w * v.w4.norm_sqr().powi(2));
        }
        Ok(CellNorms { hole: i, sup_w1: sup1, sup_w2: sup2, l4_w3: pairwise_sum(&l3).powf(0.25), l4_w4: pairwise_sum(&l4).powf(0.25) })
    }
}

impl VelocityField for Corrector<'_> {
    fn velocity(&self, x: Point) -> Result<Complex64, FieldError> {
        Corrector::velocity(self, x).map_err(|e| match e {
            CorrectorError::Field(f) => f,
            CorrectorError::Conformal(c) => FieldError::Conformal(c),
            other => FieldError::InvalidField(format!("{other}")),
        })
    }

    fn provenance(&self) -> Provenance {
        Provenance::Corrector
    }
}

/// `(1/2π)[∇^⊥φ (w¹ + w²) + φ (w³ + w⁴)]`.
pub fn residual_from_cell(c: CutoffSample, w: &CellValues) -> Complex64 {
    (Complex64::i() * c.gradient * (w.w1 + w.w2) + (w.w3 + w.w4) * c.value) / (2.0 * PI)
}

/// One-shot `v^ε[f](x)` with the default resolution.
pub fn corrector_velocity(
    lattice: &PorousLattice,
    map: Arc<ConformalMap>,
    cutoff: &Cutoff,
    f: &VorticityField,
    x: Point,
    tol: f64,
) -> Result<Complex64, CorrectorError> {
    let spec = CorrectorSpec { tol, ..CorrectorSpec::default() };
    Corrector::new(lattice, map, cutoff.clone(), f, spec)?.velocity(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_cutoff_examples() {
        let c = cutoff_smooth(0.1, 0.1, 1.0).unwrap();
        assert_eq!(c.value(Complex64::new(0.0, 0.0)), 1.0);
        assert_eq!(c.value(Complex64::new(0.2, 0.0)), 0.0);
        assert!(matches!(cutoff_smooth(0.1, 0.05, 1.0), Err(CorrectorError::RegimeMismatch { .. })));
    }

    #[test]
    fn corner_cutoff_examples() {
        let c = cutoff_corner(0.1, 0.01, 0.9).unwrap();
        assert_eq!(c.value(Complex64::new(0.0, 0.0)), 1.0);
        assert_eq!(c.value(Complex64::new(0.0, 0.2)), 0.0);
        assert!(matches!(cutoff_corner(0.1, 0.1, 0.9), Err(CorrectorError::RegimeMismatch { .. })));
        let b = c.support_box;
        assert!(b.x0 >= -0.1 - 0.005 - 1e-15 && b.x1 <= 0.055 + 1e-15);
    }

    #[test]
    fn corner_layers_match_displayed_formula() {
        let (eps, d, rho) = (0.1, 0.01, 0.9);
        let c = cutoff_corner(eps, d, rho).unwrap();
        let phi = step;
        for k in 0..400 {
            let x1 = -0.11 + 0.17 * (k as f64 * 0.618).fract();
            let x2 = -0.1 + 0.2 * (k as f64 * 0.377).fract();
            let dd = d / 2.0 + rho / 2.0 * x2.abs();
            let lit = phi((2.0 * x2.abs() - eps) / eps)
                * (1.0 - phi(((eps + d) / 2.0 - rho / 2.0 * x2.abs() - x1) / dd) - phi((x1 + (eps + d) / 2.0 + rho / 2.0 * x2.abs()) / dd));
            let lit = if x1 >= (eps + d) / 2.0 - rho / 2.0 * x2.abs() || x1 <= -(eps + d) / 2.0 - rho / 2.0 * x2.abs() { 0.0 } else { lit };
            assert!((c.value(Complex64::new(x1, x2)) - lit).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_differences() {
        for c in [cutoff_corner(0.1, 0.01, 0.9).unwrap(), cutoff_profile(0.1, 0.001, 0.5).unwrap(), cutoff_smooth(0.1, 0.2, 1.0).unwrap()] {
            let h = 1e-8;
            for k in 0..200 {
                let p = Complex64::new(-0.1 + 0.2 * (k as f64 * 0.618).fract(), -0.1 + 0.2 * (k as f64 * 0.377).fract());
                if p.im.abs() < 1e-6 {
                    continue;
                }
                let g = c.gradient(p);
                let fx = (c.value(p + h) - c.value(p - h)) / (2.0 * h);
                let fy = (c.value(p + Complex64::new(0.0, h)) - c.value(p - Complex64::new(0.0, h))) / (2.0 * h);
                let scale = 1.0 + g.norm();
                assert!((g.re - fx).abs() < 1e-4 * scale && (g.im - fy).abs() < 1e-4 * scale, "{p}: {g} vs {fx} {fy}");
            }
        }
    }

    #[test]
    fn disk_kappa() {
        assert!((parabola_kappa(&ObstacleShape::disk()).unwrap() - 0.5).abs() < 1e-9);
    }
}
