//! Vortex-blob transport in the whole plane and in the perforated domain.
//!
//! The perforated velocity is the blob field plus one zero-circulation
//! harmonic correction per hole, `∇^⊥ Re F_j`, with `F_j(x) = Σ c_{j,n} ζ^{-n}`
//! and `ζ = T_j(x)`. Coefficients come from the method of reflections: each
//! pass makes the total stream function constant on every hole in turn.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;
use thiserror::Error;

use crate::conformal::{rescaled_map, ConformalError, ConformalMap, RescaledMap};
use crate::experiments::rate_bound;
use crate::fields::{FieldError, Provenance, VelocityField, VorticityField};
use crate::geometry::{Point, PorousLattice};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("method of reflections stagnated at residual {residual:e} after {passes} passes")]
    ReflectionsDiverged { passes: usize, residual: f64 },
    #[error("blob {index} entered hole {hole} at t = {t}")]
    BlobEnteredHole { index: usize, hole: usize, t: f64 },
    #[error("vorticity support is {distance} from the segment; the guard requires at least {guard}")]
    SupportTooClose { distance: f64, guard: f64 },
    #[error("step too large: dt * max|u| = {courant:e} exceeds the blob core {core:e}")]
    StepTooLarge { courant: f64, core: f64 },
    #[error("invalid simulation input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
}

/// Required distance between `supp ω₀` and the segment.
pub const SUPPORT_GUARD: f64 = 0.3;

/// Regularized blob kernel `(x−y)^⊥ / (2π(|x−y|² + δ²))`.
pub fn blob_kernel(v: Complex64, core: f64) -> Complex64 {
    let r2 = v.norm_sqr() + core * core;
    if r2 == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::i() * v / (2.0 * PI * r2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobEnsemble {
    pub positions: Vec<Point>,
    /// Circulation per blob; never changes.
    pub weights: Vec<f64>,
    pub core: f64,
    pub t: f64,
}

impl BlobEnsemble {
    /// Cell-centred seeds of spacing `h` on the support of `f`, weight
    /// `f(x_p) h²`, core `2h`.
    pub fn from_field(f: &VorticityField, h: f64) -> Result<Self, SimError> {
        if !(h > 0.0) {
            return Err(SimError::Invalid("seed spacing must be positive".into()));
        }
        let mut positions = Vec::new();
        let mut weights = Vec::new();
        if !f.blobs.is_empty() {
            let b = f.support_box;
            let nx = ((b.x1 - b.x0) / h).ceil() as usize;
            let ny = ((b.y1 - b.y0) / h).ceil() as usize;
            let (cx, cy) = (0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1));
            for j in 0..ny {
                for i in 0..nx {
                    let p = Complex64::new(cx + (i as f64 - 0.5 * (nx as f64 - 1.0)) * h, cy + (j as f64 - 0.5 * (ny as f64 - 1.0)) * h);
                    let w = f.eval(p);
                    if w != 0.0 {
                        positions.push(p);
                        weights.push(w * h * h);
                    }
                }
            }
        }
        Ok(Self { positions, weights, core: 2.0 * h, t: 0.0 })
    }

    pub fn point_vortices(positions: Vec<Point>, weights: Vec<f64>) -> Self {
        Self { positions, weights, core: 0.0, t: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_circulation(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ w_p X_p / Σ w_p`.
    pub fn center_of_vorticity(&self) -> Point {
        let s: Complex64 = self.positions.iter().zip(&self.weights).map(|(p, w)| p * *w).sum();
        s / self.total_circulation()
    }

    /// `Σ w_p |X_p|²`.
    pub fn second_moment(&self) -> f64 {
        self.positions.iter().zip(&self.weights).map(|(p, w)| w * p.norm_sqr()).sum()
    }

    pub fn stream(&self, x: Point) -> f64 {
        let d2 = self.core * self.core;
        self.positions.iter().zip(&self.weights).map(|(p, w)| w * ((x - p).norm_sqr() + d2).ln()).sum::<f64>() / (4.0 * PI)
    }

    pub fn velocity(&self, x: Point) -> Complex64 {
        self.positions.iter().zip(&self.weights).map(|(p, w)| blob_kernel(x - p, self.core) * *w).sum()
    }

    pub fn with_positions(&self, positions: Vec<Point>) -> Self {
        Self { positions, weights: self.weights.clone(), core: self.core, t: self.t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionSpec {
    /// θ-uniform boundary nodes per hole; the series keeps `nodes/2 − 1` modes.
    pub nodes: usize,
    pub tol: f64,
    pub max_passes: usize,
    /// Consecutive passes without a 1% decrease before giving up.
    pub stagnation: usize,
    /// Relative magnitude below which series tails are dropped.
    pub cut: f64,
}

impl Default for ReflectionSpec {
    fn default() -> Self {
        Self { nodes: 1024, tol: 1e-6, max_passes: 50, stagnation: 10, cut: 1e-12 }
    }
}

#[derive(Debug, Clone)]
struct Pair {
    source: usize,
    zeta_inv: Vec<Complex64>,
    terms: usize,
}

/// Coefficients of all hole corrections.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflected {
    pub coeffs: Vec<Vec<Complex64>>,
    pub passes: usize,
    pub residual: f64,
}

/// Geometry-dependent data of the method of reflections, reused across solves.
#[derive(Debug, Clone)]
pub struct ReflectionSolver<'a> {
    pub lattice: &'a PorousLattice,
    pub spec: ReflectionSpec,
    maps: Vec<RescaledMap>,
    nodes: Vec<Vec<Point>>,
    pairs: Vec<Vec<Pair>>,
    twiddle: Vec<Complex64>,
    modes: usize,
}

impl<'a> ReflectionSolver<'a> {
    pub fn new(lattice: &'a PorousLattice, map: Arc<ConformalMap>, spec: ReflectionSpec) -> Result<Self, SimError> {
        if spec.nodes < 8 || !(spec.tol > 0.0) {
            return Err(SimError::Invalid("reflections need at least 8 nodes and a positive tolerance".into()));
        }
        let n = spec.nodes;
        let twiddle: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64)).collect();
        let maps: Vec<RescaledMap> = lattice.centers.iter().map(|&z| rescaled_map(map.clone(), z, lattice.epsilon)).collect();
        let mut nodes = Vec::with_capacity(maps.len());
        for m in &maps {
            let pts = (0..n).map(|k| m.inverse(twiddle[k].conj())).collect::<Result<Vec<_>, _>>()?;
            nodes.push(pts);
        }
        let modes = n / 2 - 1;
        let mut pairs = Vec::with_capacity(maps.len());
        for (i, pts) in nodes.iter().enumerate() {
            let mut row = Vec::new();
            for (j, m) in maps.iter().enumerate() {
                if i == j {
                    continue;
                }
                let zeta_inv = pts.iter().map(|p| m.forward(*p).map(|z| 1.0 / z)).collect::<Result<Vec<_>, _>>()?;
                let rmax = zeta_inv.iter().map(|z| z.norm()).fold(0.0, f64::max);
                let terms = if rmax <= 0.0 { 0 } else { ((spec.cut.ln() / rmax.ln()).ceil().max(1.0) as usize).min(modes) };
                row.push(Pair { source: j, zeta_inv, terms });
            }
            pairs.push(row);
        }
        Ok(Self { lattice, spec, maps, nodes, pairs, twiddle, modes })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn boundary_nodes(&self, i: usize) -> &[Point] {
        &self.nodes[i]
    }

    pub fn zero(&self) -> Reflected {
        Reflected { coeffs: vec![vec![Complex64::new(0.0, 0.0); self.modes]; self.maps.len()], passes: 0, residual: 0.0 }
    }

    /// Gauss–Seidel reflections for the incident stream function `psi0`.
    pub fn solve<S: Fn(Point) -> f64>(&self, psi0: S, warm: Option<&Reflected>) -> Result<Reflected, SimError> {
        let n = self.spec.nodes;
        let base: Vec<Vec<f64>> = self.nodes.iter().map(|pts| pts.iter().map(|p| psi0(*p)).collect()).collect();
        let mut out = match warm {
            Some(w) if w.coeffs.len() == self.maps.len() => Reflected { coeffs: w.coeffs.clone(), passes: 0, residual: f64::INFINITY },
            _ => Reflected { residual: f64::INFINITY, ..self.zero() },
        };
        if self.maps.is_empty() {
            out.residual = 0.0;
            return Ok(out);
        }
        let scale = 2.0 / self.lattice.epsilon;
        let mut best = f64::INFINITY;
        let mut stale = 0;
        let mut data = vec![0.0; n];
        for pass in 1..=self.spec.max_passes {
            let mut res: f64 = 0.0;
            for i in 0..self.maps.len() {
                data.copy_from_slice(&base[i]);
                for pr in &self.pairs[i] {
                    let c = &out.coeffs[pr.source];
                    for (k, zi) in pr.zeta_inv.iter().enumerate() {
                        data[k] += horner(&c[..pr.terms], *zi).re;
                    }
                }
                let new = self.coefficients(&data);
                let delta: f64 = new.iter().zip(&out.coeffs[i]).enumerate().map(|(m, (a, b))| (m + 1) as f64 * (a - b).norm()).sum();
                res = res.max(delta * scale);
                out.coeffs[i] = new;
            }
            out.passes = pass;
            out.residual = res;
            if res < self.spec.tol {
                return Ok(out);
            }
            if res < 0.99 * best {
                best = res;
                stale = 0;
            } else {
                stale += 1;
                if stale >= self.spec.stagnation {
                    return Err(SimError::ReflectionsDiverged { passes: pass, residual: res });
                }
            }
        }
        Ok(out)
    }

    /// `c_n = −conj(b_n)` for the samples `h_k = a_0 + Σ Re(b_n e^{inθ_k})`.
    fn coefficients(&self, data: &[f64]) -> Vec<Complex64> {
        let n = data.len();
        (1..=self.modes)
            .map(|m| {
                let mut b = Complex64::new(0.0, 0.0);
                for (k, h) in data.iter().enumerate() {
                    b += self.twiddle[(k * m) % n] * *h;
                }
                -(b * (2.0 / n as f64)).conj()
            })
            .collect()
    }

    fn hole_of(&self, x: Point) -> Option<usize> {
        self.lattice.hole_at(x)
    }

    /// `Σ_j Re F_j(x)`.
    pub fn correction_stream(&self, r: &Reflected, x: Point) -> Result<f64, SimError> {
        let mut s = 0.0;
        for (m, c) in self.maps.iter().zip(&r.coeffs) {
            let zi = 1.0 / m.forward(x)?;
            s += horner(&c[..self.terms_at(zi)], zi).re;
        }
        Ok(s)
    }

    /// `Σ_j ∇^⊥ Re F_j(x) = Σ_j i·conj(F_j'(x))`.
    pub fn correction_velocity(&self, r: &Reflected, x: Point) -> Result<Complex64, SimError> {
        let mut u = Complex64::new(0.0, 0.0);
        for (m, c) in self.maps.iter().zip(&r.coeffs) {
            let (z, dz) = m.forward_with_derivative(x)?;
            let zi = 1.0 / z;
            let terms = self.terms_at(zi);
            // F' = −Σ n c_n ζ^{−n−1} ζ'
            let mut acc = Complex64::new(0.0, 0.0);
            for k in (0..terms).rev() {
                acc = acc * zi + c[k] * (k + 1) as f64;
            }
            let fp = -acc * zi * zi * dz;
            u += Complex64::i() * fp.conj();
        }
        Ok(u)
    }

    fn terms_at(&self, zi: Complex64) -> usize {
        let r = zi.norm();
        if r >= 1.0 - 1e-15 {
            return self.modes;
        }
        (((self.spec.cut.ln() / r.ln()).ceil().max(1.0)) as usize).min(self.modes)
    }

    /// Solves for `blobs` and returns the total velocity at each of `xs`.
    pub fn velocities(&self, blobs: &BlobEnsemble, xs: &[Point], warm: Option<&Reflected>) -> Result<(Vec<Complex64>, Reflected), SimError> {
        let r = self.solve(|p| blobs.stream(p), warm)?;
        let mut out = Vec::with_capacity(xs.len());
        for (idx, x) in xs.iter().enumerate() {
            if let Some(h) = self.hole_of(*x) {
                return Err(SimError::BlobEnteredHole { index: idx, hole: h, t: blobs.t });
            }
            out.push(blobs.velocity(*x) + self.correction_velocity(&r, *x)?);
        }
        Ok((out, r))
    }
}

/// `Σ_{n≥1} c_n z^n` for `z = 1/ζ`.
fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for a in c.iter().rev() {
        acc = acc * z + a;
    }
    acc * z
}

/// Blob field plus converged reflections, as a velocity field.
#[derive(Debug, Clone)]
pub struct ReflectedVelocity<'a, 'b> {
    pub solver: &'b ReflectionSolver<'a>,
    pub blobs: &'b BlobEnsemble,
    pub reflected: Reflected,
}

impl<'a, 'b> ReflectedVelocity<'a, 'b> {
    pub fn new(solver: &'b ReflectionSolver<'a>, blobs: &'b BlobEnsemble) -> Result<Self, SimError> {
        let reflected = solver.solve(|p| blobs.stream(p), None)?;
        Ok(Self { solver, blobs, reflected })
    }

    pub fn stream(&self, x: Point) -> Result<f64, SimError> {
        Ok(self.blobs.stream(x) + self.solver.correction_stream(&self.reflected, x)?)
    }
}

impl VelocityField for ReflectedVelocity<'_, '_> {
    fn velocity(&self, x: Point) -> Result<Complex64, FieldError> {
        let c = self.solver.correction_velocity(&self.reflected, x).map_err(|e| match e {
            SimError::Conformal(c) => FieldError::Conformal(c),
            other => FieldError::InvalidField(alloc::format!("{other}")),
        })?;
        Ok(self.blobs.velocity(x) + c)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Reflected
    }
}

/// One-shot perforated velocity at `x` with default resolution.
pub fn velocity_perforated(lattice: &PorousLattice, map: Arc<ConformalMap>, blobs: &BlobEnsemble, x: Point, tol: f64) -> Result<Complex64, SimError> {
    let solver = ReflectionSolver::new(lattice, map, ReflectionSpec { tol, ..ReflectionSpec::default() })?;
    let (u, _) = solver.velocities(blobs, &[x], None)?;
    Ok(u[0])
}

/// One classical RK4 step of `dX/dt = u(t, X)`.
pub fn rk4_step<F>(pos: &[Point], t: f64, dt: f64, vel: &mut F) -> Result<Vec<Point>, SimError>
where
    F: FnMut(f64, &[Point]) -> Result<Vec<Complex64>, SimError>,
{
    let shift = |a: &[Complex64], s: f64| -> Vec<Point> { pos.iter().zip(a).map(|(p, k)| p + k * s).collect() };
    let k1 = vel(t, pos)?;
    let k2 = vel(t + 0.5 * dt, &shift(&k1, 0.5 * dt))?;
    let k3 = vel(t + 0.5 * dt, &shift(&k2, 0.5 * dt))?;
    let k4 = vel(t + dt, &shift(&k3, dt))?;
    Ok(pos
        .iter()
        .enumerate()
        .map(|(i, p)| p + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
        .collect())
}

/// Whole-plane blob velocities at the blobs themselves.
pub fn plane_velocities(blobs: &BlobEnsemble, xs: &[Point]) -> Vec<Complex64> {
    let e = blobs.with_positions(xs.to_vec());
    xs.iter().map(|x| e.velocity(*x)).collect()
}

fn check_courant(u: &[Complex64], dt: f64, core: f64) -> Result<(), SimError> {
    if core > 0.0 {
        let umax = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if dt.abs() * umax > core {
            return Err(SimError::StepTooLarge { courant: dt.abs() * umax, core });
        }
    }
    Ok(())
}

/// Whole-plane RK4 run; returns snapshots after every step, the initial
/// state first. Negative `dt` runs backward.
pub fn advect_plane(blobs: &BlobEnsemble, dt: f64, steps: usize) -> Result<Vec<BlobEnsemble>, SimError> {
    let mut traj = vec![blobs.clone()];
    let mut cur = blobs.clone();
    let template = cur_weights(blobs);
    let mut vel = |_t: f64, xs: &[Point]| Ok(plane_velocities(&template, xs));
    for _ in 0..steps {
        check_courant(&plane_velocities(&cur, &cur.positions), dt, cur.core)?;
        let next = rk4_step(&cur.positions, cur.t, dt, &mut vel)?;
        cur = BlobEnsemble { positions: next, weights: cur.weights.clone(), core: cur.core, t: cur.t + dt };
        traj.push(cur.clone());
    }
    Ok(traj)
}

fn cur_weights(b: &BlobEnsemble) -> BlobEnsemble {
    BlobEnsemble { positions: Vec::new(), ..b.clone() }
}

/// Perforated-domain stepper keeping the last reflections as warm start.
#[derive(Debug, Clone)]
pub struct PerforatedStepper<'a, 'b> {
    pub solver: &'b ReflectionSolver<'a>,
    pub last: Option<Reflected>,
    pub max_passes_seen: usize,
}

impl<'a, 'b> PerforatedStepper<'a, 'b> {
    pub fn new(solver: &'b ReflectionSolver<'a>) -> Self {
        Self { solver, last: None, max_passes_seen: 0 }
    }

    pub fn velocities(&mut self, template: &BlobEnsemble, t: f64, xs: &[Point]) -> Result<Vec<Complex64>, SimError> {
        let mut e = template.with_positions(xs.to_vec());
        e.t = t;
        let (u, r) = self.solver.velocities(&e, xs, self.last.as_ref())?;
        self.max_passes_seen = self.max_passes_seen.max(r.passes);
        self.last = Some(r);
        Ok(u)
    }

    pub fn step(&mut self, cur: &BlobEnsemble, dt: f64) -> Result<BlobEnsemble, SimError> {
        let u0 = self.velocities(cur, cur.t, &cur.positions)?;
        check_courant(&u0, dt, cur.core)?;
        let mut vel = |t: f64, xs: &[Point]| self.velocities(cur, t, xs);
        let next = rk4_step(&cur.positions, cur.t, dt, &mut vel)?;
        Ok(BlobEnsemble { positions: next, weights: cur.weights.clone(), core: cur.core, t: cur.t + dt })
    }
}

/// Whole-plane and perforated positions of one seed over time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair {
    pub seed_id: usize,
    pub plane: Vec<Point>,
    pub perforated: Vec<Point>,
    pub sup_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSpec {
    pub spacing: f64,
    pub t_end: f64,
    pub dt: f64,
    pub reflections: ReflectionSpec,
    /// Probe grid resolution for the velocity gap.
    pub probe: usize,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self { spacing: 0.02, t_end: 1.0, dt: 0.025, reflections: ReflectionSpec { nodes: 256, ..ReflectionSpec::default() }, probe: 8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub epsilon: f64,
    pub d_eps: f64,
    pub times: Vec<f64>,
    pub pairs: Vec<TrajectoryPair>,
    /// `max_p |X^ε − X|` at each time.
    pub gap: Vec<f64>,
    pub traj_gap_sup: f64,
    pub vorticity_proxy: f64,
    pub velocity_gap: f64,
    pub bound: f64,
    pub ratio: f64,
    pub max_passes: usize,
    /// First time the perforated support came within `ε` of the segment.
    pub support_reached: Option<f64>,
}

/// Distance from `supp f` to the segment `[0, 1] × {0}`.
pub fn support_to_segment(f: &VorticityField) -> f64 {
    f.blobs
        .iter()
        .map(|b| (segment_distance(b.center) - b.support_radius()).max(0.0))
        .fold(f64::INFINITY, f64::min)
}

pub fn segment_distance(p: Point) -> f64 {
    let x = p.re.clamp(0.0, 1.0);
    (p - Complex64::new(x, 0.0)).norm()
}

/// Runs both flows from the same seeds and compares them.
pub fn stability_report(
    omega0: &VorticityField,
    lattice: &PorousLattice,
    map: Arc<ConformalMap>,
    spec: &SimSpec,
) -> Result<StabilityReport, SimError> {
    let dist = support_to_segment(omega0);
    if dist < SUPPORT_GUARD {
        return Err(SimError::SupportTooClose { distance: dist, guard: SUPPORT_GUARD });
    }
    if !(spec.dt > 0.0 && spec.t_end > 0.0) {
        return Err(SimError::Invalid("dt and t_end must be positive".into()));
    }
    let steps = (spec.t_end / spec.dt).round().max(1.0) as usize;
    let dt = spec.t_end / steps as f64;
    let seeds = BlobEnsemble::from_field(omega0, spec.spacing)?;
    let solver = ReflectionSolver::new(lattice, map, spec.reflections)?;
    let mut stepper = PerforatedStepper::new(&solver);
    let np = seeds.len();
    let mut plane = seeds.clone();
    let mut perf = seeds.clone();
    let mut times = vec![0.0];
    let mut hist_plane = vec![seeds.positions.clone()];
    let mut hist_perf = vec![seeds.positions.clone()];
    let mut gap = vec![0.0];
    let mut reached = None;
    if np > 0 {
        let template = cur_weights(&seeds);
        let mut vel = |_t: f64, xs: &[Point]| Ok(plane_velocities(&template, xs));
        for _ in 0..steps {
            check_courant(&plane_velocities(&plane, &plane.positions), dt, plane.core)?;
            let next = rk4_step(&plane.positions, plane.t, dt, &mut vel)?;
            plane = BlobEnsemble { positions: next, weights: plane.weights.clone(), core: plane.core, t: plane.t + dt };
            perf = stepper.step(&perf, dt)?;
            let g = plane.positions.iter().zip(&perf.positions).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            times.push(plane.t);
            hist_plane.push(plane.positions.clone());
            hist_perf.push(perf.positions.clone());
            gap.push(g);
            if perf.positions.iter().any(|p| segment_distance(*p) < lattice.epsilon) {
                reached = Some(perf.t);
                break;
            }
        }
    }
    let pairs: Vec<TrajectoryPair> = (0..np)
        .map(|p| {
            let a: Vec<Point> = hist_plane.iter().map(|s| s[p]).collect();
            let b: Vec<Point> = hist_perf.iter().map(|s| s[p]).collect();
            let sup = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            TrajectoryPair { seed_id: p, plane: a, perforated: b, sup_gap: sup }
        })
        .collect();
    let traj_gap_sup = gap.iter().cloned().fold(0.0, f64::max);
    let vorticity_proxy = if np == 0 { 0.0 } else { vorticity_proxy(omega0, &seeds.positions, &plane.positions, &perf.positions) };
    let velocity_gap = if np == 0 { 0.0 } else { velocity_gap(&plane, &perf, &solver, stepper.last.as_ref(), lattice, spec.probe)? };
    let bound = rate_bound(lattice.epsilon, lattice.d_eps);
    Ok(StabilityReport {
        epsilon: lattice.epsilon,
        d_eps: lattice.d_eps,
        times,
        pairs,
        gap,
        traj_gap_sup,
        vorticity_proxy,
        velocity_gap,
        bound,
        ratio: traj_gap_sup / bound,
        max_passes: stepper.max_passes_seen,
        support_reached: reached,
    })
}

/// `max_p |ω(t, X^ε_p) − ω^ε(t, X^ε_p)|`. The perforated value is exactly
/// `ω₀(x_p)`; the whole-plane one is `ω₀(x_p) + ∇ω(t, X_p)·(X^ε_p − X_p)`
/// with the gradient from a least-squares plane through nearby seeds.
fn vorticity_proxy(omega0: &VorticityField, seeds: &[Point], plane: &[Point], perf: &[Point]) -> f64 {
    let vals: Vec<f64> = seeds.iter().map(|s| omega0.eval(*s)).collect();
    let mut worst: f64 = 0.0;
    for (p, x) in plane.iter().enumerate() {
        let mut idx: Vec<usize> = (0..plane.len()).collect();
        idx.sort_by(|&a, &b| (plane[a] - x).norm_sqr().total_cmp(&(plane[b] - x).norm_sqr()));
        idx.truncate(9);
        let g = local_gradient(&idx.iter().map(|&k| (plane[k] - x, vals[k])).collect::<Vec<_>>());
        let d = perf[p] - x;
        worst = worst.max((g.re * d.re + g.im * d.im).abs());
    }
    worst
}

/// Gradient of the least-squares plane through `(offset, value)`.
fn local_gradient(pts: &[(Complex64, f64)]) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    if pts.len() < 3 {
        return zero;
    }
    let mut m = nalgebra::Matrix3::<f64>::zeros();
    let mut r = nalgebra::Vector3::<f64>::zeros();
    for (d, v) in pts {
        let row = nalgebra::Vector3::new(1.0, d.re, d.im);
        m += row * row.transpose();
        r += row * *v;
    }
    match m.lu().solve(&r) {
        Some(s) if s[1].is_finite() && s[2].is_finite() => Complex64::new(s[1], s[2]),
        _ => zero,
    }
}

fn velocity_gap(
    plane: &BlobEnsemble,
    perf: &BlobEnsemble,
    solver: &ReflectionSolver,
    warm: Option<&Reflected>,
    lattice: &PorousLattice,
    probe: usize,
) -> Result<f64, SimError> {
    let n = probe.max(2);
    let pts: Vec<Point> = (0..n)
        .flat_map(|i| (0..n).map(move |j| Complex64::new(i as f64 / (n - 1) as f64, SUPPORT_GUARD + 0.7 * j as f64 / (n - 1) as f64)))
        .filter(|p| lattice.in_fluid(*p))
        .collect();
    let (u, _) = solver.velocities(perf, &pts, warm)?;
    Ok(pts.iter().zip(&u).map(|(x, v)| (plane.velocity(*x) - v).norm()).fold(0.0, f64::max))
}
