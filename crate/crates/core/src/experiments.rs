//! Rate sweeps, rate fits and cutoff norm tables.
//!
//! Timing and parallel scheduling live with the caller; everything here is
//! deterministic.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;
use thiserror::Error;

use crate::conformal::{ConformalError, ConformalMap};
use crate::corrector::{cutoff_for, CellNorms, Corrector, CorrectorError, CorrectorSpec};
use crate::fields::VorticityField;
use crate::geometry::{build_lattice, hole_count, GeometryError, ObstacleShape, PorousLattice};
use crate::quadrature::FiberSpec;

/// Largest lattice handled by a sweep.
pub const MAX_HOLES: usize = 64;

/// Default sweep values of `ε`.
pub const DEFAULT_EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("epsilon = {epsilon} needs {n_holes} holes, above the cap of {cap}")]
    Budget { epsilon: f64, n_holes: usize, cap: usize },
    #[error("rate fit needs at least 3 records, got {0}")]
    TooFewRecords(usize),
    #[error("rate fit is degenerate: all bounds are equal")]
    DegenerateFit,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Corrector(#[from] CorrectorError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Rule `ε ↦ d_ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DRule {
    /// `d = c·ε^p`.
    Power { coeff: f64, power: f64 },
    /// `d = exp(−1/√ε)`.
    ExpRoot,
}

impl DRule {
    pub fn apply(&self, eps: f64) -> f64 {
        match *self {
            DRule::Power { coeff, power } => coeff * eps.powf(power),
            DRule::ExpRoot => (-1.0 / eps.sqrt()).exp(),
        }
    }

    /// `eps`, `eps^2`, `0.5*eps`, `0.5*eps^3`, `exp`.
    pub fn parse(s: &str) -> Result<Self, ExperimentError> {
        let s = s.trim();
        if s == "exp" {
            return Ok(DRule::ExpRoot);
        }
        let (coeff, rest) = match s.split_once('*') {
            Some((c, r)) => (c.trim().parse::<f64>().map_err(|_| ExperimentError::InvalidSweep(format!("bad coefficient in {s:?}")))?, r.trim()),
            None => (1.0, s),
        };
        let power = match rest.strip_prefix("eps") {
            Some("") => 1.0,
            Some(p) => p
                .strip_prefix('^')
                .and_then(|p| p.trim().parse::<f64>().ok())
                .ok_or_else(|| ExperimentError::InvalidSweep(format!("bad exponent in {s:?}")))?,
            None => return Err(ExperimentError::InvalidSweep(format!("unknown d rule {s:?}"))),
        };
        if !(coeff > 0.0) {
            return Err(ExperimentError::InvalidSweep(format!("coefficient must be positive in {s:?}")));
        }
        Ok(DRule::Power { coeff, power })
    }

    pub fn label(&self) -> String {
        match *self {
            DRule::Power { coeff, power } if coeff == 1.0 => format!("eps^{power}"),
            DRule::Power { coeff, power } => format!("{coeff}*eps^{power}"),
            DRule::ExpRoot => "exp".into(),
        }
    }
}

/// The default four rules.
pub fn default_rules() -> Vec<DRule> {
    alloc::vec![
        DRule::Power { coeff: 1.0, power: 1.0 },
        DRule::Power { coeff: 1.0, power: 2.0 },
        DRule::Power { coeff: 1.0, power: 3.0 },
        DRule::ExpRoot,
    ]
}

/// `(d_ε + ε|ln d_ε|)^{1/2}`.
pub fn rate_bound(epsilon: f64, d_eps: f64) -> f64 {
    (d_eps + epsilon * d_eps.ln().abs()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRecord {
    pub epsilon: f64,
    pub d_eps: f64,
    pub n_holes: usize,
    pub residual_l2: f64,
    pub bound: f64,
    pub ratio: f64,
    /// `max(‖f‖_{L¹}, ‖f‖_{L∞})`.
    pub f_l1linf: f64,
    pub wall_ms: f64,
}

impl RateRecord {
    pub fn new(epsilon: f64, d_eps: f64, n_holes: usize, residual_l2: f64, f: &VorticityField) -> Self {
        let bound = rate_bound(epsilon, d_eps);
        Self {
            epsilon,
            d_eps,
            n_holes,
            residual_l2,
            bound,
            ratio: residual_l2 / bound,
            f_l1linf: f.l1_norm.max(f.linf_norm),
            wall_ms: 0.0,
        }
    }
}

/// Checks the hole cap and builds lattice, cutoff and corrector inputs.
pub fn prepare(shape: &Arc<ObstacleShape>, epsilon: f64, d_eps: f64) -> Result<PorousLattice, ExperimentError> {
    if !(d_eps > 0.0) {
        return Err(ExperimentError::InvalidSweep(format!("d_eps = {d_eps} must be positive")));
    }
    let n = hole_count(epsilon, d_eps);
    if n > MAX_HOLES {
        return Err(ExperimentError::Budget { epsilon, n_holes: n, cap: MAX_HOLES });
    }
    Ok(build_lattice(shape.clone(), epsilon, d_eps)?)
}

/// Builds the corrector for one sweep point.
pub fn corrector_at<'a>(
    lattice: &'a PorousLattice,
    map: Arc<ConformalMap>,
    f: &'a VorticityField,
    spec: CorrectorSpec,
) -> Result<Corrector<'a>, ExperimentError> {
    let cutoff = cutoff_for(&lattice.shape, lattice.epsilon, lattice.d_eps)?;
    Ok(Corrector::new(lattice, map, cutoff, f, spec)?)
}

/// One sweep point, sequentially; `wall_ms` is left at zero.
pub fn rate_point(
    shape: &Arc<ObstacleShape>,
    map: Arc<ConformalMap>,
    f: &VorticityField,
    epsilon: f64,
    d_eps: f64,
    spec: CorrectorSpec,
) -> Result<RateRecord, ExperimentError> {
    let lattice = prepare(shape, epsilon, d_eps)?;
    let cor = corrector_at(&lattice, map, f, spec)?;
    let res = cor.residual_l2()?;
    Ok(RateRecord::new(epsilon, d_eps, lattice.n_holes, res, f))
}

/// Sequential sweep over `eps_list` with `d = rule(ε)`.
pub fn rate_sweep(
    shape: &Arc<ObstacleShape>,
    map: Arc<ConformalMap>,
    f: &VorticityField,
    eps_list: &[f64],
    rule: DRule,
    spec: CorrectorSpec,
) -> Result<Vec<RateRecord>, ExperimentError> {
    eps_list.iter().map(|&e| rate_point(shape, map.clone(), f, e, rule.apply(e), spec)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub fitted_exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
}

/// Least squares of `ln residual` on `ln bound`.
pub fn fit_rate(records: &[RateRecord]) -> Result<RateFit, ExperimentError> {
    if records.len() < 3 {
        return Err(ExperimentError::TooFewRecords(records.len()));
    }
    let xs: Vec<f64> = records.iter().map(|r| r.bound.ln()).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.residual_l2.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-28 * (1.0 + mx * mx) {
        return Err(ExperimentError::DegenerateFit);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(RateFit { fitted_exponent: slope, constant: icpt.exp(), r_squared: r2 })
}

/// `max / min` of a list of positive numbers.
pub fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0, f64::max);
    hi / lo
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffNormRow {
    pub epsilon: f64,
    pub d_eps: f64,
    pub l4: f64,
    pub grad_l2: f64,
    /// `‖∇φ‖²_{L²} / (1 + ln(ε/d))`.
    pub grad_ratio: f64,
    /// `‖φ‖_{L⁴} / ε^{1/2}`.
    pub l4_ratio: f64,
}

pub fn cutoff_norm_table(shape: &ObstacleShape, eps_list: &[f64], rule: DRule, spec: &FiberSpec) -> Result<Vec<CutoffNormRow>, ExperimentError> {
    eps_list
        .iter()
        .map(|&epsilon| {
            let d_eps = rule.apply(epsilon);
            let cut = cutoff_for(shape, epsilon, d_eps)?;
            let (l4, g) = cut.norms(spec);
            Ok(CutoffNormRow {
                epsilon,
                d_eps,
                l4,
                grad_l2: g,
                grad_ratio: g * g / (1.0 + (epsilon / d_eps).ln().max(0.0)),
                l4_ratio: l4 / epsilon.sqrt(),
            })
        })
        .collect()
}

/// Cell norms of one hole normalized by their predicted sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRecord {
    pub epsilon: f64,
    pub d_eps: f64,
    pub norms: CellNorms,
    pub w1_ratio: f64,
    pub w2_ratio: f64,
    pub w3_ratio: f64,
    pub w4_ratio: f64,
}

impl CellRecord {
    pub fn new(epsilon: f64, d_eps: f64, norms: CellNorms) -> Self {
        let l4 = epsilon.powf(0.25) * (epsilon.powf(0.25) + d_eps.powf(0.25));
        Self {
            epsilon,
            d_eps,
            norms,
            w1_ratio: norms.sup_w1 / epsilon,
            w2_ratio: norms.sup_w2 / epsilon,
            w3_ratio: norms.l4_w3 / l4,
            w4_ratio: norms.l4_w4 / l4,
        }
    }
}

/// Cell records for every hole, sequentially.
pub fn cell_table(cor: &Corrector) -> Result<Vec<CellRecord>, ExperimentError> {
    let (e, d) = (cor.lattice.epsilon, cor.lattice.d_eps);
    (0..cor.n_holes()).map(|i| Ok(CellRecord::new(e, d, cor.cell_norms(i)?))).collect()
}
