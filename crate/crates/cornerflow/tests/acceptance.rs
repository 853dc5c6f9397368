//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints one PASS/FAIL line; pass criterion numbers as arguments to run a
//! subset.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use cornerflow::run::rate_record;
use cornerflow_core::conformal::{map_for_shape, probe_corner_exponent, probe_holder, ConformalMap};
use cornerflow_core::corrector::{residual_from_cell, Corrector, CorrectorSpec};
use cornerflow_core::euler_sim::{
    advect_plane, stability_report, BlobEnsemble, ReflectedVelocity, ReflectionSolver, ReflectionSpec, SimSpec,
};
use cornerflow_core::experiments::{corrector_at, cutoff_norm_table, prepare, spread, CellRecord, DRule, DEFAULT_EPS};
use cornerflow_core::fields::{biot_savart, circulation, FieldError, Provenance, VelocityField, VorticityField};
use cornerflow_core::geometry::{ObstacleShape, Point, PorousLattice};

type Check = Result<(bool, String), String>;

fn square() -> Arc<ObstacleShape> {
    Arc::new(ObstacleShape::square())
}

fn disk() -> Arc<ObstacleShape> {
    Arc::new(ObstacleShape::disk())
}

fn map_of(shape: &ObstacleShape) -> Result<Arc<ConformalMap>, String> {
    map_for_shape(shape).map(Arc::new).map_err(|e| e.to_string())
}

fn eps_sq() -> DRule {
    DRule::Power { coeff: 1.0, power: 2.0 }
}

/// Every `stride`-th support quadrature node of hole `i`, up to `n`.
fn support_points(cor: &Corrector, i: usize, n: usize) -> Vec<Point> {
    let nodes = cor.support_nodes(i);
    let stride = (nodes.len() / n).max(1);
    nodes.into_iter().step_by(stride).take(n).map(|(x, _)| x).collect()
}

fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn corner_exponent() -> Check {
    let sq = ObstacleShape::square();
    let map = map_of(&sq)?;
    let a = probe_corner_exponent(&map, &sq, 0).map_err(|e| e.to_string())?;
    let err = (a.fitted_exponent + 1.0 / 3.0).abs();
    Ok((err <= 0.02, format!("fitted {:.4}, target -1/3, |error| {err:.4}", a.fitted_exponent)))
}

fn holder_modulus() -> Check {
    let sq = ObstacleShape::square();
    let map = map_of(&sq)?;
    let a = probe_holder(&map, &sq, 10_000, 11).map_err(|e| e.to_string())?;
    let b = probe_holder(&map, &sq, 20_000, 11).map_err(|e| e.to_string())?;
    let growth = b.m_hat / a.m_hat;
    let ok = a.m_hat.is_finite() && b.m_hat.is_finite() && growth < 2.0 && (a.mu - 2.0 / 3.0).abs() < 1e-9;
    Ok((ok, format!("mu {:.4}, M_hat {:.4} -> {:.4} (x{growth:.3}), mu_hat {:.3}", a.mu, a.m_hat, b.m_hat, a.mu_hat)))
}

fn disk_degeneracy() -> Check {
    let shape = disk();
    let map = map_of(&shape)?;
    let f = VorticityField::default_bump();
    let lat = prepare(&shape, 0.1, 0.01).map_err(|e| e.to_string())?;
    let spec = CorrectorSpec::default();
    let cor = corrector_at(&lat, map, &f, spec).map_err(|e| e.to_string())?;
    let mut w1: f64 = 0.0;
    let mut w3: f64 = 0.0;
    let mut count = 0;
    for i in [0, lat.n_holes / 2, lat.n_holes - 1] {
        for x in support_points(&cor, i, 1000) {
            let w = cor.cell_values(i, x).map_err(|e| e.to_string())?;
            w1 = w1.max(w.w1.abs());
            w3 = w3.max(w.w3.norm());
            count += 1;
        }
    }
    let limit = 10.0 * spec.tol;
    Ok((w1 <= limit && w3 <= limit, format!("{count} samples, sup|w1| {w1:.2e}, sup|w3| {w3:.2e}, limit {limit:.0e}")))
}

fn decomposition_identity() -> Check {
    let shape = square();
    let map = map_of(&shape)?;
    let f = VorticityField::default_bump();
    let lat = prepare(&shape, 0.1, 0.01).map_err(|e| e.to_string())?;
    let cor = corrector_at(&lat, map, &f, CorrectorSpec::default()).map_err(|e| e.to_string())?;
    let worst = (0..lat.n_holes)
        .into_par_iter()
        .map(|i| -> Result<f64, String> {
            let mut worst: f64 = 0.0;
            for x in support_points(&cor, i, 1000) {
                let k = biot_savart(&f, x, 1e-11).map_err(|e| e.to_string())?;
                let v = cor.velocity(x).map_err(|e| e.to_string())?;
                let w = cor.cell_values(i, x).map_err(|e| e.to_string())?;
                worst = worst.max(((k - v) - residual_from_cell(cor.cutoff_at(i, x), &w)).norm());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst <= 1e-5, format!("{} holes x 1000 points, max mismatch {worst:.2e}", lat.n_holes)))
}

fn cutoff_norms() -> Check {
    let rules: Vec<DRule> = [2.0, 3.0, 4.0].iter().map(|&p| DRule::Power { coeff: 1.0, power: p }).collect();
    let spec = CorrectorSpec::default().fibers;
    let mut rows = Vec::new();
    for r in rules {
        rows.extend(cutoff_norm_table(&ObstacleShape::square(), &[0.05], r, &spec).map_err(|e| e.to_string())?);
    }
    let g: Vec<f64> = rows.iter().map(|r| r.grad_ratio).collect();
    let l: Vec<f64> = rows.iter().map(|r| r.l4_ratio).collect();
    let (sg, sl) = (spread(&g), spread(&l));
    Ok((sg <= 3.0 && sl <= 2.0, format!("grad ratios {g:.3?} (spread {sg:.3}), L4 ratios {l:.3?} (spread {sl:.3})")))
}

fn permeability_rate() -> Check {
    let shape = disk();
    let map = map_of(&shape)?;
    let f = VorticityField::default_bump();
    let mut ratios = Vec::new();
    let mut records = Vec::new();
    for &e in &DEFAULT_EPS {
        let r = rate_record(&shape, map.clone(), &f, e, eps_sq().apply(e), CorrectorSpec::default()).map_err(|e| e.to_string())?;
        ratios.push(r.ratio);
        records.push(r);
    }
    let s = spread(&ratios);
    let fit = cornerflow_core::experiments::fit_rate(&records).map_err(|e| e.to_string())?;
    Ok((s <= 3.0 && ratios.iter().all(|r| r.is_finite()), format!("ratios {ratios:.4?}, max/min {s:.3}, fitted exponent {:.3}", fit.fitted_exponent)))
}

fn cell_estimates() -> Check {
    let shape = square();
    let map = map_of(&shape)?;
    let f = VorticityField::default_bump();
    let mut cols: [Vec<f64>; 4] = Default::default();
    for &e in &DEFAULT_EPS {
        let lat = prepare(&shape, e, eps_sq().apply(e)).map_err(|e| e.to_string())?;
        let cor = corrector_at(&lat, map.clone(), &f, CorrectorSpec::default()).map_err(|e| e.to_string())?;
        let recs = (0..lat.n_holes)
            .into_par_iter()
            .map(|i| cor.cell_norms(i).map(|n| CellRecord::new(lat.epsilon, lat.d_eps, n)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let max = |g: fn(&CellRecord) -> f64| recs.iter().map(g).fold(0.0, f64::max);
        cols[0].push(max(|r| r.w1_ratio));
        cols[1].push(max(|r| r.w2_ratio));
        cols[2].push(max(|r| r.w3_ratio));
        cols[3].push(max(|r| r.w4_ratio));
    }
    let spreads: Vec<f64> = cols.iter().map(|c| spread(c)).collect();
    let detail = (0..4).map(|k| format!("w{} {:.4?} (x{:.2})", k + 1, cols[k], spreads[k])).collect::<Vec<_>>().join(", ");
    Ok((spreads.iter().all(|&s| s <= 3.0), detail))
}

struct Corrections<'a, 'b, 'c>(&'c ReflectedVelocity<'a, 'b>);

impl VelocityField for Corrections<'_, '_, '_> {
    fn velocity(&self, x: Point) -> Result<Point, FieldError> {
        Ok(self.0.velocity(x)? - self.0.blobs.velocity(x))
    }

    fn provenance(&self) -> Provenance {
        Provenance::Reflected
    }
}

/// Max `|u·n|` just outside the holes and max hole circulation.
fn boundary_checks(lat: &PorousLattice, u: &dyn VelocityField, circ: &dyn VelocityField) -> Result<(f64, f64), String> {
    let mut un: f64 = 0.0;
    let mut gamma: f64 = 0.0;
    for i in 0..lat.n_holes {
        for (p, n) in lat.hole_boundary_nodes(i, 256) {
            let v = u.velocity(p + n * (1e-9 * lat.epsilon)).map_err(|e| e.to_string())?;
            un = un.max((v * n.conj()).re.abs());
        }
        let contour = lat.hole_contour(i, 256, 1e-3 * lat.epsilon);
        gamma = gamma.max(circulation(circ, &contour, |x| lat.in_fluid(x), 10).map_err(|e| e.to_string())?.abs());
    }
    Ok((un, gamma))
}

fn tangency_circulation() -> Check {
    let f = VorticityField::default_bump();
    let blobs = BlobEnsemble::from_field(&f, 0.04).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (shape, limit) in [(disk(), 1e-5), (square(), 1e-4)] {
        let map = map_of(&shape)?;
        let lat = prepare(&shape, 0.2, 0.04).map_err(|e| e.to_string())?;
        let cor = corrector_at(&lat, map.clone(), &f, CorrectorSpec::default()).map_err(|e| e.to_string())?;
        let (un_c, g_c) = boundary_checks(&lat, &cor, &cor)?;
        let solver = ReflectionSolver::new(&lat, map, ReflectionSpec::default()).map_err(|e| e.to_string())?;
        let refl = ReflectedVelocity::new(&solver, &blobs).map_err(|e| e.to_string())?;
        let (un_r, g_r) = boundary_checks(&lat, &refl, &Corrections(&refl))?;
        ok &= un_c <= limit && un_r <= limit && g_c <= 1e-5 && g_r <= 1e-5;
        parts.push(format!(
            "{}: |u.n| corrector {un_c:.1e} reflected {un_r:.1e} (limit {limit:.0e}), circulation {g_c:.1e} / {g_r:.1e}",
            shape.name
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn two_vortex_period() -> Check {
    let (l, gamma) = (0.4, 1.3);
    let period = 2.0 * PI * PI * l * l / gamma;
    let steps = 1000;
    let dt = period / steps as f64;
    let blobs = BlobEnsemble::point_vortices(vec![Point::new(0.3, 0.5), Point::new(0.7, 0.5)], vec![gamma, gamma]);
    let traj = advect_plane(&blobs, dt, steps + 10).map_err(|e| e.to_string())?;
    let angle = |b: &BlobEnsemble| {
        let d = b.positions[1] - b.positions[0];
        d.im.atan2(d.re)
    };
    let mut total = 0.0;
    let mut measured = f64::NAN;
    for k in 1..traj.len() {
        let da = (angle(&traj[k]) - angle(&traj[k - 1]) + 3.0 * PI).rem_euclid(2.0 * PI) - PI;
        if (total + da).abs() >= 2.0 * PI {
            measured = (k as f64 - 1.0 + (2.0 * PI - total.abs()) / da.abs()) * dt;
            break;
        }
        total += da;
    }
    let rel = ((measured - period) / period).abs();
    Ok((rel < 1e-3, format!("period {measured:.6} vs {period:.6}, relative error {rel:.2e}")))
}

fn stability_trend() -> Check {
    let shape = square();
    let map = map_of(&shape)?;
    let f = VorticityField::default_bump();
    let mut gaps = Vec::new();
    let mut ratios = Vec::new();
    for e in [0.2, 0.1, 0.05] {
        let lat = prepare(&shape, e, e * e).map_err(|e| e.to_string())?;
        let r = stability_report(&f, &lat, map.clone(), &SimSpec::default()).map_err(|e| e.to_string())?;
        gaps.push(r.traj_gap_sup);
        ratios.push(r.ratio);
    }
    let monotone = gaps.windows(2).all(|w| w[1] <= 1.2 * w[0]);
    let finite = ratios.iter().all(|r| r.is_finite());
    Ok((monotone && finite, format!("gap at T = 1: {}, gap/bound {}", sci(&gaps), sci(&ratios))))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, f64, fn() -> Check); 10] = [
        (1, "corner exponent", 10.0, corner_exponent),
        (2, "Hölder modulus", 30.0, holder_modulus),
        (3, "disk degeneracy", 60.0, disk_degeneracy),
        (4, "decomposition identity", 300.0, decomposition_identity),
        (5, "cutoff norms", 60.0, cutoff_norms),
        (6, "permeability rate", 1800.0, permeability_rate),
        (7, "cell estimates", 1800.0, cell_estimates),
        (8, "tangency and circulation", 120.0, tangency_circulation),
        (9, "two-vortex period", 60.0, two_vortex_period),
        (10, "stability trend", 3600.0, stability_trend),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, budget, check) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let res = check();
        let secs = t0.elapsed().as_secs_f64();
        let (pass, detail) = match res {
            Ok((p, d)) => (p && secs <= budget, d),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("criterion {n:>2} {name}: {} | {detail} | {secs:.1} s of {budget:.0} s", if pass { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
