use std::f64::consts::PI;
use std::sync::Arc;

use cornerflow_core::conformal::map_for_shape;
use cornerflow_core::euler_sim::*;
use cornerflow_core::fields::{circulation, ExteriorVelocity, FieldError, Provenance, SourceRule, VelocityField, VorticityField};
use cornerflow_core::geometry::{build_lattice, ObstacleShape, PorousLattice};
use num_complex::Complex64;

fn c(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y)
}

fn lattice(shape: ObstacleShape, eps: f64, d: f64) -> (PorousLattice, Arc<cornerflow_core::conformal::ConformalMap>) {
    let map = Arc::new(map_for_shape(&shape).unwrap());
    (build_lattice(Arc::new(shape), eps, d).unwrap(), map)
}

#[test]
fn zero_blobs_give_zero_field() {
    let (lat, map) = lattice(ObstacleShape::square(), 0.2, 0.04);
    let blobs = BlobEnsemble::from_field(&VorticityField::zero(), 0.02).unwrap();
    assert!(blobs.is_empty());
    assert_eq!(velocity_perforated(&lat, map, &blobs, c(0.5, 0.5), 1e-6).unwrap(), c(0.0, 0.0));
}

fn single_hole_matches_exterior(shape: ObstacleShape, tol: f64) {
    let (lat, map) = lattice(shape, 0.6, 0.5);
    assert_eq!(lat.n_holes, 1);
    let h = lat.half_eps();
    let z = lat.centers[0];
    let vortex = c(0.4, 0.9);
    let blobs = BlobEnsemble::point_vortices(vec![vortex], vec![0.7]);
    let solver = ReflectionSolver::new(&lat, map.clone(), ReflectionSpec::default()).unwrap();
    let rule = SourceRule { nodes: vec![((vortex - z) / h, 0.7)], core: 0.0 };
    let exact = ExteriorVelocity::new(&map, rule, None, 1e-12).unwrap();
    let probes = [c(0.0, 0.5), c(1.2, -0.4), c(0.3, -0.45), c(0.9, 0.2), c(-0.5, 0.0)];
    let (u, r) = solver.velocities(&blobs, &probes, None).unwrap();
    assert!(r.passes <= 2, "{}", r.passes);
    for (x, v) in probes.iter().zip(&u) {
        let e = exact.velocity((x - z) / h).unwrap() / h;
        assert!((v - e).norm() < tol, "{x}: {v} vs {e}");
    }
}

#[test]
fn single_disk_matches_exterior_solution() {
    single_hole_matches_exterior(ObstacleShape::disk(), 1e-8);
}

#[test]
fn single_square_matches_exterior_solution() {
    single_hole_matches_exterior(ObstacleShape::square(), 1e-6);
}

#[test]
fn well_separated_holes_converge_quickly() {
    let (lat, map) = lattice(ObstacleShape::square(), 0.06, 0.6);
    assert_eq!(lat.n_holes, 2);
    let blobs = BlobEnsemble::from_field(&VorticityField::default_bump(), 0.04).unwrap();
    let solver = ReflectionSolver::new(&lat, map, ReflectionSpec::default()).unwrap();
    let r = solver.solve(|p| blobs.stream(p), None).unwrap();
    assert!(r.passes <= 5 && r.residual < 1e-6, "{} {}", r.passes, r.residual);
}

fn normal_velocity(lat: &PorousLattice, v: &ReflectedVelocity) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..lat.n_holes {
        for (p, n) in lat.hole_boundary_nodes(i, 256) {
            let u = v.velocity(p + n * (1e-9 * lat.epsilon)).unwrap();
            worst = worst.max((u * n.conj()).re.abs());
        }
    }
    worst
}

struct Corrections<'a, 'b, 'c>(&'c ReflectedVelocity<'a, 'b>);

impl VelocityField for Corrections<'_, '_, '_> {
    fn velocity(&self, x: Complex64) -> Result<Complex64, FieldError> {
        Ok(self.0.velocity(x)? - self.0.blobs.velocity(x))
    }

    fn provenance(&self) -> Provenance {
        Provenance::Reflected
    }
}

#[test]
fn reflected_field_is_tangent_with_zero_circulation() {
    let blobs = BlobEnsemble::from_field(&VorticityField::default_bump(), 0.04).unwrap();
    for (shape, limit) in [(ObstacleShape::disk(), 1e-5), (ObstacleShape::square(), 1e-4)] {
        let (lat, map) = lattice(shape, 0.2, 0.04);
        let solver = ReflectionSolver::new(&lat, map, ReflectionSpec::default()).unwrap();
        let v = ReflectedVelocity::new(&solver, &blobs).unwrap();
        let un = normal_velocity(&lat, &v);
        assert!(un < limit, "{}: {un:e}", lat.shape.name);
        // the blob tails carry vorticity inside any contour; the hole
        // circulation is that of the harmonic corrections
        let corr = Corrections(&v);
        for i in 0..lat.n_holes {
            let contour = lat.hole_contour(i, 256, 1e-3 * lat.epsilon);
            let g = circulation(&corr, &contour, |x| lat.in_fluid(x), 10).unwrap();
            assert!(g.abs() < 1e-5, "hole {i}: {g:e}");
        }
    }
}

#[test]
fn two_vortex_period() {
    let (l, gamma) = (0.4, 1.3);
    let period = 2.0 * PI * PI * l * l / gamma;
    let blobs = BlobEnsemble::point_vortices(vec![c(0.3, 0.5), c(0.7, 0.5)], vec![gamma, gamma]);
    let steps = 1000;
    let traj = advect_plane(&blobs, period / steps as f64, steps).unwrap();
    let angle = |b: &BlobEnsemble| {
        let d = b.positions[1] - b.positions[0];
        d.im.atan2(d.re)
    };
    // unwrap the relative angle to find when it has turned by 2π
    let mut total = 0.0;
    let mut prev = angle(&traj[0]);
    let mut crossing = None;
    for (k, b) in traj.iter().enumerate().skip(1) {
        let a = angle(b);
        let mut da = a - prev;
        if da > PI {
            da -= 2.0 * PI;
        } else if da < -PI {
            da += 2.0 * PI;
        }
        let before = total;
        total += da;
        if crossing.is_none() && total.abs() >= 2.0 * PI {
            let frac = (2.0 * PI - before.abs()) / da.abs();
            crossing = Some((k as f64 - 1.0 + frac) * period / steps as f64);
        }
        prev = a;
    }
    let measured = crossing.unwrap_or(period * 2.0 * PI / total.abs());
    assert!(((measured - period) / period).abs() < 1e-3, "{measured} vs {period}");
}

#[test]
fn whole_plane_invariants_and_reversibility() {
    let blobs = BlobEnsemble::from_field(&VorticityField::default_bump(), 0.04).unwrap();
    let traj = advect_plane(&blobs, 0.01, 100).unwrap();
    let end = traj.last().unwrap();
    assert_eq!(end.weights, blobs.weights);
    assert!((end.center_of_vorticity() - blobs.center_of_vorticity()).norm() < 1e-6);
    assert!(((end.second_moment() - blobs.second_moment()) / blobs.second_moment()).abs() < 1e-6);
    let back = advect_plane(end, -0.01, 100).unwrap();
    let err = back.last().unwrap().positions.iter().zip(&blobs.positions).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn mirror_symmetry_is_preserved() {
    // (1 + d)/(ε + d) = 9: centres symmetric about x1 = 1/2
    let (lat, map) = lattice(ObstacleShape::square(), 0.1, 0.0125);
    assert!((lat.centers[0].re + lat.centers[lat.n_holes - 1].re - 1.0).abs() < 1e-14);
    let solver = ReflectionSolver::new(&lat, map, ReflectionSpec { nodes: 256, ..ReflectionSpec::default() }).unwrap();
    let mut st = PerforatedStepper::new(&solver);
    let mut b = BlobEnsemble { positions: vec![c(0.3, 0.6), c(0.7, 0.6)], weights: vec![0.05, -0.05], core: 0.05, t: 0.0 };
    for _ in 0..20 {
        b = st.step(&b, 0.05).unwrap();
    }
    let (p, q) = (b.positions[0], b.positions[1]);
    assert!((p.re + q.re - 1.0).abs() < 1e-8 && (p.im - q.im).abs() < 1e-8, "{p} {q}");
}

#[test]
fn stability_guards_and_trivial_cases() {
    let (lat, map) = lattice(ObstacleShape::square(), 0.2, 0.04);
    let near = VorticityField::bump(c(0.5, 0.4), 0.2).unwrap();
    assert!(matches!(stability_report(&near, &lat, map.clone(), &SimSpec::default()), Err(SimError::SupportTooClose { .. })));
    let r = stability_report(&VorticityField::zero(), &lat, map.clone(), &SimSpec::default()).unwrap();
    assert_eq!((r.traj_gap_sup, r.vorticity_proxy, r.velocity_gap), (0.0, 0.0, 0.0));
    let spec = SimSpec { spacing: 0.04, t_end: 0.2, dt: 0.05, ..SimSpec::default() };
    let r = stability_report(&VorticityField::default_bump(), &lat, map, &spec).unwrap();
    assert_eq!(r.gap[0], 0.0);
    assert!(r.pairs.iter().all(|p| p.plane[0] == p.perforated[0]));
    assert!(r.traj_gap_sup > 0.0 && r.ratio.is_finite());
}
