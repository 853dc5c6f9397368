use std::sync::Arc;

use cornerflow_core::conformal::map_for_shape;
use cornerflow_core::corrector::*;
use cornerflow_core::fields::{biot_savart, circulation, VorticityField};
use cornerflow_core::geometry::{build_lattice, ObstacleShape, PorousLattice};
use cornerflow_core::quadrature::FiberSpec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(shape: ObstacleShape, eps: f64, d: f64) -> (PorousLattice, Arc<cornerflow_core::conformal::ConformalMap>, Cutoff) {
    let map = Arc::new(map_for_shape(&shape).unwrap());
    let cutoff = cutoff_for(&shape, eps, d).unwrap();
    let lattice = build_lattice(Arc::new(shape), eps, d).unwrap();
    (lattice, map, cutoff)
}

fn support_samples(lat: &PorousLattice, cut: &Cutoff, i: usize, n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = cut.support_box;
    let mut out = Vec::new();
    while out.len() < n {
        let xi = Complex64::new(rng.gen_range(b.x0..b.x1), rng.gen_range(b.y0..b.y1));
        let x = lat.centers[i] + xi;
        if cut.value(xi) > 0.0 && lat.in_fluid(x) && lat.shape.boundary_distance(xi / lat.half_eps()) > 1e-6 {
            out.push(x);
        }
    }
    out
}

#[test]
fn cutoff_is_one_on_scaled_boundary() {
    for (shape, eps, d) in [(ObstacleShape::square(), 0.1, 0.01), (ObstacleShape::square(), 0.1, 0.2), (ObstacleShape::disk(), 0.05, 0.0025)] {
        let cut = cutoff_for(&shape, eps, d).unwrap();
        for (_, p) in shape.boundary_nodes(512) {
            assert_eq!(cut.value(p * (eps / 2.0)), 1.0, "{} at {p}", shape.name);
        }
    }
}

#[test]
fn cutoff_translates_are_disjoint_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for cut in [cutoff_corner(0.1, 0.001, 0.9).unwrap(), cutoff_profile(0.1, 0.01, 0.5).unwrap(), cutoff_smooth(0.1, 0.1, 1.0).unwrap()] {
        let shift = Complex64::new(cut.epsilon + cut.d_eps, 0.0);
        for _ in 0..20000 {
            let x = Complex64::new(rng.gen_range(-0.15..0.25), rng.gen_range(-0.12..0.12));
            let a = cut.value(x);
            assert!((0.0..=1.0).contains(&a));
            assert_eq!(a * cut.value(x - shift), 0.0, "{x}");
        }
    }
}

#[test]
fn smooth_cutoff_scaling() {
    let spec = FiberSpec { order: 10, panels: 2, grading_levels: 4 };
    let (l4a, ga) = cutoff_smooth(0.1, 0.1, 1.0).unwrap().norms(&spec);
    let (l4b, gb) = cutoff_smooth(0.05, 0.05, 1.0).unwrap().norms(&spec);
    assert!((l4b / l4a - 0.5f64.sqrt()).abs() < 0.05 * 0.5f64.sqrt());
    assert!((0.9..=1.1).contains(&(gb / ga)));
}

#[test]
fn corner_cutoff_gradient_grows_logarithmically() {
    let spec = FiberSpec { order: 8, panels: 1, grading_levels: 8 };
    let eps: f64 = 0.05;
    let ratios: Vec<f64> = [2, 3, 4]
        .iter()
        .map(|&k| {
            let d = eps.powi(k);
            let (_, g) = cutoff_corner(eps, d, 0.9).unwrap().norms(&spec);
            g * g / (1.0 + (eps / d).ln())
        })
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
    assert!(hi / lo < 3.0, "{ratios:?}");
}

#[test]
fn disk_cell_terms_one_and_three_vanish() {
    let (lat, map, cut) = setup(ObstacleShape::disk(), 0.1, 0.01);
    let f = VorticityField::default_bump();
    let cor = Corrector::new(&lat, map, cut.clone(), &f, CorrectorSpec::default()).unwrap();
    for x in support_samples(&lat, &cut, 4, 300, 1) {
        let w = cor.cell_values(4, x).unwrap();
        assert!(w.w1.abs() < 1e-12, "{}", w.w1);
        assert!(w.w3.norm() < 1e-9, "{}", w.w3);
    }
}

#[test]
fn decomposition_identity_square() {
    let (lat, map, cut) = setup(ObstacleShape::square(), 0.1, 0.01);
    let f = VorticityField::default_bump();
    let cor = Corrector::new(&lat, map, cut.clone(), &f, CorrectorSpec::default()).unwrap();
    for i in [0, lat.n_holes / 2, lat.n_holes - 1] {
        for x in support_samples(&lat, &cut, i, 150, 10 + i as u64) {
            let k = biot_savart(&f, x, 1e-11).unwrap();
            let v = cor.velocity(x).unwrap();
            let c = cor.cutoff_at(i, x);
            let w = cor.cell_values(i, x).unwrap();
            let diff = (k - v) - residual_from_cell(c, &w);
            assert!(diff.norm() < 1e-5, "hole {i} at {x}: {diff}");
        }
    }
}

#[test]
fn corrector_equals_whole_plane_off_supports() {
    let (lat, map, cut) = setup(ObstacleShape::square(), 0.1, 0.01);
    let f = VorticityField::default_bump();
    let cor = Corrector::new(&lat, map, cut, &f, CorrectorSpec::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let x = Complex64::new(rng.gen_range(-0.5..1.5), rng.gen_range(0.11..1.5));
        let k = biot_savart(&f, x, 1e-10).unwrap();
        assert_eq!(cor.velocity(x).unwrap(), k);
        assert_eq!(cor.residual(x).unwrap(), Complex64::new(0.0, 0.0));
    }
}

fn max_normal_velocity(lat: &PorousLattice, cor: &Corrector) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..lat.n_holes {
        for (p, n) in lat.hole_boundary_nodes(i, 256) {
            let x = p + n * (1e-9 * lat.epsilon);
            let v = cor.velocity(x).unwrap();
            worst = worst.max((v * n.conj()).re.abs());
        }
    }
    worst
}

#[test]
fn corrector_is_tangent_on_holes() {
    let f = VorticityField::default_bump();
    let (lat, map, cut) = setup(ObstacleShape::disk(), 0.2, 0.04);
    let cor = Corrector::new(&lat, map, cut, &f, CorrectorSpec::default()).unwrap();
    assert!(max_normal_velocity(&lat, &cor) < 1e-5);
    let (lat, map, cut) = setup(ObstacleShape::square(), 0.2, 0.04);
    let cor = Corrector::new(&lat, map, cut, &f, CorrectorSpec::default()).unwrap();
    assert!(max_normal_velocity(&lat, &cor) < 1e-4);
    for i in 0..lat.n_holes {
        let contour = lat.hole_contour(i, 256, 1e-3 * lat.epsilon);
        let g = circulation(&cor, &contour, |x| lat.in_fluid(x), 10).unwrap();
        assert!(g.abs() < 1e-5, "hole {i}: {g:e}");
    }
}

#[test]
fn zero_field_gives_zero_corrector() {
    let (lat, map, cut) = setup(ObstacleShape::square(), 0.2, 0.04);
    let f = VorticityField::zero();
    let cor = Corrector::new(&lat, map, cut.clone(), &f, CorrectorSpec::default()).unwrap();
    for x in support_samples(&lat, &cut, 1, 50, 2) {
        assert!(cor.velocity(x).unwrap().norm() == 0.0);
    }
}
