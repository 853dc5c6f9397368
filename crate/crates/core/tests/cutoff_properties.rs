use cornerflow_core::corrector::{cutoff_for, step};
use cornerflow_core::geometry::ObstacleShape;
use num_complex::Complex64;
use proptest::prelude::*;

fn shape(k: usize) -> ObstacleShape {
    match k {
        0 => ObstacleShape::disk(),
        1 => ObstacleShape::square(),
        _ => ObstacleShape::regular_polygon(6).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cutoff_is_a_partition_weight(
        k in 0usize..3,
        eps in 0.02f64..0.4,
        ratio in -4.0f64..0.5,
        u in -1.5f64..1.5,
        v in -1.5f64..1.5,
    ) {
        let d = eps * 10f64.powf(ratio);
        let c = cutoff_for(&shape(k), eps, d).unwrap();
        let b = c.support_box;
        let xi = Complex64::new(u * b.width(), v * b.height());
        let s = c.sample(xi);
        prop_assert!((0.0..=1.0).contains(&s.value));
        prop_assert!(s.gradient.re.is_finite() && s.gradient.im.is_finite());
        if !b.contains(xi) {
            prop_assert_eq!(s.value, 0.0);
        }
        // neighbouring translates never overlap
        let period = Complex64::new(eps + d, 0.0);
        prop_assert_eq!(s.value * c.value(xi + period), 0.0);
    }

    #[test]
    fn step_is_monotone(a in -0.5f64..1.5, b in -0.5f64..1.5) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(step(lo) >= step(hi));
    }
}
