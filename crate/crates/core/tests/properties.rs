use proptest::prelude::*;
use ylab::analysis::{stereographic_lift, stereographic_project};
use ylab::radial;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stereographic_round_trip(x in proptest::collection::vec(-50.0f64..50.0, 2..5)) {
        let y = stereographic_lift(&x);
        let norm: f64 = y.iter().map(|c| c * c).sum::<f64>();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        let back = stereographic_project(&y).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn ball_solution_scales_with_radius(n in 3usize..6, radius in 0.2f64..5.0) {
        let unit = radial::solve_ball(n, 1.0).unwrap();
        let sol = radial::solve_ball(n, radius).unwrap();
        for &t in &[0.0, 0.3, 0.7, 0.95] {
            let a = sol.interpolate(t * radius).unwrap();
            let b = radius * unit.interpolate(t).unwrap();
            prop_assert!((a - b).abs() <= 1e-8 * radius);
        }
    }

    // u grows as the domain shrinks, so v = u^{-2/(n-2)} does the opposite.
    #[test]
    fn smaller_annulus_has_smaller_v(r0 in 0.2f64..0.8, outer in 1.5f64..3.0, grow in 0.05f64..0.5) {
        let small = radial::solve_annulus(3, r0, outer, 1e-12).unwrap();
        let big = radial::solve_annulus(3, r0 * (1.0 - 0.5 * grow), outer * (1.0 + grow), 1e-12).unwrap();
        for k in 1..20 {
            let r = r0 + (outer - r0) * k as f64 / 20.0;
            prop_assert!(small.interpolate(r).unwrap() <= big.interpolate(r).unwrap() + 1e-10);
        }
    }
}
