use std::f64::consts::PI;

use imcf_core::imcf::sublevel_geometry;
use imcf_core::pharmonic::{radial_ball_capacity, radial_limit, FieldKind, PotentialField};
use imcf_core::{Metric, WarpedMetric};
use proptest::prelude::*;

fn limit(m: &WarpedMetric) -> PotentialField {
    PotentialField::radial(FieldKind::Log, radial_limit(m, m.r_max).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn perimeter_law_on_space_forms(a in 0.05f64..2.0, t in -6.0f64..1.5) {
        let m = WarpedMetric::space_form(a, 3.0 / a.sqrt()).unwrap();
        let w = limit(&m);
        let g = sublevel_geometry(&w, t, &Metric::Warped(m)).unwrap();
        prop_assert!((g.perimeter / (4.0 * PI * t.exp()) - 1.0).abs() < 1e-9);
        // Round spheres in a space form are umbilic: the Hawking mass is non-positive.
        prop_assert!(g.hawking <= 1e-12);
    }

    #[test]
    fn schwarzschild_hawking_mass_is_the_mass(mass in 0.2f64..3.0, k in 0.05f64..0.95) {
        let m = WarpedMetric::schwarzschild(mass, 60.0 * mass).unwrap();
        let w = limit(&m);
        // Levels between the horizon area 16πm² and the chart end.
        let t_lo = (4.0 * mass * mass).ln();
        let t = t_lo + k * 4.0;
        let g = sublevel_geometry(&w, t, &Metric::Warped(m)).unwrap();
        prop_assert!((g.hawking / mass - 1.0).abs() < 1e-8, "{}", g.hawking);
    }

    #[test]
    fn ball_capacity_decreases_with_the_domain(r in 0.1f64..1.0, p in 1.1f64..2.9) {
        let m = WarpedMetric::euclidean(20.0);
        let near = radial_ball_capacity(&m, p, r, 2.0).unwrap();
        let far = radial_ball_capacity(&m, p, r, 10.0).unwrap();
        prop_assert!(far <= near * (1.0 + 1e-12));
    }
}
