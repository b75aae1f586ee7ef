//! Values frozen from an independent 30-digit quadrature (mpmath), checked
//! against the library's own quadratures.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use imcf_core::metrics::WarpedMetric;
use imcf_core::pharmonic::{
    radial_ball_capacity, radial_green, radial_limit, FieldKind, PotentialField,
};
use imcf_core::{imcf, Metric};

#[test]
fn schwarzschild_chart_measures() {
    let m = WarpedMetric::schwarzschild(1.0, 10.0).unwrap();
    assert_relative_eq!(
        m.enclosed_volume(2.0).unwrap(),
        240.514854970588376,
        max_relative = 1e-9
    );
    assert_relative_eq!(
        m.sphere_area(2.0).unwrap(),
        122.718463030851298,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        m.arclength(2.0).unwrap(),
        3.26129436111989062,
        max_relative = 1e-9
    );
}

#[test]
fn space_form_and_sphere_measures() {
    let h = WarpedMetric::space_form(1.0, 4.0).unwrap();
    assert_relative_eq!(
        h.sphere_area(1.0).unwrap(),
        17.3553873817714371,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        h.enclosed_volume(1.0).unwrap(),
        5.11093270570828898,
        max_relative = 1e-9
    );
    let s = WarpedMetric::sphere(1.0, 1.5).unwrap();
    assert_relative_eq!(
        s.enclosed_volume(1.0).unwrap(),
        3.42654319113592228,
        max_relative = 1e-9
    );
}

#[test]
fn green_and_capacity_closed_forms() {
    let e = WarpedMetric::euclidean(10.0);
    let g = radial_green(&e, 1.5, 10.0).unwrap();
    assert_relative_eq!(g.green(1.0).unwrap(), 0.999, max_relative = 1e-9);
    assert_relative_eq!(
        radial_ball_capacity(&e, 1.5, 1.0, 10.0).unwrap(),
        21.7764833359008631,
        max_relative = 1e-9
    );
    let s = WarpedMetric::schwarzschild(1.0, 10.0).unwrap();
    assert_relative_eq!(
        radial_ball_capacity(&s, 1.5, 1.0, 10.0).unwrap(),
        53.2457518417367085,
        max_relative = 1e-8
    );
}

#[test]
fn unit_level_of_the_flat_flow() {
    let e = WarpedMetric::euclidean(10.0);
    let w = PotentialField::radial(FieldKind::Log, radial_limit(&e, 10.0).unwrap());
    let g = imcf::sublevel_geometry(&w, 0.0, &Metric::Warped(e)).unwrap();
    assert_relative_eq!(g.perimeter, 4.0 * PI, max_relative = 1e-12);
    assert_relative_eq!(g.volume, 4.0 * PI / 3.0, max_relative = 1e-10);
    assert!(g.hawking.abs() < 1e-12);
}
