//! Shared fixtures for the benchmarks.

use imcf_core::pharmonic::{radial_limit, FieldKind, PotentialField};
use imcf_core::{GridMetric, Lattice, WarpedMetric};

/// Radial `p → 1` limit on the isotropic Schwarzschild chart of mass 1.
pub fn schwarzschild_limit(r_max: f64) -> (WarpedMetric, PotentialField) {
    let m = WarpedMetric::schwarzschild(1.0, r_max).expect("valid chart");
    let f = PotentialField::radial(
        FieldKind::Log,
        radial_limit(&m, r_max).expect("limit field"),
    );
    (m, f)
}

/// Flat `n³` lattice with spacing `h`, centred at the origin.
pub fn flat_lattice(n: usize, h: f64) -> GridMetric {
    GridMetric::flat(Lattice::centered(n, h).expect("valid lattice"))
}

/// `2 log |x|` at every node of `g`.
pub fn log_radius_field(g: &GridMetric) -> Vec<f64> {
    g.lattice()
        .iter_points()
        .map(|(_, x)| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).ln())
        .collect()
}
