//! Numerical coarea identity `∫_Ω |∇f| = ∫ P({f < t}, Ω) dt`.

use serde::{Deserialize, Serialize};

use super::mesh::{level_measure, total_variation};
use crate::error::{Error, Result};
use crate::metrics::{GridMetric, WarpedMetric};
use crate::numeric::{brent, integrate_adaptive};
use crate::pharmonic::RadialField;

/// Scalar field whose coarea identity is checked.
#[derive(Debug, Clone, Copy)]
pub enum CoareaField<'a> {
    /// Distance from the inner end of a warped metric.
    RadialDistance(&'a WarpedMetric),
    /// A radial potential (`w` of a radial field).
    RadialPotential(&'a RadialField),
    /// Node values on a lattice metric (`NaN` marks nodes outside the domain).
    Lattice {
        metric: &'a GridMetric,
        values: &'a [f64],
    },
}

/// Region `Ω`. Balls and annuli are centred at the pole for radial fields and
/// use coordinate distance from `center` on lattices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "region", rename_all = "snake_case")]
pub enum CoareaRegion {
    Whole,
    Ball {
        center: [f64; 3],
        radius: f64,
    },
    Annulus {
        center: [f64; 3],
        inner: f64,
        outer: f64,
    },
    Box {
        lo: [f64; 3],
        hi: [f64; 3],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoareaResult {
    /// `∫_Ω |∇f|_g dvol`.
    pub lhs: f64,
    /// `∫ P({f < t}, Ω) dt` by composite Simpson over `levels + 1` levels.
    pub rhs: f64,
    pub relative_error: f64,
    pub levels: usize,
}

fn result(lhs: f64, rhs: f64, levels: usize) -> CoareaResult {
    let scale = lhs.abs().max(rhs.abs());
    let relative_error = if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    };
    CoareaResult {
        lhs,
        rhs,
        relative_error,
        levels,
    }
}

/// Composite Simpson rule for `f` on `[a, b]` with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64, n: usize) -> Result<f64> {
    let h = (b - a) / n as f64;
    let mut acc = f(a)? + f(b)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h)?;
    }
    Ok(acc * h / 3.0)
}

pub fn coarea_check(
    f: CoareaField<'_>,
    region: CoareaRegion,
    levels: usize,
) -> Result<CoareaResult> {
    if levels < 2 {
        return Err(Error::Config(
            "coarea check needs at least two levels".into(),
        ));
    }
    let n = levels + levels % 2;
    match f {
        CoareaField::RadialDistance(m) => {
            let (a, b) = radial_bounds(m, region)?;
            let lhs = m.shell_volume(a, b)?;
            let (da, db) = (m.arclength(a)?, m.arclength(b)?);
            let radius_at = |d: f64| -> Result<f64> {
                if d <= da {
                    return Ok(a);
                }
                if d >= db {
                    return Ok(b);
                }
                brent(|r| m.arclength(r).unwrap_or(f64::NAN) - d, a, b, 1e-15)
            };
            let rhs = simpson(|d| Ok(m.area_unchecked(radius_at(d)?)), da, db, n)?;
            Ok(result(lhs, rhs, n))
        }
        CoareaField::RadialPotential(w) => {
            let m = &w.metric;
            let (a, b) = radial_bounds(m, region)?;
            let a = a.max(w.radii[0]);
            let b = b.min(w.r_outer);
            if !(a < b) {
                return Err(Error::Domain("region misses the field's domain".into()));
            }
            let mut cuts = vec![a];
            cuts.extend(m.kind.breakpoints().into_iter().filter(|&c| c > a && c < b));
            cuts.push(b);
            let mut lhs = 0.0;
            for c in cuts.windows(2) {
                lhs += integrate_adaptive(
                    |s| {
                        w.dw(s)
                            .map(|d| d.abs() * m.area_unchecked(s))
                            .unwrap_or(0.0)
                    },
                    c[0],
                    c[1],
                    1e-12,
                    1e-15,
                )?;
            }
            let (ta, tb) = (w.w(a)?, w.w(b)?);
            if tb <= ta {
                return Ok(result(lhs, 0.0, n));
            }
            // {w < t} ∩ Ω is the shell between a and s(t).
            let rhs = simpson(
                |t| {
                    let s = if t <= ta {
                        a
                    } else if t >= tb {
                        b
                    } else {
                        w.radius_of_level(t)?.clamp(a, b)
                    };
                    // Endpoint values are the one-sided limits.
                    Ok(m.area_unchecked(s))
                },
                ta,
                tb,
                n,
            )?;
            Ok(result(lhs, rhs, n))
        }
        CoareaField::Lattice { metric, values } => {
            let lat = metric.lattice();
            if values.len() != lat.len() {
                return Err(Error::Domain("field does not match the lattice".into()));
            }
            let masked: Vec<f64> = lat
                .iter_points()
                .map(|(i, x)| {
                    if in_region(region, x) {
                        values[i]
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            if masked.iter().any(|v| v.is_infinite()) {
                return Err(Error::Domain("field is not finite on the region".into()));
            }
            let lo = masked
                .iter()
                .cloned()
                .filter(|v| !v.is_nan())
                .fold(f64::INFINITY, f64::min);
            let hi = masked
                .iter()
                .cloned()
                .filter(|v| !v.is_nan())
                .fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                return Err(Error::Domain("region contains no lattice nodes".into()));
            }
            let lhs = total_variation(metric, &masked);
            if hi <= lo {
                return Ok(result(lhs, 0.0, n));
            }
            // The extreme levels are evaluated just inside, as one-sided limits.
            let pad = 1e-9 * (hi - lo);
            let rhs = simpson(
                |t| Ok(level_measure(metric, &masked, t.clamp(lo + pad, hi - pad), None)?.area),
                lo,
                hi,
                n,
            )?;
            Ok(result(lhs, rhs, n))
        }
    }
}

fn radial_bounds(m: &WarpedMetric, region: CoareaRegion) -> Result<(f64, f64)> {
    let lo = m.r_inner();
    let (a, b) = match region {
        CoareaRegion::Whole => (lo, m.r_max),
        CoareaRegion::Ball { center, radius } if center == [0.0; 3] => (lo, radius),
        CoareaRegion::Annulus {
            center,
            inner,
            outer,
        } if center == [0.0; 3] => (inner.max(lo), outer),
        _ => {
            return Err(Error::Unsupported(
                "radial coarea checks use regions centred at the pole".into(),
            ))
        }
    };
    if !(a < b && b <= m.r_max) {
        return Err(Error::Domain(format!(
            "radial region [{a}, {b}] is empty or leaves the chart"
        )));
    }
    Ok((a, b))
}

fn in_region(region: CoareaRegion, x: [f64; 3]) -> bool {
    let dist = |c: [f64; 3]| {
        ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt()
    };
    match region {
        CoareaRegion::Whole => true,
        CoareaRegion::Ball { center, radius } => dist(center) <= radius,
        CoareaRegion::Annulus {
            center,
            inner,
            outer,
        } => {
            let d = dist(center);
            d >= inner && d <= outer
        }
        CoareaRegion::Box { lo, hi } => (0..3).all(|k| x[k] >= lo[k] && x[k] <= hi[k]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Lattice;
    use crate::pharmonic::radial_limit;
    use std::f64::consts::PI;

    #[test]
    fn radial_distance_on_unit_ball() {
        let m = WarpedMetric::euclidean(2.0);
        let r = coarea_check(
            CoareaField::RadialDistance(&m),
            CoareaRegion::Ball {
                center: [0.0; 3],
                radius: 1.0,
            },
            200,
        )
        .unwrap();
        assert!((r.lhs - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!(r.relative_error < 1e-6, "{r:?}");
    }

    #[test]
    fn radial_distance_in_schwarzschild() {
        let m = WarpedMetric::schwarzschild(1.0, 10.0).unwrap();
        let r = coarea_check(
            CoareaField::RadialDistance(&m),
            CoareaRegion::Ball {
                center: [0.0; 3],
                radius: 4.0,
            },
            400,
        )
        .unwrap();
        assert!(r.relative_error < 1e-6, "{r:?}");
    }

    #[test]
    fn radial_potential_on_annulus() {
        let m = WarpedMetric::space_form(1.0, 4.0).unwrap();
        let w = radial_limit(&m, 4.0).unwrap();
        let region = CoareaRegion::Annulus {
            center: [0.0; 3],
            inner: 0.2,
            outer: 2.0,
        };
        let r = coarea_check(CoareaField::RadialPotential(&w), region, 400).unwrap();
        assert!(r.relative_error < 1e-6, "{r:?}");
    }

    #[test]
    fn linear_function_on_box_slices() {
        let lat = Lattice::new([0.0; 3], 0.1, [11, 11, 11]).unwrap();
        let g = GridMetric::flat(lat.clone());
        let f: Vec<f64> = lat.iter_points().map(|(_, x)| x[2]).collect();
        let region = CoareaRegion::Box {
            lo: [0.0; 3],
            hi: [1.0, 1.0, 0.5 + 1e-9],
        };
        let r = coarea_check(
            CoareaField::Lattice {
                metric: &g,
                values: &f,
            },
            region,
            20,
        )
        .unwrap();
        assert!(
            (r.lhs - 0.5).abs() < 1e-12 && (r.rhs - 0.5).abs() < 1e-9,
            "{r:?}"
        );
    }

    #[test]
    fn constant_field_is_degenerate() {
        let lat = Lattice::centered(8, 0.2).unwrap();
        let g = GridMetric::flat(lat.clone());
        let f = vec![3.0; lat.len()];
        let r = coarea_check(
            CoareaField::Lattice {
                metric: &g,
                values: &f,
            },
            CoareaRegion::Whole,
            10,
        )
        .unwrap();
        assert_eq!((r.lhs, r.rhs, r.relative_error), (0.0, 0.0, 0.0));
    }
}
