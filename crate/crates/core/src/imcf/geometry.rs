//! Geometry of the sublevel sets `E_t = {w < t}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::mesh::{level_measure, nodal_gradient, KUHN_NEIGHBOURS};
use crate::error::{Error, Result};
use crate::mass::quasi_local_mass;
use crate::metrics::Metric;
use crate::pharmonic::{FieldData, LatticeField, NodeClass, PotentialField, RadialField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetGeometry {
    pub t: f64,
    pub volume: f64,
    pub perimeter: f64,
    pub components: usize,
    /// Components of the triangulated boundary (1 for radial fields).
    pub surface_components: usize,
    /// `∫_{∂E_t} |∇w|²`, the weak `∫ H²`.
    pub h2_integral: f64,
    /// `∫_{∂E_t} 1/|∇w|`.
    pub inv_grad_integral: f64,
    pub hawking: f64,
    pub mql: f64,
    /// Largest distance from the pole of a point of `E_t` (distance from the
    /// horizon for metrics without a pole).
    pub containment_radius: f64,
    /// Chart radius of `∂E_t` (radial fields).
    pub radius: Option<f64>,
}

/// `m_H = √P (16π − ∫H²) / (16π)^{3/2}`, equal to `f(1 − f_s²)/2` on centred
/// spheres of a warped product.
pub fn hawking_mass(perimeter: f64, h2_integral: f64) -> f64 {
    let c = 16.0 * PI;
    perimeter.sqrt() * (c - h2_integral) / (c * c.sqrt())
}

/// Field prepared for repeated level queries.
pub(crate) enum Prepared<'a> {
    Radial {
        f: &'a RadialField,
        t_valid: f64,
    },
    Lattice {
        f: &'a LatticeField,
        grad: Vec<[f64; 3]>,
        t_valid: f64,
        rho: Vec<f64>,
    },
}

impl<'a> Prepared<'a> {
    pub fn new(w: &'a PotentialField, m: &Metric) -> Result<Self> {
        match &w.data {
            FieldData::Radial(f) => {
                if m.as_warped().is_none_or(|wm| wm.kind != f.metric.kind) {
                    return Err(Error::Domain(
                        "radial field does not belong to this metric".into(),
                    ));
                }
                Ok(Prepared::Radial {
                    f,
                    t_valid: radial_validity(f)?,
                })
            }
            FieldData::Lattice(f) => {
                if m.as_grid().is_none_or(|g| g.lattice() != f.lattice()) {
                    return Err(Error::Domain(
                        "lattice field does not belong to this metric".into(),
                    ));
                }
                let lat = f.lattice();
                let chart = f.chart();
                let rho = (0..lat.len()).map(|i| chart.rho(lat.point(i))).collect();
                Ok(Prepared::Lattice {
                    f,
                    grad: nodal_gradient(lat, &f.w),
                    t_valid: lattice_validity(f),
                    rho,
                })
            }
        }
    }

    pub fn t_valid(&self) -> f64 {
        match self {
            Prepared::Radial { t_valid, .. } | Prepared::Lattice { t_valid, .. } => *t_valid,
        }
    }

    /// Smallest level at which the sublevel set is resolved.
    pub fn t_floor(&self) -> Result<f64> {
        match self {
            Prepared::Radial { f, .. } => f.w(f.radii[0]),
            Prepared::Lattice { f, rho, .. } => {
                // Levels whose sublevel set spans a few cells beyond the excised ball.
                let h = f.lattice().h;
                let reach = f.eps_inner + 2.0 * h;
                let t = (0..f.w.len())
                    .filter(|&i| f.class[i] == NodeClass::Free && rho[i] <= reach)
                    .map(|i| f.w[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                if t.is_finite() {
                    Ok(t)
                } else {
                    Ok(f.w.iter().cloned().fold(f64::INFINITY, f64::min))
                }
            }
        }
    }

    pub fn geometry(&self, t: f64) -> Result<LevelSetGeometry> {
        if !(t < self.t_valid()) {
            return Err(Error::Domain(format!(
                "t = {t} is not below the validity threshold {}",
                self.t_valid()
            )));
        }
        match self {
            Prepared::Radial { f, .. } => radial_geometry(f, t),
            Prepared::Lattice { f, grad, rho, .. } => lattice_geometry(f, grad, rho, t),
        }
    }
}

/// Last level whose sublevel set stays inside the outer ball.
fn radial_validity(f: &RadialField) -> Result<f64> {
    let r = f.r_outer * (1.0 - 1e-9);
    f.w(r)
}

/// Smallest `w` at free nodes next to the outer region or the lattice boundary.
fn lattice_validity(f: &LatticeField) -> f64 {
    let lat = f.lattice();
    let mut t = f64::INFINITY;
    for i in 0..lat.len() {
        if f.class[i] != NodeClass::Free {
            continue;
        }
        let c = lat.coords(i);
        let edge = KUHN_NEIGHBOURS.iter().any(|off| {
            let n = [0, 1, 2].map(|d| c[d] as i64 + off[d] as i64);
            if (0..3).any(|d| n[d] < 0 || n[d] >= lat.dims[d] as i64) {
                return true;
            }
            f.class[lat.index(n[0] as usize, n[1] as usize, n[2] as usize)] == NodeClass::Outer
        });
        if edge {
            t = t.min(f.w[i]);
        }
    }
    t
}

fn radial_geometry(f: &RadialField, t: f64) -> Result<LevelSetGeometry> {
    let m = &f.metric;
    let s = f.radius_of_level(t)?;
    let volume = m.enclosed_volume(s)?;
    let perimeter = m.area_unchecked(s);
    let g = f.grad_norm(s)?;
    let h2_integral = perimeter * g * g;
    let inv_grad_integral = if g > 0.0 {
        perimeter / g
    } else {
        f64::INFINITY
    };
    if !(volume > 0.0 && perimeter > 0.0) {
        return Err(Error::EmptySublevel(t));
    }
    Ok(LevelSetGeometry {
        t,
        volume,
        perimeter,
        components: 1,
        surface_components: 1,
        h2_integral,
        inv_grad_integral,
        hawking: hawking_mass(perimeter, h2_integral),
        mql: quasi_local_mass(volume, perimeter)?,
        containment_radius: m.arclength(s)?,
        radius: Some(s),
    })
}

fn lattice_geometry(
    f: &LatticeField,
    grad: &[[f64; 3]],
    rho: &[f64],
    t: f64,
) -> Result<LevelSetGeometry> {
    let lm = level_measure(&f.metric, &f.w, t, Some(grad))?;
    if lm.sublevel_components == 0 || !(lm.volume > 0.0 && lm.area > 0.0) {
        return Err(Error::EmptySublevel(t));
    }
    let containment_radius = (0..f.w.len())
        .filter(|&i| f.w[i] < t)
        .map(|i| rho[i])
        .fold(0.0, f64::max);
    Ok(LevelSetGeometry {
        t,
        volume: lm.volume,
        perimeter: lm.area,
        components: lm.sublevel_components,
        surface_components: lm.surface_components,
        h2_integral: lm.h2,
        inv_grad_integral: lm.inv_grad,
        hawking: hawking_mass(lm.area, lm.h2),
        mql: quasi_local_mass(lm.volume, lm.area)?,
        containment_radius,
        radius: None,
    })
}

/// Geometry of `E_t = {w < t}` for `t` below the field's validity threshold.
pub fn sublevel_geometry(w: &PotentialField, t: f64, m: &Metric) -> Result<LevelSetGeometry> {
    Prepared::new(w, m)?.geometry(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{GridMetric, Lattice, WarpedMetric};
    use crate::pharmonic::{radial_limit, FieldKind};

    fn limit(m: &WarpedMetric, r: f64) -> PotentialField {
        PotentialField::radial(FieldKind::Log, radial_limit(m, r).unwrap())
    }

    #[test]
    fn flat_unit_level() {
        let m = WarpedMetric::euclidean(10.0);
        let g = sublevel_geometry(&limit(&m, 10.0), 0.0, &m.clone().into()).unwrap();
        assert!((g.perimeter - 4.0 * PI).abs() < 1e-12);
        assert!((g.volume - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!(g.hawking.abs() < 1e-12 && g.mql.abs() < 1e-12);
        assert_eq!(g.hawking, hawking_mass(g.perimeter, g.h2_integral));
    }

    #[test]
    fn schwarzschild_hawking_is_one() {
        let m = WarpedMetric::schwarzschild(1.0, 200.0).unwrap();
        let w = limit(&m, 200.0);
        for t in [1.5, 2.0, 4.0, 7.0] {
            let g = sublevel_geometry(&w, t, &m.clone().into()).unwrap();
            assert!((g.hawking - 1.0).abs() < 1e-6, "{t}: {}", g.hawking);
        }
    }

    #[test]
    fn levels_beyond_validity_are_rejected() {
        let m = WarpedMetric::euclidean(10.0);
        let w = limit(&m, 2.0);
        assert!(sublevel_geometry(&w, 2.0, &m.clone().into()).is_err());
        assert!(matches!(
            sublevel_geometry(&w, -1e9, &m.into()),
            Err(Error::EmptySublevel(_))
        ));
    }

    #[test]
    fn flat_grid_level_is_connected() {
        let lat = Lattice::centered(40, 0.1).unwrap();
        let gm = GridMetric::flat(lat.clone());
        let w: Vec<f64> = lat
            .iter_points()
            .map(|(_, x)| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).ln())
            .collect();
        let f = LatticeField::from_w(gm.clone(), [0.0; 3], f64::INFINITY, 0.0, w).unwrap();
        let pf = PotentialField::lattice(FieldKind::Log, f);
        let m: Metric = gm.into();
        for t in [-1.0, 0.0, 1.0] {
            let g = sublevel_geometry(&pf, t, &m).unwrap();
            assert_eq!((g.components, g.surface_components), (1, 1));
            assert!(
                (g.perimeter / (4.0 * PI * t.exp()) - 1.0).abs() < 0.02,
                "{t}: {}",
                g.perimeter
            );
        }
    }
}
