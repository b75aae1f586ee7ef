//! Relative p-capacities of balls and of sublevel sets of `w_p`.

use serde::{Deserialize, Serialize};

use super::field::{CapacityReport, SolverConfig};
use super::grid::{grid_green, LatticeField};
use super::radial::{check_exponent, radial_ball_capacity, radial_green};
use crate::error::{Error, Result};
use crate::metrics::Metric;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "set", rename_all = "snake_case")]
pub enum CapacitySet {
    /// Closed ball of the given radius about the pole.
    Ball { radius: f64 },
    /// `{w_p ≤ t}` of the Green function with the same pole and outer radius.
    Sublevel { t: f64 },
}

impl CapacitySet {
    pub fn describe(&self) -> String {
        match self {
            CapacitySet::Ball { radius } => format!("ball(r={radius})"),
            CapacitySet::Sublevel { t } => format!("sublevel(t={t})"),
        }
    }
}

/// `Cap_p(K, B_R(o))`. Warped metrics use the radial quadrature (pole at the
/// origin); lattice metrics solve for the capacitary potential.
pub fn p_capacity(
    m: &Metric,
    pole: [f64; 3],
    set: CapacitySet,
    r_outer: f64,
    p: f64,
    cfg: &SolverConfig,
) -> Result<CapacityReport> {
    check_exponent(p)?;
    let (capacity, residual) = match m {
        Metric::Warped(w) => {
            if pole != [0.0; 3] {
                return Err(Error::Domain(
                    "warped metrics have their pole at the origin".into(),
                ));
            }
            let radius = match set {
                CapacitySet::Ball { radius } => radius,
                CapacitySet::Sublevel { t } => radial_green(w, p, r_outer)?.radius_of_level(t)?,
            };
            (radial_ball_capacity(w, p, radius, r_outer)?, 0.0)
        }
        Metric::Grid(g) => match set {
            CapacitySet::Ball { radius } => {
                let c = SolverConfig {
                    eps_inner: radius,
                    ..cfg.clone()
                };
                let f = grid_green(g, pole, p, r_outer, &c)?;
                let res = f.diagnostics.as_ref().map_or(f64::NAN, |d| d.residual);
                (f.capacity_inner, res)
            }
            CapacitySet::Sublevel { .. } => {
                let f = grid_green(g, pole, p, r_outer, cfg)?;
                return field_capacity(&f, set);
            }
        },
    };
    if !(capacity > 0.0) {
        return Err(Error::Domain(format!(
            "non-positive capacity for {}",
            set.describe()
        )));
    }
    Ok(CapacityReport {
        set: set.describe(),
        p,
        capacity,
        energy: capacity,
        residual,
    })
}

/// Capacity of a set read off an already solved lattice field.
pub fn field_capacity(f: &LatticeField, set: CapacitySet) -> Result<CapacityReport> {
    let p =
        f.p.ok_or_else(|| Error::Unsupported("capacity needs a p-harmonic field".into()))?;
    let residual = f.diagnostics.as_ref().map_or(f64::NAN, |d| d.residual);
    let capacity = match set {
        CapacitySet::Sublevel { t } => f.sublevel_capacity(t)?,
        CapacitySet::Ball { radius } if (radius - f.eps_inner).abs() <= 1e-12 * radius => {
            f.capacity_inner
        }
        CapacitySet::Ball { .. } => {
            return Err(Error::Unsupported(
                "ball capacities need their own solve; use p_capacity".into(),
            ))
        }
    };
    Ok(CapacityReport {
        set: set.describe(),
        p,
        capacity,
        energy: capacity,
        residual,
    })
}

/// Inclusion monotonicity `K₁ ⊂ K₂ ⇒ Cap(K₁) ≤ Cap(K₂)` for two reports,
/// with a relative slack for discretisation noise.
pub fn capacity_monotone(inner: &CapacityReport, outer: &CapacityReport, rel_slack: f64) -> bool {
    inner.capacity <= outer.capacity * (1.0 + rel_slack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::WarpedMetric;
    use crate::pharmonic::radial::norm_constant;

    #[test]
    fn unit_ball_capacity() {
        let m: Metric = WarpedMetric::euclidean(10.0).into();
        let cfg = SolverConfig::default();
        let r = p_capacity(
            &m,
            [0.0; 3],
            CapacitySet::Ball { radius: 1.0 },
            10.0,
            1.5,
            &cfg,
        )
        .unwrap();
        let expect = 0.999f64.powf(-0.5) * 3f64.sqrt() * 4.0 * std::f64::consts::PI;
        assert!((r.capacity / expect - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sublevel_law_and_monotonicity() {
        let m: Metric = WarpedMetric::space_form(1.0, 6.0).unwrap().into();
        let cfg = SolverConfig::default();
        let p = 1.5;
        let mut prev: Option<CapacityReport> = None;
        for t in [-2.0, -1.0, 0.0] {
            let r = p_capacity(&m, [0.0; 3], CapacitySet::Sublevel { t }, 3.0, p, &cfg).unwrap();
            let ratio = r.capacity * (-t).exp() / norm_constant(p);
            assert!((ratio - 1.0).abs() < 1e-8, "{ratio}");
            if let Some(q) = &prev {
                assert!(capacity_monotone(q, &r, 0.0));
            }
            prev = Some(r);
        }
    }
}
