//! Radial isoperimetric profiles from centred balls.
//!
//! Centred balls are only a witness: `I(V)` below is an upper bound for the
//! isoperimetric profile, exact under symmetry assumptions that are not
//! checked here.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::WarpedMetric;
use crate::numeric::{brent, polyfit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiniSample {
    pub v: f64,
    pub eps: f64,
    /// `(I(v) − I(v − ε))/ε`.
    pub quotient: f64,
    /// `2(4π/3)^{1/3} v^{-1/3}`, the Euclidean derivative.
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoProfile {
    pub volumes: Vec<f64>,
    /// Chart radius of the centred ball of each volume.
    pub radii: Vec<f64>,
    /// `I(V)`: perimeter of the centred ball.
    pub perimeters: Vec<f64>,
    /// `(36π)^{1/3} V^{2/3}`.
    pub euclidean: Vec<f64>,
    /// Exponent `α` of the fit `|I(2v) − I(v)| ≈ c v^α` over dyadic pairs.
    pub holder_exponent: f64,
    pub holder_constant: f64,
    pub holder_pairs: usize,
    pub dini: Vec<DiniSample>,
    /// `I ≤ I_eucl` at every grid volume (relative slack `1e-12`).
    pub below_euclidean: bool,
    /// `I ≥ I_eucl` at every grid volume.
    pub above_euclidean: bool,
}

pub fn euclidean_profile(v: f64) -> f64 {
    (36.0 * PI).cbrt() * v.powf(2.0 / 3.0)
}

struct Profile<'a> {
    m: &'a WarpedMetric,
    v_max: f64,
}

impl Profile<'_> {
    fn radius(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("volume must be positive, got {v}")));
        }
        if v > self.v_max {
            return Err(Error::Domain(format!(
                "volume {v} exceeds the chart volume {}",
                self.v_max
            )));
        }
        let m = self.m;
        brent(
            |r| m.enclosed_volume(r).unwrap_or(f64::NAN) - v,
            m.r_inner() + 1e-300,
            m.r_max,
            1e-15,
        )
    }

    fn perimeter(&self, v: f64) -> Result<f64> {
        let r = self.radius(v)?;
        self.m.sphere_area(r)
    }
}

/// Profile on `v_grid` with one-sided difference quotients of width `eps`.
pub fn radial_profile(m: &WarpedMetric, v_grid: &[f64], eps: f64) -> Result<IsoProfile> {
    if v_grid.is_empty() {
        return Err(Error::Config("empty volume grid".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Config(format!(
            "difference width must be positive, got {eps}"
        )));
    }
    let prof = Profile {
        m,
        v_max: m.enclosed_volume(m.r_max)?,
    };
    let radii = v_grid
        .iter()
        .map(|&v| prof.radius(v))
        .collect::<Result<Vec<_>>>()?;
    let perimeters = radii
        .iter()
        .map(|&r| m.sphere_area(r))
        .collect::<Result<Vec<_>>>()?;
    let euclidean: Vec<f64> = v_grid.iter().map(|&v| euclidean_profile(v)).collect();

    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&v, &p) in v_grid.iter().zip(&perimeters) {
        if 2.0 * v <= prof.v_max {
            let d = (prof.perimeter(2.0 * v)? - p).abs();
            if d > 0.0 {
                xs.push(v.ln());
                ys.push(d.ln());
            }
        }
    }
    let (holder_exponent, holder_constant) = if xs.len() >= 2 {
        let (c, _) = polyfit(&xs, &ys, 1)?;
        (c[1], c[0].exp())
    } else {
        (f64::NAN, f64::NAN)
    };
    let dini = v_grid
        .iter()
        .zip(&perimeters)
        .filter(|(&v, _)| v > eps)
        .map(|(&v, &p)| {
            Ok(DiniSample {
                v,
                eps,
                quotient: (p - prof.perimeter(v - eps)?) / eps,
                reference: 2.0 * (4.0 * PI / 3.0).cbrt() * v.powf(-1.0 / 3.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let below_euclidean = perimeters
        .iter()
        .zip(&euclidean)
        .all(|(i, e)| *i <= e * (1.0 + 1e-12));
    let above_euclidean = perimeters
        .iter()
        .zip(&euclidean)
        .all(|(i, e)| *i >= e * (1.0 - 1e-12));
    Ok(IsoProfile {
        volumes: v_grid.to_vec(),
        radii,
        perimeters,
        euclidean,
        holder_exponent,
        holder_constant,
        holder_pairs: xs.len(),
        dini,
        below_euclidean,
        above_euclidean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (-6..=6).map(|k| 2f64.powf(k as f64 / 2.0)).collect()
    }

    #[test]
    fn euclidean_profile_and_dini() {
        let m = WarpedMetric::euclidean(10.0);
        let p = radial_profile(&m, &grid(), 1e-4).unwrap();
        for (i, e) in p.perimeters.iter().zip(&p.euclidean) {
            assert!((i / e - 1.0).abs() < 1e-10);
        }
        assert!((p.holder_exponent - 2.0 / 3.0).abs() < 0.01);
        let at1 = p.dini.iter().find(|d| d.v == 1.0).unwrap();
        assert!((at1.quotient - 3.2245).abs() < 1e-3, "{at1:?}");
        assert!(p.below_euclidean && p.above_euclidean);
    }

    #[test]
    fn hyperbolic_balls_beat_euclidean() {
        let m = WarpedMetric::space_form(1.0, 6.0).unwrap();
        let p = radial_profile(&m, &grid(), 1e-4).unwrap();
        assert!(p.above_euclidean);
    }

    #[test]
    fn volume_beyond_chart() {
        let m = WarpedMetric::euclidean(1.0);
        assert!(radial_profile(&m, &[10.0], 1e-4).is_err());
    }
}
