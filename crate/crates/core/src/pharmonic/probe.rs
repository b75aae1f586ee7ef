//! Minimality of sublevel sets for `J_w^K(E) = P(E, K) - ∫_{E∩K} |∇w|`
//! against explicit competitor families.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::field::PotentialField;
use super::radial::RadialField;
use crate::error::{Error, Result};
use crate::metrics::{Metric, WarpKind};
use crate::numeric::integrate_adaptive;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "competitor", rename_all = "snake_case")]
pub enum Competitor {
    /// The sublevel set itself.
    Sublevel,
    /// Centred ball with radius scaled by `factor`.
    Dilated { factor: f64 },
    /// Ball of radius `factor·s_t` centred at distance `offset` from the pole
    /// (flat metrics only).
    Shifted { offset: f64, factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeEntry {
    pub t: f64,
    pub competitor: Competitor,
    pub j_sublevel: f64,
    pub j_competitor: f64,
    /// `J({w < t}) - J(E)`; non-positive when the sublevel set wins.
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    /// Radius of the ball `K` in which competitors live.
    pub region_radius: f64,
    pub entries: Vec<ProbeEntry>,
    pub max_difference: f64,
    pub tolerance: f64,
    pub minimal: bool,
}

/// `∫_{B_s} |∇w| dvol = ∫_0^s |w'| A dτ` about the pole.
fn centred_flux(f: &RadialField, s: f64) -> Result<f64> {
    let m = &f.metric;
    let mut cuts = vec![0.0];
    // The limit field is flat where the area is not minimal; split there.
    cuts.extend(
        m.kind
            .breakpoints()
            .into_iter()
            .filter(|&b| b > 0.0 && b < s),
    );
    cuts.push(s);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let lo = w[0].max(1e-12 * s);
        acc += integrate_adaptive(
            |t| {
                f.dw(t)
                    .map(|d| d.abs() * m.area_unchecked(t))
                    .unwrap_or(0.0)
            },
            lo,
            w[1],
            1e-12,
            1e-15,
        )?;
    }
    Ok(acc)
}

/// `∫_{B(c, ρ)} |∇w| dx` for a flat radial `w` and `|c| = d`, by integrating
/// `|w'(r)|` against the area of `S_r ∩ B(c, ρ)`.
fn shifted_flux(f: &RadialField, d: f64, rho: f64) -> Result<f64> {
    let dw = |r: f64| f.dw(r).map(|v| v.abs()).unwrap_or(0.0);
    let mut acc = 0.0;
    if rho > d {
        acc += integrate_adaptive(
            |r| dw(r) * 4.0 * PI * r * r,
            1e-12 * rho,
            rho - d,
            1e-12,
            1e-15,
        )?;
    }
    let (lo, hi) = ((d - rho).abs(), d + rho);
    if d > 0.0 && hi > lo {
        let cap = |r: f64| {
            let c = ((r * r + d * d - rho * rho) / (2.0 * r * d)).clamp(-1.0, 1.0);
            2.0 * PI * r * r * (1.0 - c)
        };
        acc += integrate_adaptive(|r| dw(r) * cap(r), lo.max(1e-12 * rho), hi, 1e-12, 1e-15)?;
    }
    Ok(acc)
}

pub fn weak_solution_probe(
    w: &PotentialField,
    m: &Metric,
    region_radius: f64,
    levels: &[f64],
    competitors: &[Competitor],
    tolerance: f64,
) -> Result<ProbeReport> {
    let f = w.as_radial().ok_or_else(|| {
        Error::Unsupported("the weak-solution probe evaluates radial fields".into())
    })?;
    if m.as_warped().is_none() {
        return Err(Error::Domain("radial field needs a warped metric".into()));
    }
    if !f.metric.has_pole() {
        return Err(Error::Unsupported("competitor balls need a pole".into()));
    }
    if !(region_radius > 0.0 && region_radius <= f.r_outer) {
        return Err(Error::Domain(format!(
            "region radius {region_radius} outside (0, R]"
        )));
    }
    let flat = matches!(f.metric.kind, WarpKind::Euclidean);
    let mut entries = Vec::new();
    for &t in levels {
        let s = f.radius_of_level(t)?;
        if s >= region_radius {
            return Err(Error::Domain(format!("sublevel at t = {t} leaves K")));
        }
        let j_sub = f.metric.area_unchecked(s) - centred_flux(f, s)?;
        for &c in competitors {
            let j_comp = match c {
                Competitor::Sublevel => j_sub,
                Competitor::Dilated { factor } => {
                    let r = factor * s;
                    if !(factor > 0.0 && r < region_radius) {
                        return Err(Error::Domain(format!(
                            "competitor {c:?} at t = {t} is not compactly inside K"
                        )));
                    }
                    f.metric.area_unchecked(r) - centred_flux(f, r)?
                }
                Competitor::Shifted { offset, factor } => {
                    if !flat {
                        return Err(Error::Unsupported(
                            "shifted competitors need the flat metric".into(),
                        ));
                    }
                    let rho = factor * s;
                    if !(factor > 0.0 && offset >= 0.0 && offset + rho < region_radius) {
                        return Err(Error::Domain(format!(
                            "competitor {c:?} at t = {t} is not compactly inside K"
                        )));
                    }
                    4.0 * PI * rho * rho - shifted_flux(f, offset, rho)?
                }
            };
            entries.push(ProbeEntry {
                t,
                competitor: c,
                j_sublevel: j_sub,
                j_competitor: j_comp,
                difference: j_sub - j_comp,
            });
        }
    }
    if entries.is_empty() {
        return Err(Error::Config(
            "probe needs at least one level and one competitor".into(),
        ));
    }
    let max_difference = entries
        .iter()
        .map(|e| e.difference)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ProbeReport {
        region_radius,
        entries,
        max_difference,
        tolerance,
        minimal: max_difference <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::WarpedMetric;
    use crate::pharmonic::field::FieldKind;
    use crate::pharmonic::radial::radial_limit;

    fn limit() -> (PotentialField, Metric) {
        let m = WarpedMetric::euclidean(10.0);
        (
            PotentialField::radial(FieldKind::Log, radial_limit(&m, 10.0).unwrap()),
            m.into(),
        )
    }

    #[test]
    fn round_competitors_tie() {
        let (f, m) = limit();
        let comps = [
            Competitor::Sublevel,
            Competitor::Dilated { factor: 1.1 },
            Competitor::Dilated { factor: 0.9 },
        ];
        let r = weak_solution_probe(&f, &m, 5.0, &[-1.0, 0.0, 1.0], &comps, 1e-6).unwrap();
        assert!(r.minimal, "{r:?}");
        for e in &r.entries {
            assert!(e.difference.abs() < 1e-6 * e.j_sublevel.abs().max(1.0) + 1e-6);
        }
    }

    #[test]
    fn shifted_balls_lose() {
        let (f, m) = limit();
        let comps = [
            Competitor::Shifted {
                offset: 0.3,
                factor: 1.0,
            },
            Competitor::Shifted {
                offset: 0.5,
                factor: 0.8,
            },
        ];
        let r = weak_solution_probe(&f, &m, 5.0, &[0.0], &comps, 1e-6).unwrap();
        assert!(r.entries.iter().all(|e| e.difference < -1e-3), "{r:?}");
    }

    #[test]
    fn competitor_outside_region_rejected() {
        let (f, m) = limit();
        assert!(weak_solution_probe(
            &f,
            &m,
            1.2,
            &[0.0],
            &[Competitor::Dilated { factor: 1.5 }],
            1e-6
        )
        .is_err());
    }
}
