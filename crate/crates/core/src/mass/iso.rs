//! Quasi-local mass sweeps over exhausting families and the isoperimetric
//! mass estimate.

use serde::{Deserialize, Serialize};

use super::quasi_local_mass;
use crate::error::{Error, Result};
use crate::imcf::LevelSetGeometry;
use crate::metrics::{Metric, WarpedMetric};
use crate::numeric::brent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetRecord {
    pub id: String,
    pub volume: f64,
    pub perimeter: f64,
    pub mql: f64,
}

impl SetRecord {
    pub fn new(id: impl Into<String>, volume: f64, perimeter: f64) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            volume,
            perimeter,
            mql: quasi_local_mass(volume, perimeter)?,
        })
    }

    pub fn from_geometry(id: impl Into<String>, g: &LevelSetGeometry) -> Result<Self> {
        Self::new(id, g.volume, g.perimeter)
    }
}

/// Deterministic exhausting family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SetFamily {
    /// Regions enclosed by centred spheres of the given chart radii.
    CenteredBalls { radii: Vec<f64> },
    /// Regions enclosed by centred spheres of area `4π ρ²`.
    CenteredAreaRadii { area_radii: Vec<f64> },
    /// Precomputed sets, e.g. outputs of the candidate pipeline.
    Records { records: Vec<SetRecord> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Increasing,
    Decreasing,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub index: usize,
    /// `min{P(E), |E|}` of a member with `m_QL ≥ 0`.
    pub c: f64,
    pub mql: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub records: Vec<SetRecord>,
    /// First index of the tail (last third of the family).
    pub tail_start: usize,
    /// `sup` of `m_QL` over the tail; an estimate of `m_iso`, never a
    /// two-sided value.
    pub m_iso_estimate: f64,
    /// Monotone trend of `m_QL` along the tail.
    pub tail_trend: Trend,
    /// Fewer than five members.
    pub low_confidence: bool,
    /// Member with `m_QL ≥ 0` maximising `min{P, |E|}`.
    pub certificate: Option<Certificate>,
    /// Indices of all members with `m_QL ≥ 0`.
    pub certificate_sets: Vec<usize>,
}

fn radius_for_area_radius(m: &WarpedMetric, rho: f64) -> Result<f64> {
    let lo = m.r_inner();
    let lo = if lo > 0.0 { lo } else { 0.0 };
    let hi = m.r_max;
    if !(m.warp(hi) >= rho) || m.warp(lo.max(1e-300)) > rho {
        return Err(Error::Domain(format!(
            "area radius {rho} is not attained on the chart"
        )));
    }
    brent(|r| m.warp(r) - rho, lo, hi, 1e-15)
}

pub fn iso_mass_estimate(m: &Metric, family: &SetFamily) -> Result<MassReport> {
    let records: Vec<SetRecord> = match family {
        SetFamily::Records { records } => records.clone(),
        SetFamily::CenteredBalls { radii } | SetFamily::CenteredAreaRadii { area_radii: radii } => {
            let wm = m.as_warped().ok_or_else(|| {
                Error::Unsupported("centred families need a warped metric".into())
            })?;
            radii
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let r = match family {
                        SetFamily::CenteredAreaRadii { .. } => radius_for_area_radius(wm, x)?,
                        _ => x,
                    };
                    SetRecord::new(
                        format!("ball[{i}]"),
                        wm.enclosed_volume(r)?,
                        wm.sphere_area(r)?,
                    )
                })
                .collect::<Result<_>>()?
        }
    };
    if records.is_empty() {
        return Err(Error::Config("empty set family".into()));
    }
    if records
        .windows(2)
        .any(|w| !(w[1].perimeter > w[0].perimeter))
    {
        return Err(Error::Config(
            "family perimeters must be strictly increasing".into(),
        ));
    }
    let n = records.len();
    let tail_start = n - n.div_ceil(3);
    let tail = &records[tail_start..];
    let m_iso_estimate = tail.iter().map(|r| r.mql).fold(f64::NEG_INFINITY, f64::max);
    let tail_trend = if tail.windows(2).all(|w| w[1].mql >= w[0].mql) {
        Trend::Increasing
    } else if tail.windows(2).all(|w| w[1].mql <= w[0].mql) {
        Trend::Decreasing
    } else {
        Trend::Mixed
    };
    let certificate_sets: Vec<usize> = (0..n).filter(|&i| records[i].mql >= 0.0).collect();
    let certificate = certificate_sets
        .iter()
        .map(|&i| Certificate {
            index: i,
            c: records[i].perimeter.min(records[i].volume),
            mql: records[i].mql,
        })
        .max_by(|a, b| a.c.total_cmp(&b.c));
    Ok(MassReport {
        records,
        tail_start,
        m_iso_estimate,
        tail_trend,
        low_confidence: n < 5,
        certificate,
        certificate_sets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_balls_have_no_mass() {
        let m: Metric = WarpedMetric::euclidean(2000.0).into();
        let radii: Vec<f64> = (-3..10).map(|k| 2f64.powi(k)).collect();
        let r = iso_mass_estimate(&m, &SetFamily::CenteredBalls { radii }).unwrap();
        assert!(r.m_iso_estimate.abs() < 1e-9, "{}", r.m_iso_estimate);
        assert!(!r.low_confidence);
    }

    #[test]
    fn schwarzschild_sweep_approaches_one() {
        let m: Metric = WarpedMetric::schwarzschild(1.0, 1100.0).unwrap().into();
        let area_radii: Vec<f64> = (1..=12)
            .map(|k| 1000f64.powf(k as f64 / 12.0) + 2.0)
            .collect();
        let r = iso_mass_estimate(&m, &SetFamily::CenteredAreaRadii { area_radii }).unwrap();
        // Volumes measured from the horizon give m_QL ≈ m + 3m²/ρ: the
        // approach to the mass is from above.
        assert_eq!(r.tail_trend, Trend::Decreasing, "{:?}", r.records);
        for rec in &r.records {
            assert!(rec.mql > 1.0);
        }
        let last = r.records.last().unwrap().mql;
        assert!((0.98..=1.02).contains(&last), "{last}");
        assert!(r.certificate.is_some());
    }

    #[test]
    fn short_or_unordered_families() {
        let m: Metric = WarpedMetric::euclidean(10.0).into();
        let r = iso_mass_estimate(
            &m,
            &SetFamily::CenteredBalls {
                radii: vec![1.0, 2.0],
            },
        )
        .unwrap();
        assert!(r.low_confidence);
        assert!(iso_mass_estimate(
            &m,
            &SetFamily::CenteredBalls {
                radii: vec![2.0, 1.0]
            }
        )
        .is_err());
    }
}
