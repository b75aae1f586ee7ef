//! Flatness diagnostics when no set of the flow carries positive
//! quasi-local mass.

use serde::{Deserialize, Serialize};

use crate::imcf::FlowReport;
use crate::metrics::grid::grid_scalar_curvature;
use crate::metrics::Metric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RigidityStatus {
    /// `sup m_QL ≤ tol` and all flatness diagnostics vanish within `tol`.
    Consistent,
    /// `m_QL` is non-positive along the flow but the metric is not flat.
    Inconsistent,
    /// Some entry has `m_QL > tol`; the rigidity hypothesis does not apply.
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityDiagnostic {
    pub max_mql: f64,
    pub min_mql: f64,
    pub max_abs_hawking: f64,
    /// `max |R|` over the flow region (`None` if curvature is undefined there).
    pub max_abs_curvature: Option<f64>,
    pub tolerance: f64,
    pub hypothesis_holds: bool,
    pub rigidity_consistent: bool,
    pub status: RigidityStatus,
}

/// Largest `|R|` over the region swept by the entries.
fn curvature_sup(report: &FlowReport, m: &Metric) -> Option<f64> {
    match m {
        Metric::Warped(w) => {
            let hi = report
                .entries
                .iter()
                .filter_map(|e| e.radius)
                .fold(0.0, f64::max);
            if hi <= 0.0 {
                return None;
            }
            let lo = w.r_inner();
            let n = 2000;
            let mut sup = 0.0f64;
            let mut any = false;
            for k in 1..=n {
                let r = lo + (hi - lo) * k as f64 / n as f64;
                // Breakpoints of C⁰ warps carry no pointwise curvature.
                if let Ok(v) = w.scalar_curvature(r) {
                    sup = sup.max(v.abs());
                    any = true;
                }
            }
            any.then_some(sup)
        }
        Metric::Grid(g) => {
            let r = grid_scalar_curvature(g).ok()?;
            let vals: Vec<f64> = r.into_iter().flatten().collect();
            (!vals.is_empty()).then(|| vals.iter().fold(0.0, |a: f64, v| a.max(v.abs())))
        }
    }
}

pub fn rigidity_probe(report: &FlowReport, m: &Metric, tolerance: f64) -> RigidityDiagnostic {
    let max_mql = report
        .entries
        .iter()
        .map(|e| e.mql)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_mql = report
        .entries
        .iter()
        .map(|e| e.mql)
        .fold(f64::INFINITY, f64::min);
    let max_abs_hawking = report
        .entries
        .iter()
        .map(|e| e.hawking.abs())
        .fold(0.0, f64::max);
    let max_abs_curvature = curvature_sup(report, m);
    let hypothesis_holds = max_mql <= tolerance;
    let flat = min_mql >= -tolerance
        && max_abs_hawking <= tolerance
        && max_abs_curvature.is_some_and(|r| r <= tolerance);
    let rigidity_consistent = hypothesis_holds && flat;
    let status = if !hypothesis_holds {
        RigidityStatus::Inapplicable
    } else if flat {
        RigidityStatus::Consistent
    } else {
        RigidityStatus::Inconsistent
    };
    RigidityDiagnostic {
        max_mql,
        min_mql,
        max_abs_hawking,
        max_abs_curvature,
        tolerance,
        hypothesis_holds,
        rigidity_consistent,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imcf::{flow_report, TGrid};
    use crate::metrics::WarpedMetric;
    use crate::pharmonic::{radial_limit, FieldKind, PotentialField};

    fn probe(m: WarpedMetric, r: f64) -> RigidityDiagnostic {
        let w = PotentialField::radial(FieldKind::Log, radial_limit(&m, r).unwrap());
        let m: Metric = m.into();
        let grid = TGrid::default().levels(&w, &m).unwrap();
        let rep = flow_report(&w, &m, &grid, 0.0).unwrap();
        rigidity_probe(&rep, &m, 1e-9)
    }

    #[test]
    fn flat_is_consistent() {
        let d = probe(WarpedMetric::euclidean(10.0), 10.0);
        assert_eq!(d.status, RigidityStatus::Consistent);
        assert!(d.max_abs_hawking < 1e-9 && d.max_abs_curvature == Some(0.0));
    }

    #[test]
    fn curved_metrics_are_not() {
        let d = probe(WarpedMetric::schwarzschild(1.0, 50.0).unwrap(), 50.0);
        assert!(!d.rigidity_consistent && d.max_mql > 0.0);
        let d = probe(WarpedMetric::sphere(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(d.status, RigidityStatus::Inapplicable);
    }
}
