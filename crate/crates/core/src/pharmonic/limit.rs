//! The `p → 1` continuation `w_{p_k} → w`.

use serde::Serialize;

use super::field::{FieldKind, PotentialField, SolverConfig};
use super::grid::grid_green;
use super::radial::radial_green;
use crate::error::{Error, Result};
use crate::metrics::Metric;

/// Number of log-spaced radii on which radial iterates are compared.
const ANNULUS_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationStep {
    pub p: f64,
    /// Sup-norm gap to the previous iterate on the annulus (`None` for the first).
    pub gap: Option<f64>,
}

/// Runs the schedule until consecutive iterates agree within
/// `cfg.cauchy_tolerance` on the annulus. The last iterate is returned, tagged
/// with the achieved gap; an exhausted schedule sets `converged = false`.
pub fn imcf_limit(
    m: &Metric,
    pole: [f64; 3],
    r_outer: f64,
    cfg: &SolverConfig,
) -> Result<PotentialField> {
    imcf_limit_traced(m, pole, r_outer, cfg).map(|(f, _)| f)
}

pub fn imcf_limit_traced(
    m: &Metric,
    pole: [f64; 3],
    r_outer: f64,
    cfg: &SolverConfig,
) -> Result<(PotentialField, Vec<ContinuationStep>)> {
    if cfg.p_schedule.is_empty() {
        return Err(Error::Config("empty p_schedule".into()));
    }
    let [a, b] = cfg.annulus;
    let mut trace = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut last: Option<PotentialField> = None;
    let mut gap = None;
    let mut converged = false;
    match m {
        Metric::Warped(w) => {
            cfg.validate(None)?;
            if pole != [0.0; 3] {
                return Err(Error::Domain(
                    "warped metrics have their pole at the origin".into(),
                ));
            }
            let lo = a.max(w.r_inner() * (1.0 + 1e-9));
            let hi = b.min(r_outer);
            if !(lo < hi) {
                return Err(Error::Config(format!(
                    "annulus [{a}, {b}] misses the domain"
                )));
            }
            let radii: Vec<f64> = (0..ANNULUS_SAMPLES)
                .map(|i| lo * (hi / lo).powf(i as f64 / (ANNULUS_SAMPLES - 1) as f64))
                .collect();
            for &p in &cfg.p_schedule {
                let f = radial_green(w, p, r_outer)?;
                let vals = radii.iter().map(|&r| f.w(r)).collect::<Result<Vec<_>>>()?;
                gap = prev.as_ref().map(|pv| sup_gap(pv, &vals));
                trace.push(ContinuationStep { p, gap });
                prev = Some(vals);
                last = Some(PotentialField::radial(FieldKind::Log, f));
                if gap.is_some_and(|g| g < cfg.cauchy_tolerance) {
                    converged = true;
                    break;
                }
            }
        }
        Metric::Grid(g) => {
            for &p in &cfg.p_schedule {
                let f = grid_green(g, pole, p, r_outer, cfg)?;
                let nodes = f.annulus_nodes(a, b.min(r_outer));
                if nodes.is_empty() {
                    return Err(Error::Config(format!(
                        "annulus [{a}, {b}] contains no free nodes"
                    )));
                }
                let vals: Vec<f64> = nodes.iter().map(|&i| f.w[i]).collect();
                gap = prev.as_ref().map(|pv| sup_gap(pv, &vals));
                trace.push(ContinuationStep { p, gap });
                prev = Some(vals);
                last = Some(PotentialField::lattice(FieldKind::Log, f));
                if gap.is_some_and(|g| g < cfg.cauchy_tolerance) {
                    converged = true;
                    break;
                }
            }
        }
    }
    let mut out = last.expect("schedule is non-empty");
    out.cauchy_gap = gap;
    out.converged = converged;
    Ok((out, trace))
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::WarpedMetric;

    #[test]
    fn euclidean_gap_halves_along_schedule() {
        let m: Metric = WarpedMetric::euclidean(10.0).into();
        let cfg = SolverConfig {
            annulus: [0.1, 1.0],
            cauchy_tolerance: 1e-12,
            ..SolverConfig::default()
        };
        let (f, trace) = imcf_limit_traced(&m, [0.0; 3], 10.0, &cfg).unwrap();
        assert!(!f.converged);
        assert_eq!(trace.len(), 10);
        // w_p - 2 log s ≈ -(p-1) log s, so consecutive gaps are (p_{k-1}-p_k) ln 10.
        for s in &trace[1..] {
            let dp = 2.0 * (s.p - 1.0);
            let expect = (dp - (s.p - 1.0)) * 10f64.ln();
            assert!((s.gap.unwrap() / expect - 1.0).abs() < 0.01, "{s:?}");
        }
    }

    #[test]
    fn stops_once_cauchy() {
        let m: Metric = WarpedMetric::euclidean(10.0).into();
        let cfg = SolverConfig {
            cauchy_tolerance: 0.1,
            ..SolverConfig::default()
        };
        let (f, trace) = imcf_limit_traced(&m, [0.0; 3], 10.0, &cfg).unwrap();
        assert!(f.converged);
        assert!(trace.len() < 10);
        assert!(f.cauchy_gap.unwrap() < 0.1);
    }

    #[test]
    fn schwarzschild_iterate_increases() {
        let m = WarpedMetric::schwarzschild(1.0, 50.0).unwrap();
        let cfg = SolverConfig {
            annulus: [0.6, 20.0],
            ..SolverConfig::default()
        };
        let f = imcf_limit(&m.clone().into(), [0.0; 3], 40.0, &cfg).unwrap();
        let r = f.as_radial().unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..100 {
            let s = 0.6 + 0.19 * i as f64;
            let w = r.w(s).unwrap();
            assert!(w > prev);
            prev = w;
        }
    }
}
