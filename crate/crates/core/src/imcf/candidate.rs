//! Construction of large sets with reverse isoperimetric control: run the
//! flow on each smoothed member up to `T = log(𝒫/4π)` and keep the final
//! sublevel set.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::flow::{flow_report, FlowReport, TGrid};
use super::geometry::LevelSetGeometry;
use crate::error::{Error, Result};
use crate::metrics::mollify::SmoothedApproximation;
use crate::metrics::Metric;
use crate::pharmonic::{radial_limit, FieldKind, PotentialField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidateOptions {
    /// Proper-estimate constant `ξ`; measured from each member's flow when `None`.
    pub xi: Option<f64>,
    pub t_min: f64,
    pub step: f64,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        Self {
            xi: None,
            t_min: -8.0,
            step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateMember {
    pub index: usize,
    pub epsilon: f64,
    pub xi: f64,
    pub rho: f64,
    pub t_rho_xi: f64,
    /// Radius of the ball the flow was computed in.
    pub r_outer: f64,
    /// `true` when the chart is shorter than `4ρ + 4`.
    pub domain_truncated: bool,
    /// `|E| 6√π / 𝒫^{3/2}`.
    pub ratio: f64,
    /// `(1 + ⅔ε e^T)^{-1/2}`.
    pub bound: f64,
    /// `P(E)/𝒫`.
    pub theta: f64,
    pub set: LevelSetGeometry,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub perimeter_target: f64,
    pub members: Vec<CandidateMember>,
    /// Final sublevel set of the last member.
    pub set: LevelSetGeometry,
    /// Flow report of the last member.
    pub report: FlowReport,
}

/// `ρ` with `4π e^{2 log(ρ−1) − ξ − 1} = 𝒫`.
pub fn rho_for(perimeter_target: f64, xi: f64) -> f64 {
    1.0 + (perimeter_target * (xi + 1.0).exp() / (4.0 * PI)).sqrt()
}

fn levels_to(t_min: f64, step: f64, t_end: f64) -> Vec<f64> {
    let mut out: Vec<f64> = (0..)
        .map(|k| t_min + k as f64 * step)
        .take_while(|&t| t < t_end - 1e-9 * step)
        .collect();
    out.push(t_end);
    out
}

fn run_member(
    index: usize,
    member: &SmoothedApproximation,
    target: f64,
    opts: &CandidateOptions,
) -> Result<(CandidateMember, FlowReport)> {
    let wm = match &member.smoothed {
        Metric::Warped(w) => w,
        Metric::Grid(_) => {
            return Err(Error::Unsupported(
                "the candidate pipeline runs on warped members".into(),
            ));
        }
    };
    let metric = member.smoothed.clone();
    let r_avail = wm.r_max;
    let t_end = (target / (4.0 * PI)).ln();
    let xi = match opts.xi {
        Some(x) => x,
        None => {
            // Measure the proper constant on the whole chart first.
            let w = PotentialField::radial(FieldKind::Log, radial_limit(wm, r_avail)?);
            let grid = TGrid {
                t_min: Some(opts.t_min),
                t_max: None,
                step: opts.step,
            }
            .levels(&w, &metric)?;
            flow_report(&w, &metric, &grid, member.epsilon_defect)?
                .constants
                .proper_c
                .max(0.0)
        }
    };
    let rho = rho_for(target, xi);
    let wanted = 4.0 * rho + 4.0;
    let r_outer = wanted.min(r_avail);
    let w = PotentialField::radial(FieldKind::Log, radial_limit(wm, r_outer)?);
    let grid = levels_to(opts.t_min, opts.step, t_end);
    let mut report = flow_report(&w, &metric, &grid, member.epsilon_defect)?;
    let set = report.entries.last().expect("non-empty grid").clone();
    let ratio = set.volume * 6.0 * PI.sqrt() / target.powf(1.5);
    let bound = 1.0 / (1.0 + 2.0 / 3.0 * member.epsilon_defect * t_end.exp()).sqrt();
    let theta = set.perimeter / target;
    report.constants.theta = Some(theta);
    report.constants.xi = Some(xi);
    report.constants.t_rho_xi = Some(t_end);
    report.constants.perimeter_target = Some(target);
    report.constants.rho = Some(rho);
    let m = CandidateMember {
        index,
        epsilon: member.epsilon_defect,
        xi,
        rho,
        t_rho_xi: t_end,
        r_outer,
        domain_truncated: wanted > r_avail,
        ratio,
        bound,
        theta,
        set,
        pass: ratio >= bound,
    };
    Ok((m, report))
}

pub fn candidate_set_builder(
    family: &[SmoothedApproximation],
    perimeter_target: f64,
    opts: &CandidateOptions,
) -> Result<CandidateSet> {
    if !(perimeter_target > 0.0 && perimeter_target.is_finite()) {
        return Err(Error::Config(format!(
            "target perimeter must be positive, got {perimeter_target}"
        )));
    }
    if family.is_empty() {
        return Err(Error::Config("empty family".into()));
    }
    let mut members = Vec::with_capacity(family.len());
    let mut last = None;
    for (i, m) in family.iter().enumerate() {
        let (c, r) = run_member(i, m, perimeter_target, opts).map_err(|e| Error::Member {
            index: i,
            source: Box::new(e),
        })?;
        members.push(c);
        last = Some(r);
    }
    let report = last.expect("non-empty family");
    let set = members.last().expect("non-empty family").set.clone();
    Ok(CandidateSet {
        perimeter_target,
        members,
        set,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::mollify::{mollify, Region};
    use crate::metrics::WarpedMetric;

    #[test]
    fn flat_family_gives_the_unit_ball() {
        let base: Metric = WarpedMetric::euclidean(20.0).into();
        let fam: Vec<_> = [0.1, 0.05]
            .iter()
            .map(|&s| {
                mollify(
                    &base,
                    s,
                    Region::Radial {
                        r_min: 0.05,
                        r_max: 19.0,
                    },
                )
                .unwrap()
            })
            .collect();
        let out = candidate_set_builder(&fam, 4.0 * PI, &CandidateOptions::default()).unwrap();
        for m in &out.members {
            assert!(
                (m.ratio - 1.0).abs() < 1e-9 && (m.theta - 1.0).abs() < 1e-9,
                "{m:?}"
            );
            assert!(m.epsilon < 1e-9 && m.xi.abs() < 1e-9);
        }
        assert!((out.set.volume - 4.0 * PI / 3.0).abs() < 1e-9);
    }

    #[test]
    fn member_errors_carry_their_index() {
        let base: Metric = WarpedMetric::euclidean(3.0).into();
        let fam = vec![mollify(
            &base,
            0.1,
            Region::Radial {
                r_min: 0.05,
                r_max: 2.5,
            },
        )
        .unwrap()];
        // A target perimeter beyond the chart.
        match candidate_set_builder(&fam, 1e4, &CandidateOptions::default()) {
            Err(Error::Member { index: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
