//! Flow reports: sublevel geometry over a t-grid and the inequality checks
//! along the flow.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::{LevelSetGeometry, Prepared};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::pharmonic::export::fmt17;
use crate::pharmonic::{FieldData, PotentialField};

/// Absolute/relative tolerances of the individual verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowTolerances {
    /// `|P/(4πe^t) − 1|`.
    pub perimeter: f64,
    /// Slack on each discrete Geroch difference.
    pub geroch: f64,
    /// Slack on the reverse isoperimetric ratio.
    pub reverse_isoperimetric: f64,
    /// Slack on `∫H²`, relative to `16π`.
    pub h2: f64,
    /// `|m_H|` at the earliest level, relative to `max(1, max |m_H|)`.
    pub trend: f64,
    /// Relative slack on the Hölder equality `P³ = ∫|∇w|² (∫1/|∇w|)²`.
    pub holder: f64,
    /// Relative slack for volume/perimeter monotonicity.
    pub monotone: f64,
}

impl FlowTolerances {
    pub fn radial() -> Self {
        Self {
            perimeter: 1e-6,
            geroch: 1e-8,
            reverse_isoperimetric: 1e-6,
            h2: 1e-6,
            trend: 1e-4,
            holder: 1e-6,
            monotone: 1e-12,
        }
    }

    /// Lattice measures carry the discretisation error of the triangulation.
    pub fn lattice() -> Self {
        Self {
            perimeter: 5e-2,
            geroch: 5e-2,
            reverse_isoperimetric: 5e-2,
            h2: 5e-2,
            trend: 5e-2,
            holder: 5e-2,
            monotone: 1e-9,
        }
    }

    pub fn scaled(self, k: f64) -> Self {
        Self {
            perimeter: self.perimeter * k,
            geroch: self.geroch * k,
            reverse_isoperimetric: self.reverse_isoperimetric * k,
            h2: self.h2 * k,
            trend: self.trend * k,
            holder: self.holder * k,
            monotone: self.monotone * k,
        }
    }
}

impl Default for FlowTolerances {
    fn default() -> Self {
        Self::radial()
    }
}

/// Uniform t-grid description (`t_min = -8` and `t_max = T` by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TGrid {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub step: f64,
}

impl Default for TGrid {
    fn default() -> Self {
        Self {
            t_min: None,
            t_max: None,
            step: 0.05,
        }
    }
}

impl TGrid {
    /// Levels `t_min, t_min + step, …` strictly below the validity threshold
    /// (and up to `t_max` when given). The default lower end is clamped to the
    /// smallest resolved level of the field.
    pub fn levels(&self, w: &PotentialField, m: &Metric) -> Result<Vec<f64>> {
        let prep = Prepared::new(w, m)?;
        self.levels_for(&prep)
    }

    pub(crate) fn levels_for(&self, prep: &Prepared<'_>) -> Result<Vec<f64>> {
        if !(self.step > 0.0) {
            return Err(Error::Config(format!(
                "t-grid step must be positive, got {}",
                self.step
            )));
        }
        let valid = prep.t_valid();
        let floor = prep.t_floor()?;
        let lo = match self.t_min {
            Some(t) => t,
            None => {
                let t = -8.0f64;
                if t > floor {
                    t
                } else {
                    // First grid point above the floor, on the lattice −8 + k·step.
                    t + ((floor - t) / self.step).floor() * self.step + self.step
                }
            }
        };
        let hi = self.t_max.unwrap_or(valid);
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let t = lo + k as f64 * self.step;
            if t > hi + 1e-12 * self.step || t >= valid {
                break;
            }
            out.push(t);
            k += 1;
        }
        if out.len() < 2 {
            return Err(Error::Config(format!(
                "t-grid [{lo}, {hi}] has fewer than two valid levels"
            )));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub description: String,
    pub applicable: bool,
    pub pass: bool,
    /// Smallest signed margin (non-negative when the check holds exactly).
    pub worst_margin: f64,
    pub tolerance: f64,
    /// Entry where the worst margin occurs.
    pub worst_entry: Option<usize>,
    /// Inclusive range of entries checked.
    pub entries: [usize; 2],
}

impl Verdict {
    fn from_margins(
        id: &str,
        description: &str,
        tolerance: f64,
        range: [usize; 2],
        margins: &[(usize, f64)],
    ) -> Self {
        let mut worst = f64::INFINITY;
        let mut at = None;
        for &(k, mg) in margins {
            if mg < worst || mg.is_nan() {
                worst = mg;
                at = Some(k);
            }
        }
        Verdict {
            id: id.into(),
            description: description.into(),
            applicable: true,
            pass: worst >= -tolerance,
            worst_margin: worst,
            tolerance,
            worst_entry: at,
            entries: range,
        }
    }

    fn not_applicable(id: &str, description: &str, range: [usize; 2]) -> Self {
        Verdict {
            id: id.into(),
            description: description.into(),
            applicable: false,
            pass: true,
            worst_margin: f64::NAN,
            tolerance: f64::NAN,
            worst_entry: None,
            entries: range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GerochStep {
    pub from: usize,
    pub to: usize,
    pub difference: f64,
    /// `−δ (16π)^{-3/2} ∫ P^{3/2} dt` over the step (trapezoid rule).
    pub correction: f64,
}

/// Constants measured along the flow and by the construction pipeline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowConstants {
    /// Smallest `C` with `E_t ⊂ B_{e^{(t+C)/2}}`, i.e. `w ≥ 2 log r − C` on the
    /// sampled boundaries.
    pub proper_c: f64,
    /// `max ∫H²` over the entries.
    pub c1: f64,
    pub theta: Option<f64>,
    pub xi: Option<f64>,
    pub t_rho_xi: Option<f64>,
    pub perimeter_target: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    /// `radial` or `lattice`.
    pub field: String,
    pub entries: Vec<LevelSetGeometry>,
    pub delta: f64,
    /// Last time of the grid.
    pub t_final: f64,
    /// Validity threshold of the field (`{w ≤ t} ⊂ B_R` below it).
    pub t_valid: f64,
    pub geroch: Vec<GerochStep>,
    pub verdicts: Vec<Verdict>,
    pub constants: FlowConstants,
    pub tolerances: FlowTolerances,
}

impl FlowReport {
    pub fn verdict(&self, id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// Evaluates the flow on `t_grid` (strictly increasing, below the validity
/// threshold) with default tolerances for the field type.
pub fn flow_report(
    w: &PotentialField,
    m: &Metric,
    t_grid: &[f64],
    delta: f64,
) -> Result<FlowReport> {
    let tol = match w.data {
        FieldData::Radial(_) => FlowTolerances::radial(),
        FieldData::Lattice(_) => FlowTolerances::lattice(),
    };
    flow_report_with(w, m, t_grid, delta, tol)
}

pub fn flow_report_with(
    w: &PotentialField,
    m: &Metric,
    t_grid: &[f64],
    delta: f64,
    tol: FlowTolerances,
) -> Result<FlowReport> {
    if t_grid.len() < 2 || t_grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::Config(
            "t-grid must be strictly increasing with at least two levels".into(),
        ));
    }
    if !(delta >= 0.0) {
        return Err(Error::Config(format!(
            "defect δ must be non-negative, got {delta}"
        )));
    }
    let prep = Prepared::new(w, m)?;
    let entries: Vec<LevelSetGeometry> = t_grid
        .par_iter()
        .map(|&t| prep.geometry(t))
        .collect::<Result<_>>()?;
    let radial = matches!(w.data, FieldData::Radial(_));
    let pole = match m {
        Metric::Warped(wm) => wm.has_pole(),
        Metric::Grid(_) => true,
    };
    Ok(assemble(entries, delta, prep.t_valid(), radial, pole, tol))
}

/// Verdicts and measured constants for a list of entries.
pub(crate) fn assemble(
    entries: Vec<LevelSetGeometry>,
    delta: f64,
    t_valid: f64,
    radial: bool,
    pole: bool,
    tol: FlowTolerances,
) -> FlowReport {
    let n = entries.len();
    let all = [0, n - 1];
    let c16 = 16.0 * PI;
    let t_final = entries[n - 1].t;

    let geroch: Vec<GerochStep> = entries
        .windows(2)
        .enumerate()
        .map(|(k, e)| {
            let dt = e[1].t - e[0].t;
            let integral = 0.5 * dt * (e[0].perimeter.powf(1.5) + e[1].perimeter.powf(1.5));
            GerochStep {
                from: k,
                to: k + 1,
                difference: e[1].hawking - e[0].hawking,
                correction: -delta * integral / (c16 * c16.sqrt()),
            }
        })
        .collect();

    let mut verdicts = Vec::new();
    let margins: Vec<(usize, f64)> = entries
        .iter()
        .enumerate()
        .map(|(k, e)| (k, -(e.perimeter / (4.0 * PI * e.t.exp()) - 1.0).abs()))
        .collect();
    verdicts.push(Verdict::from_margins(
        "perimeter_law",
        "P(E_t) = 4π e^t",
        tol.perimeter,
        all,
        &margins,
    ));

    let margins: Vec<(usize, f64)> = geroch
        .iter()
        .map(|g| (g.to, g.difference - g.correction))
        .collect();
    verdicts.push(Verdict::from_margins(
        "geroch",
        "m_H(t_{k+1}) − m_H(t_k) ≥ −δ(16π)^{-3/2}∫P^{3/2}",
        tol.geroch,
        all,
        &margins,
    ));

    // The reverse isoperimetric bound is for flows emanating from a point.
    if pole {
        let shi = 1.0 / (1.0 + 2.0 / 3.0 * delta * t_final.exp()).sqrt();
        let margins: Vec<(usize, f64)> = entries
            .iter()
            .enumerate()
            .map(|(k, e)| (k, e.volume * 6.0 * PI.sqrt() / e.perimeter.powf(1.5) - shi))
            .collect();
        verdicts.push(Verdict::from_margins(
            "reverse_isoperimetric",
            "|E_t| 6√π / P^{3/2} ≥ (1 + ⅔δe^T)^{-1/2}",
            tol.reverse_isoperimetric,
            all,
            &margins,
        ));
    } else {
        verdicts.push(Verdict::not_applicable(
            "reverse_isoperimetric",
            "reverse isoperimetric bound (needs a pole)",
            all,
        ));
    }

    let margins: Vec<(usize, f64)> = entries
        .iter()
        .enumerate()
        .map(|(k, e)| {
            (
                k,
                (c16 + 32.0 / 3.0 * PI * delta * e.t.exp() - e.h2_integral) / c16,
            )
        })
        .collect();
    verdicts.push(Verdict::from_margins(
        "h2_bound",
        "∫H² ≤ 16π + (32/3)πδe^t",
        tol.h2,
        all,
        &margins,
    ));
    // The same bound with the constant that is sharp for round spheres.
    let margins: Vec<(usize, f64)> = entries
        .iter()
        .enumerate()
        .map(|(k, e)| {
            (
                k,
                (c16 + 8.0 / 3.0 * PI * delta * e.t.exp() - e.h2_integral) / c16,
            )
        })
        .collect();
    let mut sharp = Verdict::from_margins(
        "h2_bound_sharp",
        "∫H² ≤ 16π + (8/3)πδe^t (informational)",
        tol.h2,
        all,
        &margins,
    );
    sharp.pass = true;
    verdicts.push(sharp);

    if pole {
        let scale = entries.iter().map(|e| e.hawking.abs()).fold(1.0, f64::max);
        let head = (n / 4).max(2).min(n);
        let mut margins = vec![(0, tol.trend - entries[0].hawking.abs() / scale)];
        margins.extend((1..head).map(|k| {
            (
                k,
                (entries[k].hawking.abs() - entries[k - 1].hawking.abs()) / scale + tol.trend,
            )
        }));
        // Margins already include the tolerance.
        let mut v = Verdict::from_margins(
            "hawking_trend",
            "m_H(∂E_t) → 0 as t decreases",
            0.0,
            [0, head - 1],
            &margins,
        );
        v.tolerance = tol.trend;
        verdicts.push(v);
    } else {
        verdicts.push(Verdict::not_applicable(
            "hawking_trend",
            "m_H(∂E_t) → 0 as t decreases (needs a pole)",
            all,
        ));
    }

    let proper_c = entries
        .iter()
        .filter(|e| e.containment_radius > 0.0)
        .map(|e| 2.0 * e.containment_radius.ln() - e.t)
        .fold(f64::NEG_INFINITY, f64::max);
    if pole && proper_c.is_finite() {
        let margins: Vec<(usize, f64)> = entries
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let r = ((e.t + proper_c + 1.0) / 2.0).exp();
                (k, (r - e.containment_radius) / r)
            })
            .collect();
        verdicts.push(Verdict::from_margins(
            "containment",
            "{w ≤ T_r} ⊂ B_r, T_r = 2 log r − C − 1",
            0.0,
            all,
            &margins,
        ));
    } else {
        verdicts.push(Verdict::not_applicable(
            "containment",
            "{w ≤ T_r} ⊂ B_r (needs a pole)",
            all,
        ));
    }

    let mono = |f: fn(&LevelSetGeometry) -> f64| -> Vec<(usize, f64)> {
        entries
            .windows(2)
            .enumerate()
            .map(|(k, e)| (k + 1, (f(&e[1]) - f(&e[0])) / f(&e[1]).abs().max(1e-300)))
            .collect()
    };
    verdicts.push(Verdict::from_margins(
        "volume_monotone",
        "|E_t| non-decreasing",
        tol.monotone,
        all,
        &mono(|e| e.volume),
    ));
    verdicts.push(Verdict::from_margins(
        "perimeter_monotone",
        "P(E_t) non-decreasing",
        tol.monotone,
        all,
        &mono(|e| e.perimeter),
    ));

    let margins: Vec<(usize, f64)> = entries
        .iter()
        .enumerate()
        .map(|(k, e)| {
            (
                k,
                if e.components == 1 && e.surface_components == 1 {
                    0.0
                } else {
                    -1.0
                },
            )
        })
        .collect();
    verdicts.push(Verdict::from_margins(
        "connected",
        "E_t and ∂E_t connected",
        0.0,
        all,
        &margins,
    ));

    if radial {
        let margins: Vec<(usize, f64)> = entries
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let lhs = e.perimeter.powi(3);
                let rhs = e.h2_integral * e.inv_grad_integral * e.inv_grad_integral;
                (k, -(lhs / rhs - 1.0).abs())
            })
            .collect();
        verdicts.push(Verdict::from_margins(
            "holder_equality",
            "P³ = ∫|∇w|² (∫1/|∇w|)² on round levels",
            tol.holder,
            all,
            &margins,
        ));
    }

    let c1 = entries
        .iter()
        .map(|e| e.h2_integral)
        .fold(f64::NEG_INFINITY, f64::max);
    FlowReport {
        field: if radial { "radial" } else { "lattice" }.into(),
        entries,
        delta,
        t_final,
        t_valid,
        geroch,
        verdicts,
        constants: FlowConstants {
            proper_c,
            c1,
            ..FlowConstants::default()
        },
        tolerances: tol,
    }
}

/// One row per entry; every column is described in a header comment.
pub fn flow_csv(r: &FlowReport) -> String {
    let mut out = String::new();
    let cols = [
        ("t", "flow time"),
        ("volume", "|E_t|"),
        ("perimeter", "P(E_t)"),
        ("perimeter_ratio", "P(E_t)/(4π e^t)"),
        ("components", "connected components of E_t"),
        ("surface_components", "connected components of ∂E_t"),
        ("h2_integral", "∫_{∂E_t} |∇w|²"),
        ("inv_grad_integral", "∫_{∂E_t} 1/|∇w|"),
        ("hawking", "Hawking mass of ∂E_t"),
        ("mql", "quasi-local mass of E_t"),
        (
            "containment_radius",
            "largest distance from the pole in E_t",
        ),
    ];
    let _ = writeln!(
        out,
        "# flow report ({} field), delta = {}",
        r.field,
        fmt17(r.delta)
    );
    for (c, d) in cols {
        let _ = writeln!(out, "# {c}: {d}");
    }
    let _ = writeln!(out, "{}", cols.map(|c| c.0).join(","));
    for e in &r.entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt17(e.t),
            fmt17(e.volume),
            fmt17(e.perimeter),
            fmt17(e.perimeter / (4.0 * PI * e.t.exp())),
            e.components,
            e.surface_components,
            fmt17(e.h2_integral),
            fmt17(e.inv_grad_integral),
            fmt17(e.hawking),
            fmt17(e.mql),
            fmt17(e.containment_radius),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imcf::geometry::hawking_mass;
    use crate::metrics::WarpedMetric;
    use crate::pharmonic::{radial_limit, FieldKind};

    fn run(m: WarpedMetric, r: f64, delta: f64) -> FlowReport {
        let w = PotentialField::radial(FieldKind::Log, radial_limit(&m, r).unwrap());
        let m: Metric = m.into();
        let grid = TGrid::default().levels(&w, &m).unwrap();
        flow_report(&w, &m, &grid, delta).unwrap()
    }

    #[test]
    fn euclidean_flow_is_an_equality_case() {
        let r = run(WarpedMetric::euclidean(20.0), 20.0, 0.0);
        assert!(r.all_pass(), "{:#?}", r.verdicts);
        assert!(r.entries.iter().all(|e| e.hawking.abs() < 1e-12));
        assert!(r.geroch.iter().all(|g| g.difference.abs() < 1e-12));
        assert!(
            r.verdict("reverse_isoperimetric")
                .unwrap()
                .worst_margin
                .abs()
                < 1e-6
        );
        assert!(r.constants.proper_c.abs() < 1e-9);
        assert_eq!(r.entries[0].t, -8.0);
        for e in &r.entries {
            assert_eq!(e.hawking, hawking_mass(e.perimeter, e.h2_integral));
        }
    }

    #[test]
    fn schwarzschild_mass_is_constant() {
        let r = run(WarpedMetric::schwarzschild(1.0, 100.0).unwrap(), 100.0, 0.0);
        assert!(r.verdict("geroch").unwrap().pass);
        assert!(r.verdict("perimeter_law").unwrap().pass);
        assert!(!r.verdict("hawking_trend").unwrap().applicable);
        assert!(r.entries.iter().all(|e| (e.hawking - 1.0).abs() < 1e-6));
    }

    #[test]
    fn hyperbolic_needs_its_defect() {
        let m = WarpedMetric::space_form(1.0, 5.0).unwrap();
        assert!(!run(m.clone(), 5.0, 0.0).verdict("geroch").unwrap().pass);
        let r = run(m, 5.0, 6.0);
        for id in ["geroch", "reverse_isoperimetric", "h2_bound"] {
            assert!(r.verdict(id).unwrap().pass, "{id}: {:?}", r.verdict(id));
        }
        // Round hyperbolic spheres attain the sharp form of the ∫H² bound.
        assert!(r.verdict("h2_bound_sharp").unwrap().worst_margin.abs() < 1e-9);
    }

    #[test]
    fn csv_has_documented_columns() {
        let r = run(WarpedMetric::euclidean(5.0), 5.0, 0.0);
        let csv = flow_csv(&r);
        let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
        for c in header.split(',') {
            assert!(csv.contains(&format!("# {c}:")));
        }
        assert_eq!(
            csv.lines().filter(|l| !l.starts_with('#')).count(),
            r.entries.len() + 1
        );
    }

    #[test]
    fn bad_grids_are_rejected() {
        let m = WarpedMetric::euclidean(5.0);
        let w = PotentialField::radial(FieldKind::Log, radial_limit(&m, 5.0).unwrap());
        let m: Metric = m.into();
        assert!(flow_report(&w, &m, &[0.0, 0.0], 0.0).is_err());
        assert!(flow_report(&w, &m, &[0.0, 10.0], 0.0).is_err());
    }
}
