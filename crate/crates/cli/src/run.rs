//! Dispatch of one scenario and its artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;
use serde_json::{json, Value};

use imcf_core::imcf::{coarea_check, flow_csv, flow_report_with, CoareaField};
use imcf_core::mass::{iso_mass_estimate, radial_profile, rigidity_probe};
use imcf_core::metrics::grid_scalar_curvature;
use imcf_core::pharmonic::export::{fmt17, radial_csv, write_lattice};
use imcf_core::pharmonic::{
    grid_green, imcf_limit, radial_green, FieldData, FieldKind, PotentialField,
};
use imcf_core::{Metric, WarpedMetric};

use crate::scenario::{ExperimentKind, Loaded};
use crate::verify::{self, Suite, VerifyOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub tolerance_scale: f64,
    /// Echo the verification table to stdout.
    pub print: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub kind: ExperimentKind,
    /// All hard verdicts pass.
    pub pass: bool,
    /// `false` when the run stopped early; listed artifacts may be partial.
    pub complete: bool,
    pub error: Option<String>,
    pub artifacts: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

struct Sink<'a> {
    dir: &'a Path,
    prefix: String,
    artifacts: Vec<PathBuf>,
}

impl Sink<'_> {
    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.prefix))
    }

    fn write(&mut self, suffix: &str, contents: &str) -> anyhow::Result<()> {
        let p = self.path(suffix);
        std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        self.artifacts.push(p);
        Ok(())
    }

    fn json(&mut self, suffix: &str, v: &impl Serialize) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(v)?;
        self.write(suffix, &(text + "\n"))
    }
}

/// Report body and hard-verdict status of an experiment.
struct Body {
    report: Value,
    pass: bool,
}

pub fn run(kind: ExperimentKind, loaded: &Loaded, opts: &RunOptions) -> anyhow::Result<RunOutcome> {
    let sc = &loaded.scenario;
    std::fs::create_dir_all(&opts.out_dir)
        .with_context(|| format!("creating {}", opts.out_dir.display()))?;
    let mut sink = Sink {
        dir: &opts.out_dir,
        prefix: sc
            .outputs
            .prefix
            .clone()
            .unwrap_or_else(|| kind.name().to_string()),
        artifacts: Vec::new(),
    };
    let result = match kind {
        ExperimentKind::Metric => run_metric(loaded, &mut sink),
        ExperimentKind::Green => run_green(loaded, &mut sink),
        ExperimentKind::Flow => run_flow(loaded, opts, &mut sink),
        ExperimentKind::Mass => run_mass(loaded, &mut sink),
        ExperimentKind::Profile => run_profile(loaded, &mut sink),
        ExperimentKind::Verify => run_verify(loaded, opts, &mut sink),
    };
    let (body, error) = match result {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(format!("{e:#}"))),
    };
    let summary_path = sink.path(".summary.json");
    let outcome = RunOutcome {
        kind,
        pass: body.as_ref().is_some_and(|b| b.pass),
        complete: error.is_none(),
        error,
        artifacts: sink.artifacts.clone(),
        summary_path: summary_path.clone(),
    };
    let summary = json!({
        "version": VERSION,
        "scenario_hash": loaded.hash,
        "kind": kind,
        "pass": outcome.pass,
        "complete": outcome.complete,
        "error": outcome.error,
        "artifacts": outcome.artifacts,
        "report": body.map_or(Value::Null, |b| b.report),
    });
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary)? + "\n",
    )
    .with_context(|| format!("writing {}", summary_path.display()))?;
    Ok(outcome)
}

fn build_metric(loaded: &Loaded) -> anyhow::Result<Metric> {
    let spec = loaded
        .scenario
        .metric
        .as_ref()
        .ok_or_else(|| anyhow!("scenario has no metric"))?;
    Ok(spec.build(&loaded.base_dir)?)
}

fn warped(m: &Metric) -> anyhow::Result<&WarpedMetric> {
    m.as_warped()
        .ok_or_else(|| anyhow!("this experiment needs a warped metric"))
}

fn csv_header(out: &mut String, cols: &[(&str, &str)]) {
    for (c, d) in cols {
        let _ = writeln!(out, "# {c}: {d}");
    }
    let names: Vec<&str> = cols.iter().map(|c| c.0).collect();
    let _ = writeln!(out, "{}", names.join(","));
}

fn run_metric(loaded: &Loaded, sink: &mut Sink<'_>) -> anyhow::Result<Body> {
    let m = build_metric(loaded)?;
    let report = match &m {
        Metric::Warped(w) => {
            let mut csv = String::new();
            csv_header(
                &mut csv,
                &[
                    ("r", "chart radius"),
                    ("f", "warp f(r)"),
                    ("f_r", "f'(r)"),
                    ("area", "area of the centred sphere"),
                    ("volume", "volume enclosed by the centred sphere"),
                    ("scalar_curvature", "scalar curvature (nan where undefined)"),
                ],
            );
            let lo = w.r_inner();
            let n = 200;
            for k in 1..=n {
                let r = lo + (w.r_max - lo) * k as f64 / n as f64;
                let j = w.jet(r);
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    fmt17(r),
                    fmt17(j.f),
                    fmt17(j.f1),
                    fmt17(w.sphere_area(r)?),
                    fmt17(w.enclosed_volume(r)?),
                    fmt17(w.scalar_curvature(r).unwrap_or(f64::NAN)),
                );
            }
            sink.write(".csv", &csv)?;
            json!({
                "type": "warped",
                "label": w.label(),
                "r_inner": w.r_inner(),
                "r_max": w.r_max,
                "has_pole": w.has_pole(),
            })
        }
        Metric::Grid(g) => {
            let (lo, hi) = g.ellipticity();
            let r: Vec<f64> = grid_scalar_curvature(g)?.into_iter().flatten().collect();
            let lat = g.lattice();
            json!({
                "type": "grid",
                "dims": lat.dims,
                "origin": lat.origin,
                "h": lat.h,
                "ellipticity": [lo, hi],
                "flat": g.is_flat(),
                "scalar_curvature_range": [
                    r.iter().cloned().fold(f64::INFINITY, f64::min),
                    r.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                ],
            })
        }
    };
    sink.json(".json", &report)?;
    Ok(Body { report, pass: true })
}

fn outer_radius(loaded: &Loaded, m: &Metric) -> anyhow::Result<f64> {
    match (loaded.scenario.green.r_outer, m) {
        (Some(r), _) => Ok(r),
        (None, Metric::Warped(w)) => Ok(w.r_max),
        (None, Metric::Grid(_)) => Err(anyhow!("lattice runs need green.r_outer")),
    }
}

fn field_summary(f: &PotentialField) -> Value {
    match &f.data {
        FieldData::Radial(r) => json!({
            "field": "radial",
            "p": r.p,
            "r_outer": r.r_outer,
            "normalisation_defect": r.normalisation_defect().ok(),
            "converged": f.converged,
            "cauchy_gap": f.cauchy_gap,
        }),
        FieldData::Lattice(l) => json!({
            "field": "lattice",
            "p": l.p,
            "r_outer": l.r_outer,
            "eps_inner": l.eps_inner,
            "capacity_inner": l.capacity_inner,
            "diagnostics": l.diagnostics,
            "converged": f.converged,
            "cauchy_gap": f.cauchy_gap,
        }),
    }
}

fn run_green(loaded: &Loaded, sink: &mut Sink<'_>) -> anyhow::Result<Body> {
    let sc = &loaded.scenario;
    let m = build_metric(loaded)?;
    let r_outer = outer_radius(loaded, &m)?;
    let pole = sc.green.pole;
    let f = match (sc.green.p, &m) {
        (Some(p), Metric::Warped(w)) => {
            PotentialField::radial(FieldKind::Log, radial_green(w, p, r_outer)?)
        }
        (Some(p), Metric::Grid(g)) => {
            PotentialField::lattice(FieldKind::Log, grid_green(g, pole, p, r_outer, &sc.solver)?)
        }
        (None, _) => imcf_limit(&m, pole, r_outer, &sc.solver)?,
    };
    match f.data {
        FieldData::Radial(_) => sink.write(".csv", &radial_csv(&f)?)?,
        FieldData::Lattice(_) => {
            let p = sink.path(".bin");
            write_lattice(&f, &p)?;
            sink.artifacts.push(p.clone());
            sink.artifacts
                .push(PathBuf::from(format!("{}.json", p.display())));
        }
    }
    let pass = f.converged
        && f.as_lattice()
            .and_then(|l| l.diagnostics.as_ref())
            .map_or(true, |d| d.converged);
    let report = field_summary(&f);
    Ok(Body { report, pass })
}

fn run_flow(loaded: &Loaded, opts: &RunOptions, sink: &mut Sink<'_>) -> anyhow::Result<Body> {
    let sc = &loaded.scenario;
    let m = build_metric(loaded)?;
    let r_outer = outer_radius(loaded, &m)?;
    let f = match &m {
        // The radial limit is exact; no continuation is needed.
        Metric::Warped(w) => PotentialField::radial(
            FieldKind::Log,
            imcf_core::pharmonic::radial_limit(w, r_outer)?,
        ),
        Metric::Grid(_) => imcf_limit(&m, sc.green.pole, r_outer, &sc.solver)?,
    };
    let levels = sc.flow.t_grid.levels(&f, &m)?;
    let lattice = matches!(f.data, FieldData::Lattice(_));
    let tol = sc.tolerances(lattice, opts.tolerance_scale);
    let report = flow_report_with(&f, &m, &levels, sc.flow.delta, tol)?;
    sink.write(".csv", &flow_csv(&report))?;
    let rigidity = rigidity_probe(
        &report,
        &m,
        sc.flow.rigidity_tolerance * opts.tolerance_scale,
    );
    let coarea = match sc.flow.coarea {
        None => None,
        Some(region) => Some(match &f.data {
            FieldData::Radial(r) => coarea_check(
                CoareaField::RadialPotential(r),
                region,
                sc.flow.coarea_levels,
            )?,
            FieldData::Lattice(l) => coarea_check(
                CoareaField::Lattice {
                    metric: &l.metric,
                    values: &l.w,
                },
                region,
                sc.flow.coarea_levels,
            )?,
        }),
    };
    let pass = report.all_pass() && f.converged;
    let body = json!({
        "field": field_summary(&f),
        "flow": report,
        "rigidity": rigidity,
        "coarea": coarea,
    });
    sink.json(".json", &body)?;
    Ok(Body { report: body, pass })
}

fn run_mass(loaded: &Loaded, sink: &mut Sink<'_>) -> anyhow::Result<Body> {
    let sc = &loaded.scenario;
    let family = sc
        .mass
        .as_ref()
        .ok_or_else(|| anyhow!("scenario has no set family"))?;
    let m = match &sc.metric {
        Some(_) => build_metric(loaded)?,
        // Precomputed records never touch the metric.
        None => WarpedMetric::euclidean(1.0).into(),
    };
    let r = iso_mass_estimate(&m, family)?;
    let mut csv = String::new();
    csv_header(
        &mut csv,
        &[
            ("id", "set identifier"),
            ("volume", "|E|"),
            ("perimeter", "P(E)"),
            ("mql", "quasi-local mass (2/P)(|E| − P^{3/2}/(6√π))"),
            ("tail", "1 for members of the tail used by the estimate"),
        ],
    );
    for (i, rec) in r.records.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            rec.id,
            fmt17(rec.volume),
            fmt17(rec.perimeter),
            fmt17(rec.mql),
            u8::from(i >= r.tail_start)
        );
    }
    sink.write(".csv", &csv)?;
    sink.json(".json", &r)?;
    Ok(Body {
        report: serde_json::to_value(&r)?,
        pass: true,
    })
}

fn run_profile(loaded: &Loaded, sink: &mut Sink<'_>) -> anyhow::Result<Body> {
    let sc = &loaded.scenario;
    let m = build_metric(loaded)?;
    let p = radial_profile(warped(&m)?, &sc.profile.volumes, sc.profile.eps)?;
    let mut csv = String::new();
    csv_header(
        &mut csv,
        &[
            ("volume", "enclosed volume V"),
            ("radius", "chart radius of the centred ball of volume V"),
            (
                "perimeter",
                "I(V), perimeter of that ball (upper bound for the profile)",
            ),
            ("euclidean", "(36π)^{1/3} V^{2/3}"),
        ],
    );
    for i in 0..p.volumes.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt17(p.volumes[i]),
            fmt17(p.radii[i]),
            fmt17(p.perimeters[i]),
            fmt17(p.euclidean[i])
        );
    }
    sink.write(".csv", &csv)?;
    sink.json(".json", &p)?;
    Ok(Body {
        report: serde_json::to_value(&p)?,
        pass: true,
    })
}

fn run_verify(loaded: &Loaded, opts: &RunOptions, sink: &mut Sink<'_>) -> anyhow::Result<Body> {
    let suite: Suite = loaded
        .scenario
        .suite
        .as_deref()
        .unwrap_or("radial")
        .parse()
        .map_err(anyhow::Error::msg)?;
    let s = verify::verify(
        suite,
        &VerifyOptions {
            tolerance_scale: opts.tolerance_scale,
        },
    );
    if opts.print {
        print!("{}", verify::table(&s.checks));
    }
    sink.write(".csv", &verify::summary_csv(&s))?;
    sink.json(".json", &s)?;
    Ok(Body {
        report: serde_json::to_value(&s)?,
        pass: s.pass,
    })
}
