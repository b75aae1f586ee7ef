//! Empirical constants of the lower bounds, gradient and Harnack estimates
//! satisfied by Green functions and their `p → 1` limit.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{FieldData, PotentialField};
use super::grid::LatticeField;
use super::radial::{log_norm_constant, radial_ball_capacity, RadialField};
use crate::error::{Error, Result};
use crate::metrics::constants::fibonacci_directions;
use crate::metrics::{GeometryConstants, Metric};
use crate::numeric::{integrate_adaptive, log_add_exp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundOptions {
    /// Sample radii per field.
    pub samples: usize,
    /// Innermost sample radius as a fraction of `R`.
    pub inner_fraction: f64,
    /// Outermost sample radius as a fraction of `R`.
    pub outer_fraction: f64,
    /// Gradient products are taken on `d(o, x) < η`; defaults to `R/10`.
    pub eta: Option<f64>,
    /// `a` with `Ric ≥ -2a`, enabling the space-form comparison.
    pub comparison_a: Option<f64>,
    /// Directions per sphere for lattice Harnack ratios.
    pub directions: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            samples: 200,
            inner_fraction: 1e-3,
            outer_fraction: 0.9,
            eta: None,
            comparison_a: None,
            directions: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackSample {
    pub radius: f64,
    /// `max G / min G` over the sphere (1 for radial fields).
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentSample {
    pub r: f64,
    pub t_r: f64,
    /// Largest distance from the pole reached by `{w ≤ T_r}`.
    pub reach: f64,
    pub contained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonCheck {
    pub a: f64,
    /// `min (G - G_a) / G_a` over the samples; non-negative when the bound holds.
    pub worst_relative_margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub p: Option<f64>,
    pub samples: usize,
    /// Smallest `C` with `w ≥ (3 - p) log r - C` (`p = 1` for the limit).
    pub lower_bound_constant: f64,
    /// Smallest `C` with `w ≥ 2 log r - C`.
    pub proper_constant: f64,
    /// `min_r [max_{∂B_r} w - log(Cap_p(B̄_r)/c_p)]`; non-negative when the
    /// capacity bound on the sphere maximum holds (radial fields).
    pub sphere_max_margin: Option<f64>,
    pub harnack: Vec<HarnackSample>,
    pub harnack_max: f64,
    pub eta: f64,
    /// `sup |∇w| d(o, ·)` on `d < η`.
    pub gradient_product_sup: f64,
    /// `inf |∇w| d(o, ·)` on `d < η`.
    pub gradient_product_inf: f64,
    pub comparison: Option<ComparisonCheck>,
    pub containment: Vec<ContainmentSample>,
    pub constants: GeometryConstants,
}

/// Space-form comparison `∫_r^R v_a^{-1/(p-1)} dt` with
/// `v_a = ((p-1)/(3-p))^{p-1} (sinh(√a t)/√a)²`, in log form.
pub fn log_comparison_green(a: f64, p: f64, r: f64, r_outer: f64) -> Result<f64> {
    let q = 1.0 / (p - 1.0);
    let log_v = |t: f64| {
        let s = if a > 0.0 {
            (a.sqrt() * t).sinh() / a.sqrt()
        } else {
            t
        };
        (4.0 * PI).ln() - log_norm_constant(p) + 2.0 * s.ln()
    };
    // Integrate in pieces short enough that the integrand varies by a bounded factor.
    let mut acc = f64::NEG_INFINITY;
    let mut lo = r;
    while lo < r_outer {
        let hi = (lo * 1.25).min(r_outer).max(lo + 1e-300);
        let ref_log = -q * log_v(lo);
        let part = integrate_adaptive(|t| (-q * log_v(t) - ref_log).exp(), lo, hi, 1e-12, 0.0)?;
        acc = log_add_exp(acc, ref_log + part.ln());
        lo = hi;
    }
    Ok(acc)
}

pub fn bound_checks(
    field: &PotentialField,
    m: &Metric,
    consts: &GeometryConstants,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    if opts.samples < 2 {
        return Err(Error::Config(
            "bound checks need at least two samples".into(),
        ));
    }
    match (&field.data, m) {
        (FieldData::Radial(r), Metric::Warped(_)) => radial_bounds(r, consts, opts),
        (FieldData::Lattice(l), Metric::Grid(_)) => lattice_bounds(l, consts, opts),
        _ => Err(Error::Domain("field and metric types differ".into())),
    }
}

fn radial_bounds(
    f: &RadialField,
    consts: &GeometryConstants,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    let m = &f.metric;
    if !m.has_pole() {
        return Err(Error::Domain(
            "bound checks need a punctured ball about a pole".into(),
        ));
    }
    let big_r = f.r_outer;
    let lo = opts.inner_fraction * big_r;
    let hi = opts.outer_fraction * big_r;
    let radii: Vec<f64> = (0..opts.samples)
        .map(|i| lo * (hi / lo).powf(i as f64 / (opts.samples - 1) as f64))
        .collect();
    let dist: Vec<f64> = radii
        .iter()
        .map(|&s| m.arclength(s))
        .collect::<Result<_>>()?;
    let w: Vec<f64> = radii.iter().map(|&s| f.w(s)).collect::<Result<_>>()?;
    let slope = 3.0 - f.p.unwrap_or(1.0);
    let lower = smallest_constant(&w, &dist, slope);
    let proper = smallest_constant(&w, &dist, 2.0);

    let sphere_max_margin = match f.p {
        Some(p) => {
            let mut worst = f64::INFINITY;
            for (&s, &wv) in radii.iter().zip(&w) {
                let cap = radial_ball_capacity(m, p, s, big_r)?;
                worst = worst.min(wv - (cap.ln() - log_norm_constant(p)));
            }
            Some(worst)
        }
        None => None,
    };

    let eta = opts.eta.unwrap_or(0.1 * big_r);
    let (mut gsup, mut ginf) = (0.0f64, f64::INFINITY);
    for (&s, &d) in radii.iter().zip(&dist) {
        if d < eta.min(big_r) {
            let prod = f.grad_norm(s)? * d;
            gsup = gsup.max(prod);
            ginf = ginf.min(prod);
        }
    }
    if ginf.is_infinite() {
        return Err(Error::Config(format!("no samples below η = {eta}")));
    }

    let comparison = match (opts.comparison_a, f.p) {
        (Some(a), Some(p)) => {
            let mut worst = f64::INFINITY;
            for (&s, &d) in radii.iter().zip(&dist) {
                let lg = f.log_green(s)?;
                let lc = log_comparison_green(a, p, d, m.arclength(big_r)?)?;
                worst = worst.min((lg - lc).exp_m1());
            }
            Some(ComparisonCheck {
                a,
                worst_relative_margin: worst,
                holds: worst >= -1e-9,
            })
        }
        _ => None,
    };

    let c_contain = if f.p.is_some() { lower } else { proper };
    let containment = radii
        .iter()
        .zip(&dist)
        .step_by((opts.samples / 16).max(1))
        .map(|(&s, &d)| {
            let t_r = 2.0 * d.ln() - c_contain - 1.0;
            // w is increasing, so {w ≤ T_r} is the ball of radius w⁻¹(T_r).
            let reach = match f.radius_of_level(t_r) {
                Ok(rr) => m.arclength(rr).unwrap_or(f64::NAN),
                Err(Error::EmptySublevel(_)) => 0.0,
                Err(_) => f64::INFINITY,
            };
            ContainmentSample {
                r: s,
                t_r,
                reach,
                contained: reach < d,
            }
        })
        .collect();

    let harnack: Vec<HarnackSample> = radii
        .iter()
        .map(|&s| HarnackSample {
            radius: s,
            ratio: 1.0,
        })
        .collect();
    let mut constants = consts.clone();
    constants.harnack_ratio = Some(1.0);
    constants.zeta = Some(gsup);
    constants.eta = Some(eta);
    Ok(BoundReport {
        p: f.p,
        samples: radii.len(),
        lower_bound_constant: lower,
        proper_constant: proper,
        sphere_max_margin,
        harnack,
        harnack_max: 1.0,
        eta,
        gradient_product_sup: gsup,
        gradient_product_inf: ginf,
        comparison,
        containment,
        constants,
    })
}

fn smallest_constant(w: &[f64], d: &[f64], slope: f64) -> f64 {
    w.iter()
        .zip(d)
        .map(|(w, d)| slope * d.ln() - w)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Trilinear interpolation of a node field; `None` if any corner is not finite.
pub(crate) fn interpolate_node_field(f: &LatticeField, vals: &[f64], x: [f64; 3]) -> Option<f64> {
    let lat = f.lattice();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for d in 0..3 {
        let t = (x[d] - lat.origin[d]) / lat.h;
        if t < 0.0 || t > (lat.dims[d] - 1) as f64 {
            return None;
        }
        let i = (t.floor() as usize).min(lat.dims[d] - 2);
        base[d] = i;
        frac[d] = t - i as f64;
    }
    let mut acc = 0.0;
    for c in 0..8 {
        let o = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
        let wgt: f64 = (0..3)
            .map(|d| if o[d] == 1 { frac[d] } else { 1.0 - frac[d] })
            .product();
        let v = vals[lat.index(base[0] + o[0], base[1] + o[1], base[2] + o[2])];
        if wgt > 0.0 {
            if !v.is_finite() {
                return None;
            }
            acc += wgt * v;
        }
    }
    Some(acc)
}

/// `max G / min G` on the chart sphere of radius `r`, from trilinear
/// interpolation of `log G` (or `-w` for limit fields) at Fibonacci directions.
pub fn lattice_harnack_ratio(f: &LatticeField, r: f64, directions: usize) -> Option<f64> {
    let chart = f.chart();
    let lg: Vec<f64> = match f.p {
        Some(p) => f.w.iter().map(|w| -w / (p - 1.0)).collect(),
        None => f.w.iter().map(|w| -w).collect(),
    };
    let l = chart.g.cholesky()?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for n in fibonacci_directions(directions) {
        // Point at chart distance r along n: x = o + r L^{-T} n.
        let y = solve_upper_transposed(&l, n);
        let x = [0, 1, 2].map(|k| chart.o[k] + r * y[k]);
        let v = interpolate_node_field(f, &lg, x)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Some((hi - lo).exp())
}

/// Solves `Lᵀ y = n` for lower-triangular `L`.
fn solve_upper_transposed(l: &[[f64; 3]; 3], n: [f64; 3]) -> [f64; 3] {
    let mut y = [0.0; 3];
    for i in (0..3).rev() {
        let mut s = n[i];
        for j in i + 1..3 {
            s -= l[j][i] * y[j];
        }
        y[i] = s / l[i][i];
    }
    y
}

fn lattice_bounds(
    f: &LatticeField,
    consts: &GeometryConstants,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    let lat = f.lattice().clone();
    let lo = (2.0 * f.eps_inner).max(opts.inner_fraction * f.r_outer);
    let hi = opts.outer_fraction * f.r_outer;
    let nodes = f.annulus_nodes(lo, hi);
    if nodes.is_empty() {
        return Err(Error::Config(
            "no lattice samples in the bound annulus".into(),
        ));
    }
    let chart = f.chart();
    let dist: Vec<f64> = nodes.iter().map(|&i| chart.rho(lat.point(i))).collect();
    let w: Vec<f64> = nodes.iter().map(|&i| f.w[i]).collect();
    let slope = 3.0 - f.p.unwrap_or(1.0);
    let lower = smallest_constant(&w, &dist, slope);
    let proper = smallest_constant(&w, &dist, 2.0);

    // |∇w| from central differences of w in the chart, measured with g^{-1}.
    let eta = opts.eta.unwrap_or(0.1 * f.r_outer);
    let grads: Vec<f64> = nodes
        .par_iter()
        .map(|&i| {
            let c = lat.coords(i);
            let mut g = [0.0; 3];
            for k in 0..3 {
                let mut a = c;
                let mut b = c;
                a[k] -= 1;
                b[k] += 1;
                let wa = f.w[lat.index(a[0], a[1], a[2])];
                let wb = f.w[lat.index(b[0], b[1], b[2])];
                g[k] = (wb - wa) / (2.0 * lat.h);
            }
            f.metric
                .at(i)
                .inverse()
                .map_or(f64::NAN, |gi| gi.quad(g).sqrt())
        })
        .collect();
    let (mut gsup, mut ginf) = (0.0f64, f64::INFINITY);
    for (g, &d) in grads.iter().zip(&dist) {
        if d < eta && g.is_finite() {
            gsup = gsup.max(g * d);
            ginf = ginf.min(g * d);
        }
    }

    let steps = 12;
    let harnack: Vec<HarnackSample> = (0..steps)
        .filter_map(|k| {
            let r = lo + (hi - lo) * k as f64 / (steps - 1) as f64;
            lattice_harnack_ratio(f, r, opts.directions)
                .map(|ratio| HarnackSample { radius: r, ratio })
        })
        .collect();
    let harnack_max = harnack.iter().map(|h| h.ratio).fold(1.0, f64::max);

    let c_contain = if f.p.is_some() { lower } else { proper };
    let containment = (1..=8)
        .map(|k| {
            let r = lo + (hi - lo) * k as f64 / 8.0;
            let t_r = 2.0 * r.ln() - c_contain - 1.0;
            let reach = (0..lat.len())
                .filter(|&i| f.w[i] <= t_r)
                .map(|i| chart.rho(lat.point(i)))
                .fold(0.0, f64::max);
            ContainmentSample {
                r,
                t_r,
                reach,
                contained: reach < r,
            }
        })
        .collect();

    let mut constants = consts.clone();
    constants.harnack_ratio = Some(harnack_max);
    constants.zeta = if gsup > 0.0 { Some(gsup) } else { None };
    constants.eta = Some(eta);
    Ok(BoundReport {
        p: f.p,
        samples: nodes.len(),
        lower_bound_constant: lower,
        proper_constant: proper,
        sphere_max_margin: None,
        harnack,
        harnack_max,
        eta,
        gradient_product_sup: gsup,
        gradient_product_inf: ginf,
        comparison: None,
        containment,
        constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::constants::{Confidence, PoincareBound, PoincareStatus};
    use crate::metrics::WarpedMetric;
    use crate::pharmonic::radial::{radial_green, radial_limit};

    fn consts() -> GeometryConstants {
        GeometryConstants {
            ahlfors: 1.0,
            covering: 1,
            poincare: PoincareBound {
                status: PoincareStatus::DiagnosticOnly,
                declared: None,
                diagnostic: None,
            },
            sobolev: 1.0,
            harnack_ratio: None,
            zeta: None,
            eta: None,
            confidence: Confidence::Exact,
            samples: 0,
        }
    }

    #[test]
    fn euclidean_limit_constant_vanishes() {
        let m = WarpedMetric::euclidean(10.0);
        let f = PotentialField::radial(
            super::super::FieldKind::Log,
            radial_limit(&m, 10.0).unwrap(),
        );
        let r = bound_checks(&f, &m.into(), &consts(), &BoundOptions::default()).unwrap();
        assert!(r.proper_constant.abs() < 1e-6, "{}", r.proper_constant);
        assert!(r.containment.iter().all(|c| c.contained));
    }

    #[test]
    fn euclidean_gradient_product() {
        let m = WarpedMetric::euclidean(10.0);
        let f = PotentialField::radial(
            super::super::FieldKind::Log,
            radial_green(&m, 1.5, 10.0).unwrap(),
        );
        let r = bound_checks(&f, &m.into(), &consts(), &BoundOptions::default()).unwrap();
        assert!((r.gradient_product_sup / 1.5 - 1.0).abs() < 0.01);
        assert!((r.gradient_product_inf / 1.5 - 1.0).abs() < 0.01);
        assert!(
            r.sphere_max_margin.unwrap() > -1e-8,
            "{:?}",
            r.sphere_max_margin
        );
        assert_eq!(r.constants.zeta, Some(r.gradient_product_sup));
    }

    #[test]
    fn hyperbolic_comparison_is_equality() {
        let m = WarpedMetric::space_form(1.0, 4.0).unwrap();
        let f = PotentialField::radial(
            super::super::FieldKind::Log,
            radial_green(&m, 1.5, 3.0).unwrap(),
        );
        let opts = BoundOptions {
            comparison_a: Some(1.0),
            ..BoundOptions::default()
        };
        let r = bound_checks(&f, &m.into(), &consts(), &opts).unwrap();
        let c = r.comparison.unwrap();
        assert!(c.holds && c.worst_relative_margin.abs() < 1e-8, "{c:?}");
    }
}
