//! Measured geometric constants and the volume-deficit curvature estimate.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::distance::grid_distance_bounded;
use super::grid::GridMetric;
use super::warp::{WarpKind, WarpedMetric};
use super::Metric;
use crate::error::{Error, Result};
use crate::imcf::mesh::level_measure;
use crate::numeric::{integrate_adaptive, polyfit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    /// Closed-form or quadrature-exact sampling.
    Exact,
    /// Estimated from a finite sample within budget.
    Sampled,
    /// Sampling was truncated by the budget or restricted to centred sets.
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoincareStatus {
    Declared,
    DiagnosticOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareBound {
    pub status: PoincareStatus,
    pub declared: Option<f64>,
    /// Lower estimate from coordinate-type test functions; never a proof.
    pub diagnostic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryConstants {
    pub ahlfors: f64,
    pub covering: usize,
    pub poincare: PoincareBound,
    pub sobolev: f64,
    pub harnack_ratio: Option<f64>,
    pub zeta: Option<f64>,
    pub eta: Option<f64>,
    pub confidence: Confidence,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstantsOptions {
    /// Number of radii sampled in `(0, R]`.
    pub radii: usize,
    /// Number of off-centre points (grid metrics).
    pub centers: usize,
    /// Radius `r` of the annulus `A_{3r/4, 5r/4}` covered by balls of radius `r/2`;
    /// defaults to `R`.
    pub cover_radius: Option<f64>,
    pub declared_poincare: Option<f64>,
    /// Cap on the number of distance evaluations.
    pub budget: usize,
}

impl Default for ConstantsOptions {
    fn default() -> Self {
        Self {
            radii: 24,
            centers: 6,
            cover_radius: None,
            declared_poincare: None,
            budget: 50_000_000,
        }
    }
}

fn euclid_ball(r: f64) -> f64 {
    4.0 * PI / 3.0 * r * r * r
}

/// Geodesic distance between `(ρ₁, n₁)` and `(ρ₂, n₂)` in polar coordinates of
/// a homogeneous warp.
fn polar_distance(kind: &WarpKind, a: f64, b: f64, cos_theta: f64) -> Option<f64> {
    let c = cos_theta.clamp(-1.0, 1.0);
    match kind {
        WarpKind::Euclidean => Some((a * a + b * b - 2.0 * a * b * c).max(0.0).sqrt()),
        WarpKind::SpaceForm { a: k } => {
            let q = k.sqrt();
            let ch = (q * a).cosh() * (q * b).cosh() - (q * a).sinh() * (q * b).sinh() * c;
            Some(ch.max(1.0).acosh() / q)
        }
        WarpKind::Sphere { k } => {
            let q = k.sqrt();
            let cs = (q * a).cos() * (q * b).cos() + (q * a).sin() * (q * b).sin() * c;
            Some(cs.clamp(-1.0, 1.0).acos() / q)
        }
        _ => None,
    }
}

fn is_homogeneous(kind: &WarpKind) -> bool {
    matches!(
        kind,
        WarpKind::Euclidean | WarpKind::SpaceForm { .. } | WarpKind::Sphere { .. }
    )
}

/// Deterministic set of nearly uniform directions (Fibonacci sphere).
pub(crate) fn fibonacci_directions(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Greedy set cover of `points` by balls of radius `radius` centred at points.
fn greedy_cover(n: usize, covers: impl Fn(usize) -> Vec<usize>) -> usize {
    let sets: Vec<Vec<usize>> = (0..n).map(&covers).collect();
    let mut covered = vec![false; n];
    let mut remaining = n;
    let mut count = 0;
    while remaining > 0 {
        let (best, gain) = sets
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.iter().filter(|&&j| !covered[j]).count()))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        if gain == 0 {
            break;
        }
        for &j in &sets[best] {
            if !covered[j] {
                covered[j] = true;
                remaining -= 1;
            }
        }
        count += 1;
    }
    count
}

pub fn geometry_constants(
    m: &Metric,
    o: [f64; 3],
    big_r: f64,
    opts: &ConstantsOptions,
) -> Result<GeometryConstants> {
    if !(big_r > 0.0) {
        return Err(Error::Domain(format!(
            "radius must be positive, got {big_r}"
        )));
    }
    match m {
        Metric::Warped(w) => warped_constants(w, o, big_r, opts),
        Metric::Grid(g) => grid_constants(g, o, big_r, opts),
    }
}

fn warped_constants(
    w: &WarpedMetric,
    o: [f64; 3],
    big_r: f64,
    opts: &ConstantsOptions,
) -> Result<GeometryConstants> {
    if !w.has_pole() {
        return Err(Error::Unsupported(
            "geometry constants need a pole to centre balls at".into(),
        ));
    }
    let homogeneous = is_homogeneous(&w.kind);
    let off_centre = o.iter().any(|c| *c != 0.0);
    if off_centre && !homogeneous {
        return Err(Error::Unsupported(
            "off-centre balls of an inhomogeneous warp are not closed form; sample it onto a grid"
                .into(),
        ));
    }
    let cover_r = opts.cover_radius.unwrap_or(big_r);
    if 2.0 * big_r > w.r_max || 1.25 * cover_r > w.r_max {
        return Err(Error::Domain(format!(
            "balls of radius {big_r} around o leave the chart"
        )));
    }
    // Ahlfors: in a homogeneous space |B_r(x)| is independent of x; otherwise
    // only centred balls are sampled.
    let mut ahlfors: f64 = 1.0;
    let mut sobolev: f64 = 0.0;
    for k in 1..=opts.radii {
        let r = big_r * k as f64 / opts.radii as f64;
        let v = w.ball_volume(r)?;
        let ratio = v / euclid_ball(r);
        ahlfors = ahlfors.max(ratio).max(1.0 / ratio);
        let p = w.sphere_area(r)?;
        sobolev = sobolev.max(v.powf(2.0 / 3.0) / p);
    }
    let covering = if homogeneous {
        let r = cover_r;
        let dirs = fibonacci_directions(200);
        let shells = 9;
        let mut pts: Vec<(f64, [f64; 3])> = Vec::new();
        for s in 0..shells {
            let rho = 0.75 * r + 0.5 * r * s as f64 / (shells - 1) as f64;
            pts.extend(dirs.iter().map(|d| (rho, *d)));
        }
        let kind = w.kind.clone();
        greedy_cover(pts.len(), |i| {
            let (a, na) = pts[i];
            pts.iter()
                .enumerate()
                .filter(|(_, (b, nb))| {
                    let c = na[0] * nb[0] + na[1] * nb[1] + na[2] * nb[2];
                    polar_distance(&kind, a, *b, c).unwrap() <= 0.5 * r
                })
                .map(|(j, _)| j)
                .collect()
        })
    } else {
        // Monotone warps: treat centred annulus by the Euclidean count scaled
        // by the volume ratio of the annulus to a ball of radius r/2.
        let r = cover_r;
        let shell = w.shell_volume(0.75 * r, 1.25 * r)?;
        let ball = w.ball_volume(0.5 * r)?;
        (shell / ball).ceil() as usize
    };
    let diagnostic = poincare_diagnostic(w, big_r).ok();
    let confidence = if homogeneous {
        Confidence::Exact
    } else {
        Confidence::Low
    };
    Ok(GeometryConstants {
        ahlfors,
        covering: covering.max(1),
        poincare: poincare_bound(opts.declared_poincare, diagnostic),
        sobolev,
        harnack_ratio: None,
        zeta: None,
        eta: None,
        confidence,
        samples: opts.radii,
    })
}

fn poincare_bound(declared: Option<f64>, diagnostic: Option<f64>) -> PoincareBound {
    PoincareBound {
        status: if declared.is_some() {
            PoincareStatus::Declared
        } else {
            PoincareStatus::DiagnosticOnly
        },
        declared,
        diagnostic,
    }
}

/// `∫_B |u| / (r ∫_B |∇u|)` for `u = ρ cos θ` on the centred ball `B_r`.
fn poincare_diagnostic(w: &WarpedMetric, r: f64) -> Result<f64> {
    // ∫_{S²} |cos θ| = 2π.
    let num = integrate_adaptive(
        |rho| rho * w.warp(rho).powi(2) * 2.0 * PI,
        0.0,
        r,
        1e-10,
        0.0,
    )?;
    let den = integrate_adaptive(
        |rho| {
            let f = w.warp(rho);
            let q = if f > 0.0 { rho / f } else { 1.0 };
            let sphere = integrate_adaptive(
                |c| 2.0 * PI * (c * c + q * q * (1.0 - c * c)).sqrt(),
                -1.0,
                1.0,
                1e-10,
                0.0,
            )
            .unwrap_or(f64::NAN);
            f * f * sphere
        },
        0.0,
        r,
        1e-9,
        0.0,
    )?;
    Ok(num / (r * den))
}

fn grid_constants(
    g: &GridMetric,
    o: [f64; 3],
    big_r: f64,
    opts: &ConstantsOptions,
) -> Result<GeometryConstants> {
    let lat = g.lattice();
    let h = lat.h;
    let src = lat
        .nearest_node(o)
        .ok_or_else(|| Error::Domain(format!("point {o:?} outside the lattice")))?;
    let vol_w: Vec<f64> = g
        .values()
        .iter()
        .map(|s| s.det().sqrt() * h * h * h)
        .collect();
    let mut budget = opts.budget;
    let mut confidence = Confidence::Sampled;
    let from_o = grid_distance_bounded(g, src, 2.0 * big_r, None)?;
    // Centres: o plus nodes spread over B_R(o), in index order for determinism.
    let mut centres = vec![src];
    let inner: Vec<usize> = (0..lat.len())
        .filter(|&i| from_o.dist[i] <= big_r && i != src)
        .collect();
    if !inner.is_empty() && opts.centers > 0 {
        let step = (inner.len() / opts.centers).max(1);
        centres.extend(inner.iter().step_by(step).take(opts.centers).copied());
    }
    let r_min = 3.0 * h;
    let mut ahlfors: f64 = 1.0;
    for &c in &centres {
        if budget < lat.len() {
            confidence = Confidence::Low;
            break;
        }
        budget -= lat.len();
        let d = grid_distance_bounded(g, c, big_r, None)?;
        for k in 1..=opts.radii {
            let r = big_r * k as f64 / opts.radii as f64;
            if r < r_min {
                continue;
            }
            let v: f64 = d
                .dist
                .iter()
                .zip(&vol_w)
                .filter(|(di, _)| **di <= r)
                .map(|(_, w)| w)
                .sum();
            let ratio = v / euclid_ball(r);
            ahlfors = ahlfors.max(ratio).max(1.0 / ratio);
        }
    }
    // Sobolev ratio over distance balls about o.
    let mut sobolev: f64 = 0.0;
    for k in 1..=opts.radii {
        let r = big_r * k as f64 / opts.radii as f64;
        if r < r_min {
            continue;
        }
        let lm = level_measure(g, &from_o.dist, r, None)?;
        if lm.area > 0.0 {
            sobolev = sobolev.max(lm.volume.powf(2.0 / 3.0) / lm.area);
        }
    }
    // Covering of the annulus by distance balls of radius r/2, over a
    // subsample of annulus nodes.
    let r = opts.cover_radius.unwrap_or(big_r);
    let mut ann: Vec<usize> = (0..lat.len())
        .filter(|&i| from_o.dist[i] >= 0.75 * r && from_o.dist[i] <= 1.25 * r)
        .collect();
    let stride = (ann.len() / 1500).max(1);
    ann = ann.into_iter().step_by(stride).collect();
    let balls: Vec<Vec<usize>> = ann
        .iter()
        .map(|&c| {
            let d = grid_distance_bounded(g, c, 0.5 * r, None)?;
            Ok(ann
                .iter()
                .enumerate()
                .filter(|(_, &j)| d.dist[j] <= 0.5 * r)
                .map(|(k, _)| k)
                .collect())
        })
        .collect::<Result<_>>()?;
    let covering = greedy_cover(ann.len(), |i| balls[i].clone());
    Ok(GeometryConstants {
        ahlfors,
        covering: covering.max(1),
        poincare: poincare_bound(opts.declared_poincare, None),
        sobolev,
        harnack_ratio: None,
        zeta: None,
        eta: None,
        confidence,
        samples: centres.len() * opts.radii,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficitEstimate {
    pub scalar_curvature: f64,
    /// Calibration constant multiplying the extrapolated `r⁻⁵`-scaled deficit.
    pub calibration: f64,
    pub fit_residual: f64,
    pub radii: Vec<f64>,
    pub scaled_deficits: Vec<f64>,
}

/// Radii of the calibration run; decreasing.
pub const DEFAULT_DEFICIT_RADII: [f64; 6] = [0.2, 0.17, 0.14, 0.11, 0.08, 0.05];

fn scaled_deficits(w: &WarpedMetric, r_seq: &[f64]) -> Result<Vec<f64>> {
    r_seq
        .iter()
        .map(|&r| {
            let v = w.ball_volume(r)?;
            let p = w.sphere_area(r)?;
            Ok((v - p.powf(1.5) / (6.0 * PI.sqrt())) / r.powi(5))
        })
        .collect()
}

/// `(intercept, rms)` of the fit `a + b r²` to the scaled deficits.
fn extrapolate(r_seq: &[f64], d: &[f64]) -> Result<(f64, f64)> {
    let x: Vec<f64> = r_seq.iter().map(|r| r * r).collect();
    let (coef, rms) = polyfit(&x, d, 1)?;
    Ok((coef[0], rms))
}

/// Calibration constant, fitted once on the unit round sphere patch (`R = 6`).
pub fn deficit_calibration() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let s = WarpedMetric::sphere(1.0, 1.0).expect("unit sphere patch");
        let d = scaled_deficits(&s, &DEFAULT_DEFICIT_RADII).expect("sphere deficits");
        let (a, _) = extrapolate(&DEFAULT_DEFICIT_RADII, &d).expect("sphere fit");
        6.0 / a
    })
}

pub fn deficit_scalar_estimate(m: &Metric, o: [f64; 3], r_seq: &[f64]) -> Result<DeficitEstimate> {
    let w = match m {
        Metric::Warped(w) => w,
        Metric::Grid(_) => {
            return Err(Error::Unsupported(
                "the deficit estimate uses the radial volume quadrature".into(),
            ))
        }
    };
    if o.iter().any(|c| *c != 0.0) || !w.has_pole() {
        return Err(Error::Unsupported(
            "the deficit estimate is taken at the pole".into(),
        ));
    }
    if r_seq.len() < 3 || r_seq.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::Domain(
            "r_seq must be strictly decreasing with at least 3 radii".into(),
        ));
    }
    let d = scaled_deficits(w, r_seq)?;
    let (a, rms) = extrapolate(r_seq, &d)?;
    let c = deficit_calibration();
    Ok(DeficitEstimate {
        scalar_curvature: c * a,
        calibration: c,
        fit_residual: rms,
        radii: r_seq.to_vec(),
        scaled_deficits: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_is_close_to_series_value() {
        // Leading volume deficit of a small ball is (π/15) R r⁵.
        assert!((deficit_calibration() - 15.0 / PI).abs() < 1e-3 * 15.0 / PI);
    }

    #[test]
    fn deficit_estimates() {
        let e = Metric::Warped(WarpedMetric::euclidean(1.0));
        let est = deficit_scalar_estimate(&e, [0.0; 3], &DEFAULT_DEFICIT_RADII).unwrap();
        assert!(est.scalar_curvature.abs() < 1e-6);
        let s = Metric::Warped(WarpedMetric::sphere(1.0, 1.0).unwrap());
        let est = deficit_scalar_estimate(&s, [0.0; 3], &DEFAULT_DEFICIT_RADII).unwrap();
        assert!((est.scalar_curvature - 6.0).abs() < 0.3);
        let h = Metric::Warped(WarpedMetric::space_form(1.0, 1.0).unwrap());
        let est = deficit_scalar_estimate(&h, [0.0; 3], &DEFAULT_DEFICIT_RADII).unwrap();
        assert!(
            (est.scalar_curvature + 6.0).abs() < 0.3,
            "{}",
            est.scalar_curvature
        );
        assert!(deficit_scalar_estimate(&h, [0.0; 3], &[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn euclidean_constants() {
        let e = Metric::Warped(WarpedMetric::euclidean(4.0));
        let c = geometry_constants(&e, [0.3, 0.0, 0.0], 1.0, &ConstantsOptions::default()).unwrap();
        assert!((c.ahlfors - 1.0).abs() < 0.01);
        assert!(c.covering >= 1 && c.covering <= 40, "{}", c.covering);
        let ball_ratio = (4.0 * PI / 3.0f64).powf(2.0 / 3.0) / (4.0 * PI);
        assert!((c.sobolev - ball_ratio).abs() < 1e-12);
        assert_eq!(c.poincare.status, PoincareStatus::DiagnosticOnly);
    }

    #[test]
    fn hyperbolic_ahlfors_constant() {
        let h = Metric::Warped(WarpedMetric::space_form(1.0, 3.0).unwrap());
        let c = geometry_constants(&h, [0.0; 3], 1.0, &ConstantsOptions::default()).unwrap();
        assert!(c.ahlfors >= 1.0 && c.ahlfors <= 1.4, "{}", c.ahlfors);
    }
}
