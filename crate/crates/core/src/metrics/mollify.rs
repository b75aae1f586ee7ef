//! Mollification of warps and grid metrics, with scalar-curvature defect tracking.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::grid::{grid_scalar_curvature, GridMetric, Sym3};
use super::warp::{WarpKind, WarpedMetric};
use super::Metric;
use crate::error::{Error, Result};
use crate::numeric::{gl32, integrate_adaptive};

/// `exp(-1/(1-x²))` and its first derivative on `(-1, 1)`.
fn bump(x: f64) -> (f64, f64) {
    let q = 1.0 - x * x;
    if q <= 0.0 {
        return (0.0, 0.0);
    }
    let v = (-1.0 / q).exp();
    (v, v * (-2.0 * x / (q * q)))
}

fn bump_mass() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| {
        integrate_adaptive(|x| bump(x).0, -1.0, 1.0, 1e-15, 0.0).expect("bump kernel mass")
    })
}

/// Unit-mass bump kernel `φ_σ(τ) = φ(τ/σ)/σ` and its derivative.
pub fn kernel(sigma: f64, tau: f64) -> (f64, f64) {
    let z = bump_mass();
    let (v, d) = bump(tau / sigma);
    (v / (z * sigma), d / (z * sigma * sigma))
}

const SUBPANELS: usize = 8;

/// A warp convolved with the bump kernel. The base is extended oddly
/// across the pole; when the base has a smooth pole the result is rescaled
/// so that `f'(0) = 1` again.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MollifiedWarp {
    pub base: Box<WarpKind>,
    pub sigma: f64,
    pub scale: f64,
}

impl MollifiedWarp {
    pub fn new(base: WarpKind, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidMetric(format!(
                "mollification scale must be positive, got {sigma}"
            )));
        }
        if matches!(base, WarpKind::Schwarzschild { .. }) {
            return Err(Error::Unsupported(
                "mollification is defined for warps with unit radial factor".into(),
            ));
        }
        let mut m = Self {
            base: Box::new(base),
            sigma,
            scale: 1.0,
        };
        let smooth_pole = (m.base.warp_jet(0.0).1 - 1.0).abs() < 1e-6;
        if smooth_pole {
            m.scale = 1.0 / m.raw_jet(0.0).1;
        }
        Ok(m)
    }

    fn raw_jet(&self, r: f64) -> (f64, f64, f64) {
        let s = self.sigma;
        // Points where the oddly extended base is not smooth, seen from r.
        let mut cuts: Vec<f64> = vec![-s, s];
        for i in 1..SUBPANELS {
            cuts.push(-s + 2.0 * s * i as f64 / SUBPANELS as f64);
        }
        for b in
            std::iter::once(0.0).chain(self.base.breakpoints().into_iter().flat_map(|b| [b, -b]))
        {
            let tau = r - b;
            if tau.abs() < s {
                cuts.push(tau);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * s);
        let gl = gl32();
        let (mut f, mut f1, mut f2) = (0.0, 0.0, 0.0);
        for w in cuts.windows(2) {
            for (tau, wt) in gl.mapped(w[0], w[1]) {
                let (k, dk) = kernel(s, tau);
                let (b0, b1, _) = self.base.warp_jet(r - tau);
                f += wt * b0 * k;
                f1 += wt * b1 * k;
                f2 += wt * b1 * dk;
            }
        }
        (f, f1, f2)
    }

    pub(crate) fn warp_jet(&self, r: f64) -> (f64, f64, f64) {
        if r < 0.0 {
            let (f, f1, f2) = self.warp_jet(-r);
            return (-f, f1, -f2);
        }
        let (f, f1, f2) = self.raw_jet(r);
        (self.scale * f, self.scale * f1, self.scale * f2)
    }
}

/// Sub-domain on which the defect of a smoothed metric is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    /// Chart radii `[r_min, r_max]` of a warped metric.
    Radial { r_min: f64, r_max: f64 },
    /// Coordinate box of a grid metric.
    Box { lo: [f64; 3], hi: [f64; 3] },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothedApproximation {
    pub base: Metric,
    pub sigma: f64,
    pub smoothed: Metric,
    /// `max(0, -inf R)` of the smoothed metric over the region.
    pub epsilon_defect: f64,
    pub min_curvature: f64,
    /// `sup |R_smoothed - R_base|` over the region when the base curvature is defined.
    pub curvature_deviation: Option<f64>,
    pub region: Region,
}

/// Number of radii at which curvature is sampled over a radial region.
const RADIAL_SAMPLES: usize = 4001;

pub fn mollify(m: &Metric, sigma: f64, region: Region) -> Result<SmoothedApproximation> {
    match (m, region) {
        (Metric::Warped(w), Region::Radial { r_min, r_max }) => {
            mollify_warped(w, sigma, r_min, r_max)
        }
        (Metric::Grid(g), Region::Box { lo, hi }) => mollify_grid(g, sigma, lo, hi),
        _ => Err(Error::Domain(
            "region type does not match the metric".into(),
        )),
    }
}

fn mollify_warped(
    w: &WarpedMetric,
    sigma: f64,
    r_min: f64,
    r_max: f64,
) -> Result<SmoothedApproximation> {
    if !(r_min > 0.0 && r_min < r_max) {
        return Err(Error::Domain(format!(
            "invalid radial region [{r_min}, {r_max}]"
        )));
    }
    if r_max > w.r_max - sigma {
        return Err(Error::Domain(format!(
            "region reaches r = {r_max}, inside the σ-collar of the boundary at {} (σ = {sigma})",
            w.r_max
        )));
    }
    let smoothed = WarpedMetric::new(
        WarpKind::Mollified(MollifiedWarp::new(w.kind.clone(), sigma)?),
        w.r_max - sigma,
    )?;
    let samples: Vec<f64> = (0..RADIAL_SAMPLES)
        .map(|i| r_min + (r_max - r_min) * i as f64 / (RADIAL_SAMPLES - 1) as f64)
        .collect();
    use rayon::prelude::*;
    let rows: Vec<(f64, Option<f64>)> = samples
        .par_iter()
        .map(|&r| {
            let rs = smoothed.scalar_curvature(r)?;
            Ok((rs, w.scalar_curvature(r).ok()))
        })
        .collect::<Result<_>>()?;
    let min_curvature = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let deviation = if rows.iter().all(|r| r.1.is_some()) {
        Some(
            rows.iter()
                .map(|(s, b)| (s - b.unwrap()).abs())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    Ok(SmoothedApproximation {
        base: Metric::Warped(w.clone()),
        sigma,
        smoothed: Metric::Warped(smoothed),
        epsilon_defect: (-min_curvature).max(0.0),
        min_curvature,
        curvature_deviation: deviation,
        region: Region::Radial { r_min, r_max },
    })
}

fn mollify_grid(
    g: &GridMetric,
    sigma: f64,
    lo: [f64; 3],
    hi: [f64; 3],
) -> Result<SmoothedApproximation> {
    let lat = g.lattice();
    let h = lat.h;
    if sigma < h {
        return Err(Error::Domain(format!(
            "σ = {sigma} is below the lattice spacing {h}"
        )));
    }
    for d in 0..3 {
        let (a, b) = (lat.origin[d], lat.origin[d] + h * (lat.dims[d] - 1) as f64);
        // The curvature stencil needs two further nodes beyond the σ-collar.
        if lo[d] < a + sigma + 2.0 * h || hi[d] > b - sigma - 2.0 * h || lo[d] >= hi[d] {
            return Err(Error::Domain(format!(
                "region [{}, {}] in axis {d} is too close to the box boundary [{a}, {b}] for σ = {sigma}",
                lo[d], hi[d]
            )));
        }
    }
    // Discrete unit-mass kernel weights, applied separably along each axis.
    let half = (sigma / h).floor() as isize;
    let mut weights: Vec<f64> = (-half..=half)
        .map(|k| kernel(sigma, k as f64 * h).0)
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut field: Vec<[f64; 6]> = g.values().iter().map(|s| s.0).collect();
    for axis in 0..3 {
        field = convolve_axis(&field, lat.dims, axis, &weights, half);
    }
    let smoothed = GridMetric::new(lat.clone(), field.into_iter().map(Sym3).collect())?;
    let rs = grid_scalar_curvature(&smoothed)?;
    let rb = grid_scalar_curvature(g)?;
    let mut min_curvature = f64::INFINITY;
    let mut deviation: f64 = 0.0;
    for (idx, p) in lat.iter_points() {
        if (0..3).all(|d| p[d] >= lo[d] && p[d] <= hi[d]) {
            if let Some(r) = rs[idx] {
                min_curvature = min_curvature.min(r);
                if let Some(b) = rb[idx] {
                    deviation = deviation.max((r - b).abs());
                }
            }
        }
    }
    if !min_curvature.is_finite() {
        return Err(Error::Domain("region contains no lattice node".into()));
    }
    Ok(SmoothedApproximation {
        base: Metric::Grid(g.clone()),
        sigma,
        smoothed: Metric::Grid(smoothed),
        epsilon_defect: (-min_curvature).max(0.0),
        min_curvature,
        curvature_deviation: Some(deviation),
        region: Region::Box { lo, hi },
    })
}

fn convolve_axis(
    field: &[[f64; 6]],
    dims: [usize; 3],
    axis: usize,
    w: &[f64],
    half: isize,
) -> Vec<[f64; 6]> {
    use rayon::prelude::*;
    let stride = [1, dims[0], dims[0] * dims[1]][axis];
    let n = dims[axis] as isize;
    (0..field.len())
        .into_par_iter()
        .map(|idx| {
            let coord = [
                idx % dims[0],
                (idx / dims[0]) % dims[1],
                idx / (dims[0] * dims[1]),
            ][axis] as isize;
            let mut acc = [0.0; 6];
            let mut wsum = 0.0;
            for (k, wk) in (-half..=half).zip(w) {
                let c = coord + k;
                if c < 0 || c >= n {
                    continue;
                }
                let j = (idx as isize + k * stride as isize) as usize;
                for (a, v) in acc.iter_mut().zip(field[j].iter()) {
                    *a += wk * v;
                }
                wsum += wk;
            }
            // Near the box boundary the truncated kernel is renormalised.
            acc.iter_mut().for_each(|a| *a /= wsum);
            acc
        })
        .collect()
}

/// Parameters of the perturbed C⁰ family: member `j` has a space-form core of
/// scalar curvature `-2^{-j}` glued at `r_kink` to a cone of reduced slope.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PerturbedFamily {
    pub r_kink: f64,
    pub slope: f64,
    pub r_max: f64,
    pub sigma0: f64,
}

impl Default for PerturbedFamily {
    fn default() -> Self {
        Self {
            r_kink: 1.0,
            slope: 0.8,
            r_max: 4.0,
            sigma0: 0.2,
        }
    }
}

impl PerturbedFamily {
    pub fn base(&self, j: u32) -> Result<WarpedMetric> {
        let eps = 0.5f64.powi(j as i32);
        WarpedMetric::new(
            WarpKind::Kinked {
                core_a: eps / 6.0,
                r_kink: self.r_kink,
                slope: self.slope,
            },
            self.r_max,
        )
    }

    pub fn sigma(&self, j: u32) -> f64 {
        self.sigma0 * 0.5f64.powf(j as f64 / 2.0)
    }

    /// Member `j`, mollified at scale `σ_j` with the defect measured on
    /// `[r_min, r_max - σ_j]`.
    pub fn member(&self, j: u32, r_min: f64) -> Result<SmoothedApproximation> {
        let base = self.base(j)?;
        let s = self.sigma(j);
        mollify(
            &Metric::Warped(base),
            s,
            Region::Radial {
                r_min,
                r_max: self.r_max - s,
            },
        )
    }

    pub fn members(
        &self,
        js: impl IntoIterator<Item = u32>,
        r_min: f64,
    ) -> Result<Vec<SmoothedApproximation>> {
        js.into_iter()
            .enumerate()
            .map(|(i, j)| {
                self.member(j, r_min).map_err(|e| Error::Member {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_has_unit_mass_and_zero_mean_derivative() {
        let s = 0.1;
        let mut m = 0.0;
        let mut d = 0.0;
        let mut d1 = 0.0;
        for i in 0..SUBPANELS {
            let a = -s + 2.0 * s * i as f64 / SUBPANELS as f64;
            for (t, w) in gl32().mapped(a, a + 2.0 * s / SUBPANELS as f64) {
                let (k, dk) = kernel(s, t);
                m += w * k;
                d += w * dk;
                d1 += w * t * dk;
            }
        }
        assert!((m - 1.0).abs() < 1e-12, "{m}");
        assert!(d.abs() < 1e-10);
        // ∫ τ φ'(τ) = -∫ φ = -1
        assert!((d1 + 1.0).abs() < 1e-11);
    }

    #[test]
    fn euclidean_is_fixed_by_averaging() {
        let e = Metric::Warped(WarpedMetric::euclidean(3.0));
        let s = mollify(
            &e,
            0.1,
            Region::Radial {
                r_min: 0.05,
                r_max: 2.5,
            },
        )
        .unwrap();
        assert!(s.epsilon_defect < 1e-9);
        if let Metric::Warped(w) = &s.smoothed {
            assert!((w.warp(1.3) - 1.3).abs() < 1e-13);
        }
    }

    #[test]
    fn space_form_defect_is_quadrature_level() {
        let h = Metric::Warped(WarpedMetric::space_form(1.0, 3.0).unwrap());
        let s = mollify(
            &h,
            0.05,
            Region::Radial {
                r_min: 0.05,
                r_max: 2.5,
            },
        )
        .unwrap();
        let dev = s.curvature_deviation.unwrap();
        assert!(dev <= 0.1, "deviation {dev}");
        assert!((s.epsilon_defect - 6.0).abs() <= 0.1);
    }

    #[test]
    fn defect_grows_as_scale_shrinks_for_convex_kink() {
        let base = Metric::Warped(
            WarpedMetric::new(
                WarpKind::AbsPerturbed {
                    amplitude: 0.05,
                    center: 1.0,
                },
                2.5,
            )
            .unwrap(),
        );
        let region = Region::Radial {
            r_min: 0.3,
            r_max: 1.7,
        };
        let d: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&s| mollify(&base, s, region).unwrap().epsilon_defect)
            .collect();
        assert!(d.iter().all(|x| x.is_finite()));
        assert!(d[0] <= d[1] && d[1] <= d[2], "{d:?}");
    }

    #[test]
    fn collar_is_enforced() {
        let e = Metric::Warped(WarpedMetric::euclidean(3.0));
        assert!(mollify(
            &e,
            0.2,
            Region::Radial {
                r_min: 0.1,
                r_max: 2.9
            }
        )
        .is_err());
    }

    #[test]
    fn perturbed_family_defect_tracks_core_curvature() {
        let fam = PerturbedFamily::default();
        for j in [1u32, 4, 8] {
            let m = fam.member(j, 0.05).unwrap();
            let eps = 0.5f64.powi(j as i32);
            assert!(
                (m.epsilon_defect - eps).abs() < 0.05 * eps,
                "j={j}: {} vs {eps}",
                m.epsilon_defect
            );
        }
    }
}
