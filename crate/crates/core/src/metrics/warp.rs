//! Rotationally symmetric metrics `a(r)² dr² + f(r)² g_{S²}` on a radial chart.
//!
//! For every kind except the isotropic Schwarzschild chart the radial factor
//! is `a ≡ 1`, so `r` is the arclength from the pole and the metric is the
//! warped product `ds² + f(s)² g_{S²}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::grid::{GridMetric, Lattice, Sym3};
use super::mollify::MollifiedWarp;
use crate::error::{Error, Result};
use crate::numeric::{integrate_adaptive, UniformCubicSpline};

/// Values and first two chart derivatives of the warp and of the radial factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialJet {
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    pub a: f64,
    pub a1: f64,
}

impl RadialJet {
    /// Derivative of the warp with respect to arclength.
    pub fn f_s(&self) -> f64 {
        self.f1 / self.a
    }

    pub fn f_ss(&self) -> f64 {
        (self.f2 * self.a - self.f1 * self.a1) / (self.a * self.a * self.a)
    }

    pub fn scalar_curvature(&self) -> f64 {
        let fs = self.f_s();
        -4.0 * self.f_ss() / self.f + 2.0 * (1.0 - fs * fs) / (self.f * self.f)
    }
}

/// How the chart ends at `r = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InnerEnd {
    /// `f(0) = 0`: the chart closes up at a point `o`.
    Pole,
    /// The chart has a minimal sphere at `r`; volumes are measured from it.
    Horizon { r: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WarpKind {
    Euclidean,
    /// `f = sinh(√a r)/√a`, constant sectional curvature `-a`.
    SpaceForm {
        a: f64,
    },
    /// `f = sin(√k r)/√k`, constant sectional curvature `k`.
    Sphere {
        k: f64,
    },
    /// Isotropic chart `u⁴(dr² + r² g_{S²})`, `u = 1 + m/(2r)`.
    Schwarzschild {
        m: f64,
    },
    /// A space-form core of curvature `-core_a` up to `r_kink`, continued
    /// linearly with slope `slope · f'(r_kink)`. Only continuous at the kink.
    Kinked {
        core_a: f64,
        r_kink: f64,
        slope: f64,
    },
    /// `f = r (1 + amplitude |r - center|)`.
    AbsPerturbed {
        amplitude: f64,
        center: f64,
    },
    Sampled(SampledWarp),
    Mollified(MollifiedWarp),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WarpedMetric {
    pub kind: WarpKind,
    pub r_max: f64,
}

fn sinh_over(a: f64, r: f64) -> (f64, f64, f64) {
    if a == 0.0 {
        return (r, 1.0, 0.0);
    }
    let q = a.sqrt();
    let (s, c) = ((q * r).sinh(), (q * r).cosh());
    (s / q, c, q * s)
}

fn sin_over(k: f64, r: f64) -> (f64, f64, f64) {
    let q = k.sqrt();
    let (s, c) = ((q * r).sin(), (q * r).cos());
    (s / q, c, -q * s)
}

impl WarpKind {
    /// Warp and derivatives on the chart; `r` may be negative, in which case
    /// the odd extension `f(-r) = -f(r)` of the warp is used.
    pub(crate) fn warp_jet(&self, r: f64) -> (f64, f64, f64) {
        if r < 0.0 {
            let (f, f1, f2) = self.warp_jet(-r);
            return (-f, f1, -f2);
        }
        match self {
            WarpKind::Euclidean => (r, 1.0, 0.0),
            WarpKind::SpaceForm { a } => sinh_over(*a, r),
            WarpKind::Sphere { k } => sin_over(*k, r),
            WarpKind::Schwarzschild { m } => {
                // f = r u², u = 1 + m/(2r)  =>  f = r + m + m²/(4r)
                let f = r + m + m * m / (4.0 * r);
                let f1 = 1.0 - m * m / (4.0 * r * r);
                let f2 = m * m / (2.0 * r * r * r);
                (f, f1, f2)
            }
            WarpKind::Kinked {
                core_a,
                r_kink,
                slope,
            } => {
                if r <= *r_kink {
                    sinh_over(*core_a, r)
                } else {
                    let (fk, dk, _) = sinh_over(*core_a, *r_kink);
                    (fk + slope * dk * (r - r_kink), slope * dk, 0.0)
                }
            }
            WarpKind::AbsPerturbed { amplitude, center } => {
                let d = r - center;
                let sg = if d >= 0.0 { 1.0 } else { -1.0 };
                let f = r * (1.0 + amplitude * d.abs());
                let f1 = 1.0 + amplitude * d.abs() + amplitude * sg * r;
                let f2 = 2.0 * amplitude * sg;
                (f, f1, f2)
            }
            WarpKind::Sampled(s) => s.spline_jet(r),
            WarpKind::Mollified(m) => m.warp_jet(r),
        }
    }

    /// Radial factor `a` and its derivative.
    pub(crate) fn radial_factor(&self, r: f64) -> (f64, f64) {
        match self {
            WarpKind::Schwarzschild { m } => {
                let u = 1.0 + m / (2.0 * r);
                let du = -m / (2.0 * r * r);
                (u * u, 2.0 * u * du)
            }
            _ => (1.0, 0.0),
        }
    }

    /// Chart radii where the warp is only continuous.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        match self {
            WarpKind::Kinked { r_kink, .. } => vec![*r_kink],
            WarpKind::AbsPerturbed { center, .. } => vec![*center],
            WarpKind::Mollified(_) => Vec::new(),
            _ => Vec::new(),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            WarpKind::Euclidean => "euclidean",
            WarpKind::SpaceForm { .. } => "space_form",
            WarpKind::Sphere { .. } => "sphere",
            WarpKind::Schwarzschild { .. } => "schwarzschild",
            WarpKind::Kinked { .. } => "kinked",
            WarpKind::AbsPerturbed { .. } => "abs_perturbed",
            WarpKind::Sampled(_) => "sampled",
            WarpKind::Mollified(_) => "mollified",
        }
    }
}

impl WarpedMetric {
    pub fn new(kind: WarpKind, r_max: f64) -> Result<Self> {
        let m = Self { kind, r_max };
        m.validate()?;
        Ok(m)
    }

    pub fn euclidean(r_max: f64) -> Self {
        Self {
            kind: WarpKind::Euclidean,
            r_max,
        }
    }

    pub fn space_form(a: f64, r_max: f64) -> Result<Self> {
        Self::new(WarpKind::SpaceForm { a }, r_max)
    }

    pub fn sphere(k: f64, r_max: f64) -> Result<Self> {
        Self::new(WarpKind::Sphere { k }, r_max)
    }

    pub fn schwarzschild(m: f64, r_max: f64) -> Result<Self> {
        Self::new(WarpKind::Schwarzschild { m }, r_max)
    }

    pub fn label(&self) -> &'static str {
        self.kind.label()
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidMetric(msg));
        if !(self.r_max.is_finite() && self.r_max > 0.0) {
            return bad(format!("r_max must be positive, got {}", self.r_max));
        }
        match &self.kind {
            WarpKind::Euclidean => {}
            WarpKind::SpaceForm { a } => {
                if !(*a > 0.0) {
                    return bad(format!("space_form requires a > 0, got {a}"));
                }
            }
            WarpKind::Sphere { k } => {
                if !(*k > 0.0) {
                    return bad(format!("sphere requires k > 0, got {k}"));
                }
                if self.r_max >= PI / k.sqrt() {
                    return bad(format!(
                        "sphere warp vanishes at r = π/√k = {}; r_max = {} is too large",
                        PI / k.sqrt(),
                        self.r_max
                    ));
                }
            }
            WarpKind::Schwarzschild { m } => {
                if !(*m > 0.0) {
                    return bad(format!("schwarzschild requires m > 0, got {m}"));
                }
            }
            WarpKind::Kinked {
                core_a,
                r_kink,
                slope,
            } => {
                if !(*core_a >= 0.0 && *r_kink > 0.0 && *slope > 0.0) {
                    return bad("kinked warp needs core_a >= 0, r_kink > 0, slope > 0".into());
                }
            }
            WarpKind::AbsPerturbed { amplitude, center } => {
                if !(amplitude.is_finite() && center.is_finite()) {
                    return bad("abs_perturbed parameters must be finite".into());
                }
            }
            WarpKind::Sampled(s) => {
                if s.r_max() + 1e-12 < self.r_max {
                    return bad(format!(
                        "sampled warp covers [0, {}] but r_max = {}",
                        s.r_max(),
                        self.r_max
                    ));
                }
            }
            WarpKind::Mollified(_) => {}
        }
        // f > 0 on (0, r_max] (checked on a fine sample) and f(0) = 0 for poles.
        if self.inner_end() == InnerEnd::Pole {
            let f0 = self.kind.warp_jet(0.0).0;
            if f0.abs() > 1e-10 {
                return bad(format!("warp must vanish at the pole, f(0) = {f0}"));
            }
        }
        for i in 1..=512 {
            let r = self.r_max * i as f64 / 512.0;
            let f = self.kind.warp_jet(r).0;
            if !(f > 0.0) || !f.is_finite() {
                return bad(format!("warp is not positive at r = {r} (f = {f})"));
            }
        }
        Ok(())
    }

    pub fn inner_end(&self) -> InnerEnd {
        match self.kind {
            WarpKind::Schwarzschild { m } => InnerEnd::Horizon { r: m / 2.0 },
            _ => InnerEnd::Pole,
        }
    }

    /// Smallest chart radius at which sublevel geometry is evaluated.
    pub fn r_inner(&self) -> f64 {
        match self.inner_end() {
            InnerEnd::Pole => 0.0,
            InnerEnd::Horizon { r } => r,
        }
    }

    pub fn has_pole(&self) -> bool {
        self.inner_end() == InnerEnd::Pole
    }

    fn check_domain(&self, r: f64) -> Result<()> {
        if !(r > 0.0 && r <= self.r_max * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "r = {r} outside (0, {}] for the {} metric",
                self.r_max,
                self.label()
            )));
        }
        Ok(())
    }

    pub fn jet(&self, r: f64) -> RadialJet {
        let (f, f1, f2) = self.kind.warp_jet(r);
        let (a, a1) = self.kind.radial_factor(r);
        RadialJet { f, f1, f2, a, a1 }
    }

    pub fn warp(&self, r: f64) -> f64 {
        self.kind.warp_jet(r).0
    }

    /// `4π f(r)²`, the area of the centered sphere.
    pub fn sphere_area(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        Ok(self.area_unchecked(r))
    }

    pub(crate) fn area_unchecked(&self, r: f64) -> f64 {
        let f = self.warp(r);
        4.0 * PI * f * f
    }

    /// Distance from the inner end along a radial geodesic.
    pub fn arclength(&self, r: f64) -> Result<f64> {
        let r0 = self.r_inner();
        match self.kind {
            WarpKind::Schwarzschild { m } => {
                // ∫ (1 + m/2ρ)² dρ in closed form.
                let prim = |x: f64| x + m * x.ln() - m * m / (4.0 * x);
                Ok(prim(r) - prim(r0))
            }
            _ => Ok(r - r0),
        }
    }

    /// Volume of the region between two centered spheres.
    pub fn shell_volume(&self, r0: f64, r1: f64) -> Result<f64> {
        if r1 <= r0 {
            return Ok(0.0);
        }
        let mut pts = vec![r0];
        pts.extend(
            self.kind
                .breakpoints()
                .into_iter()
                .filter(|&b| b > r0 && b < r1),
        );
        pts.push(r1);
        let mut v = 0.0;
        for w in pts.windows(2) {
            v += integrate_adaptive(
                |t| {
                    let (f, _, _) = self.kind.warp_jet(t);
                    let (a, _) = self.kind.radial_factor(t);
                    4.0 * PI * f * f * a
                },
                w[0],
                w[1],
                1e-13,
                0.0,
            )?;
        }
        Ok(v)
    }

    /// `∫₀ʳ 4π f² ds`, the volume of the centered geodesic ball.
    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        if !self.has_pole() {
            return Err(Error::Domain(format!(
                "the {} chart has no pole; use enclosed_volume",
                self.label()
            )));
        }
        self.shell_volume(0.0, r)
    }

    /// Volume enclosed by the centered sphere of radius `r`, measured from
    /// the pole or from the horizon.
    pub fn enclosed_volume(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        self.shell_volume(self.r_inner(), r)
    }

    /// Scalar curvature of the metric at chart radius `r`.
    pub fn scalar_curvature(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Err(Error::Domain(
                "scalar curvature is not evaluated at the pole".into(),
            ));
        }
        self.check_domain(r)?;
        for b in self.kind.breakpoints() {
            if (r - b).abs() < 1e-9 * (1.0 + b.abs()) {
                return Err(Error::CurvatureDefect {
                    r,
                    reason: format!("warp is only continuous at r = {b}"),
                });
            }
        }
        if let WarpKind::Sampled(s) = &self.kind {
            return s.scalar_curvature_fd(r);
        }
        Ok(self.jet(r).scalar_curvature())
    }

    /// Hawking mass of the centered sphere, `f (1 - f_s²) / 2`.
    pub fn centered_hawking_mass(&self, r: f64) -> f64 {
        let j = self.jet(r);
        let fs = j.f_s();
        0.5 * j.f * (1.0 - fs * fs)
    }

    /// Samples the metric in Cartesian chart coordinates centred at the pole.
    pub fn to_grid(&self, lattice: Lattice) -> Result<GridMetric> {
        let up = lattice.upper();
        let reach = (0..3)
            .map(|d| lattice.origin[d].abs().max(up[d].abs()).powi(2))
            .sum::<f64>()
            .sqrt();
        if reach > self.r_max {
            return Err(Error::Domain(format!(
                "lattice corners reach chart radius {reach}, beyond r_max = {}",
                self.r_max
            )));
        }
        if let InnerEnd::Horizon { .. } = self.inner_end() {
            // The isotropic chart is regular away from r = 0; the lattice must avoid it.
            if lattice
                .iter_points()
                .any(|(_, x)| x.iter().map(|c| c * c).sum::<f64>() < 1e-20)
            {
                return Err(Error::Domain(
                    "a lattice node sits at the chart singularity".into(),
                ));
            }
        }
        GridMetric::new(
            lattice.clone(),
            lattice
                .iter_points()
                .map(|(_, x)| Sym3(self.cartesian_metric(x)))
                .collect(),
        )
    }

    /// Cartesian components of the metric at a point of the chart ball.
    pub fn cartesian_metric(&self, x: [f64; 3]) -> [f64; 6] {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let j = self.jet(r.max(1e-300));
        let (radial, tangential) = if r < 1e-12 {
            (j.a * j.a, j.f1 * j.f1)
        } else {
            (j.a * j.a, (j.f / r) * (j.f / r))
        };
        let n = if r < 1e-12 {
            [0.0; 3]
        } else {
            [x[0] / r, x[1] / r, x[2] / r]
        };
        let d = radial - tangential;
        [
            tangential + d * n[0] * n[0],
            tangential + d * n[1] * n[1],
            tangential + d * n[2] * n[2],
            d * n[0] * n[1],
            d * n[0] * n[2],
            d * n[1] * n[2],
        ]
    }
}

/// A warp given by uniform samples `f(k h)`, `k = 0..N`, interpolated by a
/// natural cubic spline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SampledWarpSpec", into = "SampledWarpSpec")]
pub struct SampledWarp {
    spec: SampledWarpSpec,
    spline: UniformCubicSpline,
}

impl PartialEq for SampledWarp {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SampledWarpSpec {
    pub h: f64,
    pub values: Vec<f64>,
    /// Declared bound on `|f_{k+1} - f_k|`.
    pub modulus: f64,
}

impl From<SampledWarp> for SampledWarpSpec {
    fn from(s: SampledWarp) -> Self {
        s.spec
    }
}

impl TryFrom<SampledWarpSpec> for SampledWarp {
    type Error = Error;

    fn try_from(spec: SampledWarpSpec) -> Result<Self> {
        SampledWarp::new(spec.h, spec.values, spec.modulus)
    }
}

impl SampledWarp {
    pub fn new(h: f64, values: Vec<f64>, modulus: f64) -> Result<Self> {
        if !(h > 0.0) || values.len() < 4 {
            return Err(Error::InvalidMetric(
                "sampled warp needs h > 0 and at least 4 samples".into(),
            ));
        }
        if values[0].abs() > 1e-12 {
            return Err(Error::InvalidMetric(format!(
                "sampled warp must vanish at r = 0, got {}",
                values[0]
            )));
        }
        for (k, v) in values.iter().enumerate().skip(1) {
            if !(*v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidMetric(format!(
                    "non-positive warp sample {v} at index {k}"
                )));
            }
        }
        for (k, w) in values.windows(2).enumerate() {
            if (w[1] - w[0]).abs() > modulus {
                return Err(Error::InvalidMetric(format!(
                    "sampled warp jumps by {} between samples {k} and {} (declared modulus {modulus})",
                    (w[1] - w[0]).abs(),
                    k + 1
                )));
            }
        }
        // Odd reflection about the pole gives the spline the right end behaviour.
        let mut ext: Vec<f64> = values.iter().skip(1).take(3).rev().map(|v| -v).collect();
        ext.extend_from_slice(&values);
        let spline = UniformCubicSpline::natural(-3.0 * h, h, ext);
        Ok(Self {
            spec: SampledWarpSpec { h, values, modulus },
            spline,
        })
    }

    pub fn h(&self) -> f64 {
        self.spec.h
    }

    pub fn values(&self) -> &[f64] {
        &self.spec.values
    }

    pub fn r_max(&self) -> f64 {
        self.spec.h * (self.spec.values.len() - 1) as f64
    }

    fn spline_jet(&self, r: f64) -> (f64, f64, f64) {
        self.spline.jet(r)
    }

    fn value(&self, r: f64) -> f64 {
        if r < 0.0 {
            -self.spline.jet(-r).0
        } else {
            self.spline.jet(r).0
        }
    }

    /// Central finite differences with stencil `h_f = h`; kinks are reported
    /// as curvature defects.
    pub fn scalar_curvature_fd(&self, r: f64) -> Result<f64> {
        let hf = self.spec.h;
        let f = self.value(r);
        let fp = self.value(r + hf);
        let fm = self.value(r - hf);
        let d2 = fp - 2.0 * f + fm;
        let d2_wide = self.value(r + 2.0 * hf) - 2.0 * f + self.value(r - 2.0 * hf);
        // A slope jump J gives |d2| ≈ J h and d2_wide ≈ 2 d2; smooth data scales by 4.
        if d2.abs() / hf > 1e-2 && (d2_wide / d2) < 3.0 {
            return Err(Error::CurvatureDefect {
                r,
                reason: format!(
                    "slope jump of about {:.3e} in the sampled warp",
                    d2.abs() / hf
                ),
            });
        }
        let f1 = (fp - fm) / (2.0 * hf);
        let f2 = d2 / (hf * hf);
        Ok(-4.0 * f2 / f + 2.0 * (1.0 - f1 * f1) / (f * f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Second-order central difference oracle, independent of the closed-form jets.
    fn fd_curvature(f: impl Fn(f64) -> f64, r: f64) -> f64 {
        let h = 1e-4;
        let f0 = f(r);
        let f1 = (f(r + h) - f(r - h)) / (2.0 * h);
        let f2 = (f(r + h) - 2.0 * f0 + f(r - h)) / (h * h);
        -4.0 * f2 / f0 + 2.0 * (1.0 - f1 * f1) / (f0 * f0)
    }

    #[test]
    fn build_warped_examples() {
        assert_eq!(WarpedMetric::euclidean(5.0).warp(2.0), 2.0);
        let sf = WarpedMetric::space_form(1.0, 3.0).unwrap();
        assert!((sf.warp(1.0) - 1.175_201_193_643_801_4).abs() < 1e-14);
        let s = WarpedMetric::schwarzschild(1.0, 10.0).unwrap();
        assert!((s.warp(2.0) - 3.125).abs() < 1e-14);
    }

    #[test]
    fn build_rejects_invalid_parameters() {
        assert!(WarpedMetric::space_form(-1.0, 1.0).is_err());
        assert!(WarpedMetric::schwarzschild(0.0, 1.0).is_err());
        assert!(WarpedMetric::sphere(1.0, 3.5).is_err());
        assert!(SampledWarp::new(0.1, vec![0.0, 0.1, -0.2, 0.3], 1.0).is_err());
        assert!(SampledWarp::new(0.1, vec![0.0, 0.1, 0.2, 0.9], 0.2).is_err());
    }

    #[test]
    fn sphere_area_examples() {
        let e = WarpedMetric::euclidean(5.0);
        assert!((e.sphere_area(1.0).unwrap() - 12.566_370_614_359_172).abs() < 1e-12);
        let sf = WarpedMetric::space_form(1.0, 3.0).unwrap();
        let sinh1 = 1f64.sinh();
        assert!((sf.sphere_area(1.0).unwrap() - 4.0 * PI * sinh1 * sinh1).abs() < 1e-12);
        assert!((sf.sphere_area(1.0).unwrap() - 17.35539).abs() < 1e-5);
        let s = WarpedMetric::schwarzschild(1.0, 10.0).unwrap();
        assert!((s.sphere_area(2.0).unwrap() - 122.718).abs() < 1e-3);
        assert!(e.sphere_area(6.0).is_err());
        assert!(e.sphere_area(0.0).is_err());
    }

    #[test]
    fn ball_volume_examples() {
        let e = WarpedMetric::euclidean(5.0);
        assert!((e.ball_volume(1.0).unwrap() - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((e.ball_volume(2.0).unwrap() - 32.0 * PI / 3.0).abs() < 1e-11);
        let sf = WarpedMetric::space_form(1.0, 3.0).unwrap();
        let exact = PI * (2f64.sinh() - 2.0);
        assert!(((sf.ball_volume(1.0).unwrap() - exact) / exact).abs() < 1e-10);
        assert!((exact - 5.110_93).abs() < 1e-5);
        let s = WarpedMetric::schwarzschild(1.0, 10.0).unwrap();
        assert!(s.ball_volume(1.0).is_err());
        assert!(s.enclosed_volume(0.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn scalar_curvature_examples() {
        let e = WarpedMetric::euclidean(5.0);
        assert_eq!(e.scalar_curvature(0.3).unwrap(), 0.0);
        let sph = WarpedMetric::sphere(1.0, 3.0).unwrap();
        let r = sph.scalar_curvature(0.7).unwrap();
        assert!((r - fd_curvature(f64::sin, 0.7)).abs() < 1e-5);
        assert!((r - 6.0).abs() < 1e-12);
        let sf = WarpedMetric::space_form(1.0, 3.0).unwrap();
        let r = sf.scalar_curvature(0.9).unwrap();
        assert!((r - fd_curvature(f64::sinh, 0.9)).abs() < 1e-5);
        assert!((r + 6.0).abs() < 1e-12);
        assert!(e.scalar_curvature(0.0).is_err());
        // Schwarzschild is scalar flat in the isotropic chart.
        let s = WarpedMetric::schwarzschild(1.0, 10.0).unwrap();
        for r in [0.2, 0.5, 1.0, 3.0] {
            assert!(s.scalar_curvature(r).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn kink_is_a_curvature_defect() {
        let k = WarpedMetric::new(
            WarpKind::Kinked {
                core_a: 0.0,
                r_kink: 1.0,
                slope: 0.8,
            },
            3.0,
        )
        .unwrap();
        assert!(matches!(
            k.scalar_curvature(1.0),
            Err(Error::CurvatureDefect { .. })
        ));
        assert!(k.scalar_curvature(1.5).unwrap() > 0.0);
        let h = 1e-3;
        let vals: Vec<f64> = (0..=3000).map(|i| k.warp(i as f64 * h)).collect();
        let sw = SampledWarp::new(h, vals, 1.0).unwrap();
        assert!(matches!(
            sw.scalar_curvature_fd(1.0),
            Err(Error::CurvatureDefect { .. })
        ));
        assert!(sw.scalar_curvature_fd(0.5).unwrap().abs() < 1e-6);
    }

    #[test]
    fn sampled_sine_has_curvature_six() {
        let h = 1e-3;
        let vals: Vec<f64> = (0..=2000).map(|i| (i as f64 * h).sin()).collect();
        let sw = SampledWarp::new(h, vals, 1.0).unwrap();
        let m = WarpedMetric::new(WarpKind::Sampled(sw), 2.0).unwrap();
        assert!((m.scalar_curvature(0.7).unwrap() - 6.0).abs() < 1e-4);
    }

    #[test]
    fn smooth_pole_and_monotone_volume() {
        for m in [
            WarpedMetric::euclidean(3.0),
            WarpedMetric::space_form(1.0, 3.0).unwrap(),
            WarpedMetric::sphere(1.0, 2.0).unwrap(),
        ] {
            let s = 1e-4;
            let ratio = m.sphere_area(s).unwrap() / (s * s);
            assert!((ratio - 4.0 * PI).abs() < 1e-6);
            let mut last = 0.0;
            for i in 1..20 {
                let v = m.ball_volume(0.1 * i as f64).unwrap();
                assert!(v > last);
                last = v;
            }
        }
    }

    #[test]
    fn cartesian_metric_of_warp_matches_radial_lengths() {
        let m = WarpedMetric::space_form(1.0, 3.0).unwrap();
        let x = [0.3, -0.4, 1.2];
        let g = m.cartesian_metric(x);
        let r = (0.09f64 + 0.16 + 1.44).sqrt();
        let n = [x[0] / r, x[1] / r, x[2] / r];
        let q = |v: [f64; 3]| {
            g[0] * v[0] * v[0]
                + g[1] * v[1] * v[1]
                + g[2] * v[2] * v[2]
                + 2.0 * (g[3] * v[0] * v[1] + g[4] * v[0] * v[2] + g[5] * v[1] * v[2])
        };
        assert!((q(n) - 1.0).abs() < 1e-12);
        let t = [0.8, 0.6, 0.0];
        let t_dot_n = t[0] * n[0] + t[1] * n[1];
        let tt = [
            t[0] - t_dot_n * n[0],
            t[1] - t_dot_n * n[1],
            -t_dot_n * n[2],
        ];
        let len2 = tt[0] * tt[0] + tt[1] * tt[1] + tt[2] * tt[2];
        let expect = (m.warp(r) / r).powi(2) * len2;
        assert!((q(tt) - expect).abs() < 1e-12);
    }
}
