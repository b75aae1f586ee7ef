//! Radial p-harmonic Green functions of warped metrics, evaluated in log space.
//!
//! With `q = 1/(p-1)`, `A = 4π f²` and `I(s) = ∫_s^R A^{-q} a dt`, the
//! normalised Green function is `G = c^q I` and `w = -(p-1) log G`. For `p`
//! near one `G` overflows any float, so only `log I` is ever stored.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::WarpedMetric;
use crate::numeric::{gl16, log_add_exp};

/// `log c_p` with `c_p = 4π ((3-p)/(p-1))^{p-1}`.
pub fn log_norm_constant(p: f64) -> f64 {
    (4.0 * PI).ln() + (p - 1.0) * ((3.0 - p) / (p - 1.0)).ln()
}

pub fn norm_constant(p: f64) -> f64 {
    log_norm_constant(p).exp()
}

/// Decay exponent `(3-p)/(p-1)` of the Green function at the pole.
pub fn green_exponent(p: f64) -> f64 {
    (3.0 - p) / (p - 1.0)
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if !(p > 1.0 && p < 3.0) {
        return Err(Error::Config(format!("p must lie in (1, 3), got {p}")));
    }
    Ok(())
}

/// Number of radial sample intervals.
const SAMPLES: usize = 600;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialField {
    pub metric: WarpedMetric,
    pub r_outer: f64,
    /// `None` for the exact `p → 1` limit.
    pub p: Option<f64>,
    /// Increasing sample radii; the last one is `r_outer`.
    pub radii: Vec<f64>,
    /// `log I(r_k)` (p-harmonic fields only; `-∞` at `r_outer`).
    pub log_integral: Vec<f64>,
    /// `min_{[r_k, R]} A` (limit fields only).
    pub running_min_area: Vec<f64>,
}

fn log_area(m: &WarpedMetric, r: f64) -> f64 {
    m.area_unchecked(r).ln()
}

/// `log ∫_a^b A^{-q} a dt`, with panels refined so that `q · log A` changes
/// by at most about two units across each Gauss–Legendre panel.
fn log_panel(m: &WarpedMetric, q: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return f64::NEG_INFINITY;
    }
    let la = log_area(m, a);
    let lb = log_area(m, b);
    let spread = q * (la - lb).abs();
    let pieces = ((spread / 2.0).ceil() as usize).clamp(1, 1 << 16);
    let gl = gl16();
    let mut acc = f64::NEG_INFINITY;
    // Geometric panels away from the pole, where log A varies like log t.
    let node = |i: usize| {
        let s = i as f64 / pieces as f64;
        if a > 0.0 {
            a * (b / a).powf(s)
        } else {
            a + (b - a) * s
        }
    };
    for i in 0..pieces {
        let (x0, x1) = (node(i), if i + 1 == pieces { b } else { node(i + 1) });
        // Reference exponent at the panel end nearest the pole (largest integrand for monotone A).
        let reference = -q * log_area(m, x0).min(log_area(m, x1));
        let mut s = 0.0;
        for (t, w) in gl.mapped(x0, x1) {
            let (fac, _) = m.kind_radial_factor(t);
            s += w * (-q * log_area(m, t) - reference).exp() * fac;
        }
        if s > 0.0 {
            acc = log_add_exp(acc, reference + s.ln());
        }
    }
    acc
}

fn sample_radii(m: &WarpedMetric, r_outer: f64) -> Vec<f64> {
    let lo = if m.has_pole() {
        1e-6 * r_outer
    } else {
        1e-3 * m.r_inner()
    };
    let ratio = (r_outer / lo).ln();
    let mut r: Vec<f64> = (0..=SAMPLES)
        .map(|i| lo * (ratio * i as f64 / SAMPLES as f64).exp())
        .collect();
    // Extra linear samples near the outer boundary, where w has a log singularity.
    let tail: Vec<f64> = (2..48).map(|i| r_outer * (1.0 - 0.5f64.powi(i))).collect();
    r.extend(tail);
    if !m.has_pole() {
        r.push(m.r_inner());
    }
    r.retain(|&x| x > 0.0 && x < r_outer);
    r.push(r_outer);
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    r.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs());
    r
}

impl WarpedMetric {
    pub(crate) fn kind_radial_factor(&self, r: f64) -> (f64, f64) {
        let j = self.jet(r);
        (j.a, j.a1)
    }
}

/// Normalised Green function of the centred ball `B_R` (`-Δ_p G = c_p δ_o`).
pub fn radial_green(m: &WarpedMetric, p: f64, r_outer: f64) -> Result<RadialField> {
    check_exponent(p)?;
    if !(r_outer > m.r_inner() && r_outer <= m.r_max * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!(
            "outer radius {r_outer} outside ({}, {}]",
            m.r_inner(),
            m.r_max
        )));
    }
    let q = 1.0 / (p - 1.0);
    let radii = sample_radii(m, r_outer);
    let n = radii.len();
    let mut log_integral = vec![f64::NEG_INFINITY; n];
    for k in (0..n - 1).rev() {
        let panel = log_panel(m, q, radii[k], radii[k + 1]);
        log_integral[k] = log_add_exp(log_integral[k + 1], panel);
        if !log_integral[k].is_finite() {
            return Err(Error::Quadrature(format!(
                "radial Green integral vanished at r = {}",
                radii[k]
            )));
        }
    }
    Ok(RadialField {
        metric: m.clone(),
        r_outer,
        p: Some(p),
        radii,
        log_integral,
        running_min_area: Vec::new(),
    })
}

/// The exact `p → 1` limit `w(r) = log(min_{[r,R]} A / 4π)`.
pub fn radial_limit(m: &WarpedMetric, r_outer: f64) -> Result<RadialField> {
    if !(r_outer > m.r_inner() && r_outer <= m.r_max * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!(
            "outer radius {r_outer} outside the chart"
        )));
    }
    let radii = sample_radii(m, r_outer);
    let n = radii.len();
    let mut run = vec![0.0; n];
    run[n - 1] = m.area_unchecked(radii[n - 1]);
    for k in (0..n - 1).rev() {
        let local = interval_min_area(m, radii[k], radii[k + 1]);
        run[k] = run[k + 1].min(local);
    }
    Ok(RadialField {
        metric: m.clone(),
        r_outer,
        p: None,
        radii,
        log_integral: Vec::new(),
        running_min_area: run,
    })
}

/// Minimum of `A` over `[a, b]`, with a golden-section search when the
/// endpoint slopes bracket an interior minimum.
fn interval_min_area(m: &WarpedMetric, a: f64, b: f64) -> f64 {
    let fa = m.area_unchecked(a);
    let fb = m.area_unchecked(b);
    let da = m.jet(a).f1;
    let db = m.jet(b).f1;
    let ends = fa.min(fb);
    if !(da < 0.0 && db > 0.0) {
        return ends;
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (m.area_unchecked(x1), m.area_unchecked(x2));
    for _ in 0..200 {
        if hi - lo < 1e-15 * hi {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = m.area_unchecked(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = m.area_unchecked(x2);
        }
    }
    ends.min(f1).min(f2)
}

impl RadialField {
    fn bracket(&self, r: f64) -> Result<usize> {
        if !(r > 0.0 && r <= self.r_outer * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "r = {r} outside (0, {}]",
                self.r_outer
            )));
        }
        let k = self.radii.partition_point(|&x| x <= r);
        Ok(k.min(self.radii.len() - 1))
    }

    /// `log I(r)`, exact up to quadrature.
    pub fn log_integral_at(&self, r: f64) -> Result<f64> {
        let p = self
            .p
            .ok_or_else(|| Error::Unsupported("the limit field has no Green function".into()))?;
        let q = 1.0 / (p - 1.0);
        if r >= self.r_outer {
            return Ok(f64::NEG_INFINITY);
        }
        let k = self.bracket(r)?;
        let panel = log_panel(&self.metric, q, r, self.radii[k]);
        Ok(log_add_exp(self.log_integral[k], panel))
    }

    pub fn log_green(&self, r: f64) -> Result<f64> {
        let p = self
            .p
            .ok_or_else(|| Error::Unsupported("the limit field has no Green function".into()))?;
        Ok(log_norm_constant(p) / (p - 1.0) + self.log_integral_at(r)?)
    }

    /// `G(r)`; may overflow to `+∞` for `p` close to one.
    pub fn green(&self, r: f64) -> Result<f64> {
        Ok(self.log_green(r)?.exp())
    }

    pub fn min_area(&self, r: f64) -> Result<f64> {
        let k = self.bracket(r)?;
        if r >= self.r_outer {
            return Ok(self.metric.area_unchecked(self.r_outer));
        }
        Ok(interval_min_area(&self.metric, r, self.radii[k]).min(self.running_min_area[k]))
    }

    /// `w(r)`: `-(p-1) log G`, or `log(min A / 4π)` for the limit.
    pub fn w(&self, r: f64) -> Result<f64> {
        match self.p {
            Some(p) => {
                let li = self.log_integral_at(r)?;
                Ok(-log_norm_constant(p) - (p - 1.0) * li)
            }
            None => Ok((self.min_area(r)? / (4.0 * PI)).ln()),
        }
    }

    /// Radial derivative `dw/dr` (chart coordinate).
    pub fn dw(&self, r: f64) -> Result<f64> {
        match self.p {
            Some(p) => {
                let q = 1.0 / (p - 1.0);
                let li = self.log_integral_at(r)?;
                let (a, _) = self.metric.kind_radial_factor(r);
                Ok((p - 1.0) * a * (-q * log_area(&self.metric, r) - li).exp())
            }
            None => {
                let area = self.metric.area_unchecked(r);
                let min = self.min_area(r)?;
                if area > min * (1.0 + 1e-13) {
                    Ok(0.0)
                } else {
                    let j = self.metric.jet(r);
                    Ok(2.0 * j.f1 / j.f)
                }
            }
        }
    }

    /// `|∇w|_g = w'(r) / a(r)`.
    pub fn grad_norm(&self, r: f64) -> Result<f64> {
        Ok(self.dw(r)? / self.metric.jet(r).a)
    }

    /// Radius at which `w = t`, for `t` in the range of `w` on the sampled radii.
    pub fn radius_of_level(&self, t: f64) -> Result<f64> {
        let lo_r = self.radii[0];
        let hi_r = self.r_outer;
        let w_lo = self.w(lo_r)?;
        if t <= w_lo {
            return Err(Error::EmptySublevel(t));
        }
        if self.p.is_none() {
            // The limit is 2 log f wherever it is not flat, so solve A(r) = 4π e^t directly.
            let target = 4.0 * PI * t.exp();
            if target > self.metric.area_unchecked(hi_r) * (1.0 + 1e-14) {
                return Err(Error::Domain(format!(
                    "level t = {t} lies beyond the outer sphere"
                )));
            }
            let k = self.running_min_area.partition_point(|&a| a < target);
            let a = if k == 0 { lo_r } else { self.radii[k - 1] };
            let b = self.radii[k.min(self.radii.len() - 1)];
            return crate::numeric::brent(|r| self.metric.area_unchecked(r) - target, a, b, 1e-15);
        }
        let k = self
            .radii
            .partition_point(|&r| self.w(r).map(|w| w < t).unwrap_or(false));
        if k >= self.radii.len() {
            return Err(Error::Domain(format!(
                "level t = {t} lies beyond the outer sphere"
            )));
        }
        let a = if k == 0 { lo_r } else { self.radii[k - 1] };
        let b = self.radii[k];
        crate::numeric::brent(|r| self.w(r).unwrap_or(f64::INFINITY) - t, a, b, 1e-15)
    }

    /// Largest `|G(s) s^α - 1|` over the three smallest samples.
    pub fn normalisation_defect(&self) -> Result<f64> {
        let p = self
            .p
            .ok_or_else(|| Error::Unsupported("no Green function in the limit".into()))?;
        let alpha = green_exponent(p);
        let mut worst: f64 = 0.0;
        for &r in self.radii.iter().take(3) {
            let v = (self.log_green(r)? + alpha * r.ln()).exp();
            worst = worst.max((v - 1.0).abs());
        }
        Ok(worst)
    }
}

/// `Cap_p(B_r, B_R) = I(r)^{1-p}` in a radial metric.
pub fn radial_ball_capacity(m: &WarpedMetric, p: f64, r: f64, r_outer: f64) -> Result<f64> {
    check_exponent(p)?;
    if !(r > 0.0 && r < r_outer) {
        return Err(Error::Domain(format!(
            "ball radius {r} must lie in (0, {r_outer})"
        )));
    }
    let q = 1.0 / (p - 1.0);
    let li = log_panel(m, q, r, r_outer);
    Ok(((1.0 - p) * li).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid_w(p: f64, s: f64, r: f64) -> f64 {
        // -(p-1) log(s^{-a} - R^{-a}), rearranged so that s^{-a} never overflows.
        let a = green_exponent(p);
        (p - 1.0) * a * s.ln() - (p - 1.0) * (-(s / r).powf(a)).ln_1p()
    }

    #[test]
    fn euclidean_green_closed_form() {
        let e = WarpedMetric::euclidean(10.0);
        let g = radial_green(&e, 1.5, 10.0).unwrap();
        assert!((g.green(1.0).unwrap() - 0.999).abs() < 1e-12);
        assert_eq!(g.green(10.0).unwrap(), 0.0);
        let s = 0.01;
        let v = g.green(s).unwrap() * s * s * s;
        assert!((v - (1.0 - 1e-9)).abs() < 1e-12);
        assert!(g.normalisation_defect().unwrap() < 1e-10);
    }

    #[test]
    fn euclidean_w_matches_closed_form_for_small_p() {
        let e = WarpedMetric::euclidean(10.0);
        for k in [1, 4, 10] {
            let p = 1.0 + 0.5f64.powi(k);
            let g = radial_green(&e, p, 10.0).unwrap();
            for s in [0.1, 0.37, 1.0, 5.0] {
                let exact = euclid_w(p, s, 10.0);
                assert!(
                    (g.w(s).unwrap() - exact).abs() < 1e-11 * (1.0 + exact.abs()),
                    "p={p} s={s}"
                );
            }
        }
    }

    #[test]
    fn gradient_product_near_pole() {
        let e = WarpedMetric::euclidean(10.0);
        let g = radial_green(&e, 1.5, 10.0).unwrap();
        for s in [1e-3, 0.01, 0.1, 0.5, 1.0] {
            let prod = g.dw(s).unwrap() * s;
            let exact = 1.5 / (1.0 - (s / 10.0f64).powi(3));
            assert!((prod - exact).abs() < 1e-10 * exact);
        }
    }

    #[test]
    fn ball_capacity_example() {
        let e = WarpedMetric::euclidean(10.0);
        let cap = radial_ball_capacity(&e, 1.5, 1.0, 10.0).unwrap();
        let exact = 0.999f64.powf(-0.5) * 3f64.sqrt() * 4.0 * PI;
        assert!((cap - exact).abs() < 1e-10 * exact);
        assert!((cap - 21.78).abs() < 0.01);
    }

    #[test]
    fn limit_of_schwarzschild_is_flat_inside_horizon() {
        let s = WarpedMetric::schwarzschild(1.0, 20.0).unwrap();
        let w = radial_limit(&s, 20.0).unwrap();
        let wh = w.w(0.5).unwrap();
        assert!((wh - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((w.w(0.2).unwrap() - wh).abs() < 1e-12);
        assert!((w.w(3.0).unwrap() - 2.0 * s.warp(3.0).ln()).abs() < 1e-12);
        let r = w.radius_of_level(3.0).unwrap();
        assert!((s.sphere_area(r).unwrap() - 4.0 * PI * 3f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_exponent() {
        let e = WarpedMetric::euclidean(10.0);
        assert!(radial_green(&e, 3.0, 10.0).is_err());
        assert!(radial_green(&e, 1.0, 10.0).is_err());
    }
}
