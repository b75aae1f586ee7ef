//! Metrics sampled on a uniform lattice over one coordinate box.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric 3×3 matrix stored as `[xx, yy, zz, xy, xz, yz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym3(pub [f64; 6]);

impl Sym3 {
    pub const IDENTITY: Sym3 = Sym3([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);

    pub fn scaled(self, c: f64) -> Self {
        Sym3(self.0.map(|v| v * c))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        const MAP: [[usize; 3]; 3] = [[0, 3, 4], [3, 1, 5], [4, 5, 2]];
        self.0[MAP[i][j]]
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        m
    }

    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Self {
        Sym3([m[0][0], m[1][1], m[2][2], m[0][1], m[0][2], m[1][2]])
    }

    pub fn quad(&self, v: [f64; 3]) -> f64 {
        let s = &self.0;
        s[0] * v[0] * v[0]
            + s[1] * v[1] * v[1]
            + s[2] * v[2] * v[2]
            + 2.0 * (s[3] * v[0] * v[1] + s[4] * v[0] * v[2] + s[5] * v[1] * v[2])
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let s = &self.0;
        [
            s[0] * v[0] + s[3] * v[1] + s[4] * v[2],
            s[3] * v[0] + s[1] * v[1] + s[5] * v[2],
            s[4] * v[0] + s[5] * v[1] + s[2] * v[2],
        ]
    }

    pub fn det(&self) -> f64 {
        let [a, b, c, d, e, f] = self.0;
        a * (b * c - f * f) - d * (d * c - f * e) + e * (d * f - b * e)
    }

    pub fn inverse(&self) -> Option<Sym3> {
        let [a, b, c, d, e, f] = self.0;
        let det = self.det();
        if det.abs() < 1e-300 {
            return None;
        }
        let inv = 1.0 / det;
        Some(Sym3([
            (b * c - f * f) * inv,
            (a * c - e * e) * inv,
            (a * b - d * d) * inv,
            (e * f - d * c) * inv,
            (d * f - b * e) * inv,
            (d * e - a * f) * inv,
        ]))
    }

    pub fn add(&self, o: &Sym3) -> Sym3 {
        let mut r = self.0;
        for (a, b) in r.iter_mut().zip(o.0.iter()) {
            *a += b;
        }
        Sym3(r)
    }

    /// Eigenvalues in increasing order (closed-form trigonometric solution).
    pub fn eigenvalues(&self) -> [f64; 3] {
        let [a, b, c, d, e, f] = self.0;
        let p1 = d * d + e * e + f * f;
        if p1 <= 1e-30 * (a * a + b * b + c * c).max(1e-300) {
            let mut ev = [a, b, c];
            ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
            return ev;
        }
        let q = (a + b + c) / 3.0;
        let p2 = (a - q).powi(2) + (b - q).powi(2) + (c - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let bm = Sym3([(a - q) / p, (b - q) / p, (c - q) / p, d / p, e / p, f / p]);
        let r = (bm.det() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        [e3, e2, e1]
    }

    /// Lower Cholesky factor, if positive definite.
    pub fn cholesky(&self) -> Option<[[f64; 3]; 3]> {
        let m = self.to_matrix();
        let mut l = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..=i {
                let mut s = m[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if s <= 0.0 {
                        return None;
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        Some(l)
    }

    /// Extremal values of `self(v,v) / other(v,v)` over `v ≠ 0`.
    pub fn relative_bounds(&self, other: &Sym3) -> Option<(f64, f64)> {
        let l = other.cholesky()?;
        // M = L⁻¹ A L⁻ᵀ
        let a = self.to_matrix();
        let linv = lower_inverse(&l);
        let mut t = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                t[i][j] = (0..3).map(|k| linv[i][k] * a[k][j]).sum();
            }
        }
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| t[i][k] * linv[j][k]).sum();
            }
        }
        let ev = Sym3::from_matrix(&m).eigenvalues();
        Some((ev[0], ev[2]))
    }
}

fn lower_inverse(l: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        inv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let s: f64 = (j..i).map(|k| l[i][k] * inv[k][j]).sum();
            inv[i][j] = -s / l[i][i];
        }
    }
    inv
}

/// Uniform lattice `origin + h·(i, j, k)`, `0 ≤ i < dims[0]`, x fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub origin: [f64; 3],
    pub h: f64,
    pub dims: [usize; 3],
}

impl Lattice {
    pub fn new(origin: [f64; 3], h: f64, dims: [usize; 3]) -> Result<Self> {
        if !(h > 0.0) || dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidMetric(
                "lattice needs h > 0 and at least 2 nodes per axis".into(),
            ));
        }
        Ok(Self { origin, h, dims })
    }

    /// `n³` nodes symmetric about the coordinate origin.
    pub fn centered(n: usize, h: f64) -> Result<Self> {
        let o = -0.5 * h * (n as f64 - 1.0);
        Self::new([o; 3], h, [n; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    #[inline]
    pub fn point_at(&self, c: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + self.h * c[0] as f64,
            self.origin[1] + self.h * c[1] as f64,
            self.origin[2] + self.h * c[2] as f64,
        ]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        self.point_at(self.coords(idx))
    }

    pub fn upper(&self) -> [f64; 3] {
        [0, 1, 2].map(|d| self.origin[d] + self.h * (self.dims[d] - 1) as f64)
    }

    pub fn iter_points(&self) -> impl Iterator<Item = (usize, [f64; 3])> + '_ {
        (0..self.len()).map(move |i| (i, self.point(i)))
    }

    /// Node nearest to a coordinate point.
    pub fn nearest_node(&self, x: [f64; 3]) -> Option<usize> {
        let mut c = [0usize; 3];
        for d in 0..3 {
            let t = ((x[d] - self.origin[d]) / self.h).round();
            if t < 0.0 || t >= self.dims[d] as f64 {
                return None;
            }
            c[d] = t as usize;
        }
        Some(self.index(c[0], c[1], c[2]))
    }
}

/// A symmetric positive-definite metric field sampled at lattice nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridMetric {
    lattice: Lattice,
    g: Vec<Sym3>,
    lambda: f64,
    big_lambda: f64,
}

impl GridMetric {
    pub fn new(lattice: Lattice, g: Vec<Sym3>) -> Result<Self> {
        if g.len() != lattice.len() {
            return Err(Error::InvalidMetric(format!(
                "metric field has {} entries, lattice has {} nodes",
                g.len(),
                lattice.len()
            )));
        }
        let bounds: Vec<(f64, f64)> = g
            .par_iter()
            .map(|s| {
                let ev = s.eigenvalues();
                (ev[0], ev[2])
            })
            .collect();
        let mut lambda = f64::INFINITY;
        let mut big_lambda: f64 = 0.0;
        for (idx, (lo, hi)) in bounds.into_iter().enumerate() {
            if !(lo > 0.0) || !hi.is_finite() || g[idx].cholesky().is_none() {
                return Err(Error::InvalidMetric(format!(
                    "metric is not positive definite at node {:?}",
                    lattice.coords(idx)
                )));
            }
            lambda = lambda.min(lo);
            big_lambda = big_lambda.max(hi);
        }
        Ok(Self {
            lattice,
            g,
            lambda,
            big_lambda,
        })
    }

    pub fn flat(lattice: Lattice) -> Self {
        let n = lattice.len();
        Self {
            lattice,
            g: vec![Sym3::IDENTITY; n],
            lambda: 1.0,
            big_lambda: 1.0,
        }
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn([f64; 3]) -> [f64; 6] + Sync) -> Result<Self> {
        let g = (0..lattice.len())
            .into_par_iter()
            .map(|i| Sym3(f(lattice.point(i))))
            .collect();
        Self::new(lattice, g)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[Sym3] {
        &self.g
    }

    #[inline]
    pub fn at(&self, idx: usize) -> &Sym3 {
        &self.g[idx]
    }

    /// Uniform ellipticity bounds `(λ, Λ)` relative to the flat chart metric.
    pub fn ellipticity(&self) -> (f64, f64) {
        (self.lambda, self.big_lambda)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.lattice.clone(),
            self.g.iter().map(|s| s.scaled(c)).collect(),
        )
    }

    pub fn is_flat(&self) -> bool {
        self.g.iter().all(|s| *s == Sym3::IDENTITY)
    }

    /// Smallest `ε` with `|g(v,v) - other(v,v)| ≤ ε other(v,v)` at every node.
    pub fn closeness(&self, other: &GridMetric) -> Result<f64> {
        if self.lattice != other.lattice {
            return Err(Error::Domain("metrics live on different lattices".into()));
        }
        Ok(self
            .g
            .par_iter()
            .zip(other.g.par_iter())
            .map(|(a, b)| {
                let (lo, hi) = a.relative_bounds(b).unwrap_or((f64::NAN, f64::NAN));
                (1.0 - lo).abs().max((hi - 1.0).abs())
            })
            .reduce(|| 0.0, f64::max))
    }

    /// Trilinear interpolation of the metric at a coordinate point inside the box.
    pub fn interpolate(&self, x: [f64; 3]) -> Sym3 {
        let lat = &self.lattice;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for d in 0..3 {
            let t = ((x[d] - lat.origin[d]) / lat.h).clamp(0.0, (lat.dims[d] - 1) as f64);
            let i = (t.floor() as usize).min(lat.dims[d] - 2);
            base[d] = i;
            frac[d] = t - i as f64;
        }
        let mut acc = [0.0; 6];
        for corner in 0..8 {
            let o = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
            let w: f64 = (0..3)
                .map(|d| if o[d] == 1 { frac[d] } else { 1.0 - frac[d] })
                .product();
            if w == 0.0 {
                continue;
            }
            let s = &self.g[lat.index(base[0] + o[0], base[1] + o[1], base[2] + o[2])];
            for (a, v) in acc.iter_mut().zip(s.0.iter()) {
                *a += w * v;
            }
        }
        Sym3(acc)
    }
}

/// Scalar curvature at every node with a full two-node finite-difference
/// stencil; `None` on the boundary layers.
pub fn grid_scalar_curvature(m: &GridMetric) -> Result<Vec<Option<f64>>> {
    let lat = m.lattice();
    let [nx, ny, nz] = lat.dims;
    if nx < 5 || ny < 5 || nz < 5 {
        return Err(Error::Domain(
            "curvature stencil needs at least 5 nodes per axis".into(),
        ));
    }
    let h = lat.h;
    let stride = [1, nx, nx * ny];
    let inside = |c: [usize; 3], margin: usize| {
        (0..3).all(|d| c[d] >= margin && c[d] + margin < lat.dims[d])
    };
    // Christoffel symbols Γ^k_ij at nodes one layer in.
    let gamma: Vec<Option<[[[f64; 3]; 3]; 3]>> = (0..lat.len())
        .into_par_iter()
        .map(|idx| {
            let c = lat.coords(idx);
            if !inside(c, 1) {
                return None;
            }
            let mut dg = [[[0.0; 3]; 3]; 3]; // dg[l][i][j] = ∂_l g_ij
            for (l, dgl) in dg.iter_mut().enumerate() {
                let p = m.at(idx + stride[l]);
                let q = m.at(idx - stride[l]);
                for i in 0..3 {
                    for j in 0..3 {
                        dgl[i][j] = (p.get(i, j) - q.get(i, j)) / (2.0 * h);
                    }
                }
            }
            let ginv = m.at(idx).inverse()?;
            let mut gm = [[[0.0; 3]; 3]; 3];
            for (k, gk) in gm.iter_mut().enumerate() {
                for i in 0..3 {
                    for j in 0..3 {
                        gk[i][j] = 0.5
                            * (0..3)
                                .map(|l| ginv.get(k, l) * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]))
                                .sum::<f64>();
                    }
                }
            }
            Some(gm)
        })
        .collect();
    let out = (0..lat.len())
        .into_par_iter()
        .map(|idx| {
            let c = lat.coords(idx);
            if !inside(c, 2) {
                return None;
            }
            let g0 = gamma[idx]?;
            let ginv = m.at(idx).inverse()?;
            // ∂_l Γ^k_ij
            let mut dgam = [[[[0.0; 3]; 3]; 3]; 3];
            for (l, dl) in dgam.iter_mut().enumerate() {
                let p = gamma[idx + stride[l]]?;
                let q = gamma[idx - stride[l]]?;
                for k in 0..3 {
                    for i in 0..3 {
                        for j in 0..3 {
                            dl[k][i][j] = (p[k][i][j] - q[k][i][j]) / (2.0 * h);
                        }
                    }
                }
            }
            // Ric_ij = ∂_k Γ^k_ij − ∂_j Γ^k_ik + Γ^k_kl Γ^l_ij − Γ^k_jl Γ^l_ik
            let mut r = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let mut ric = 0.0;
                    for k in 0..3 {
                        ric += dgam[k][k][i][j] - dgam[j][k][i][k];
                        for l in 0..3 {
                            ric += g0[k][k][l] * g0[l][i][j] - g0[k][j][l] * g0[l][i][k];
                        }
                    }
                    r += ginv.get(i, j) * ric;
                }
            }
            Some(r)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym3_eigen_and_inverse() {
        let s = Sym3([4.0, 3.0, 2.0, 0.5, 0.1, -0.3]);
        let ev = s.eigenvalues();
        let tr: f64 = ev.iter().sum();
        assert!((tr - 9.0).abs() < 1e-12);
        assert!((ev.iter().product::<f64>() - s.det()).abs() < 1e-10);
        let inv = s.inverse().unwrap();
        let v = [0.3, -1.0, 2.0];
        let back = inv.mul_vec(s.mul_vec(v));
        for d in 0..3 {
            assert!((back[d] - v[d]).abs() < 1e-12);
        }
        let (lo, hi) = s.scaled(1.21).relative_bounds(&s).unwrap();
        assert!((lo - 1.21).abs() < 1e-12 && (hi - 1.21).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_field() {
        let lat = Lattice::centered(4, 0.1).unwrap();
        let mut g = vec![Sym3::IDENTITY; lat.len()];
        g[5] = Sym3([1.0, 1.0, -1.0, 0.0, 0.0, 0.0]);
        assert!(GridMetric::new(lat, g).is_err());
    }

    #[test]
    fn conformal_metric_curvature_matches_closed_form() {
        // g = e^{2φ} δ with φ = 0.1 (x² + 2y² − z²)/2; R = −e^{−2φ}(4Δφ + 2|∇φ|²).
        let lat = Lattice::centered(33, 0.05).unwrap();
        let phi = |x: [f64; 3]| 0.05 * (x[0] * x[0] + 2.0 * x[1] * x[1] - x[2] * x[2]);
        let m = GridMetric::from_fn(lat.clone(), |x| {
            let e = (2.0 * phi(x)).exp();
            [e, e, e, 0.0, 0.0, 0.0]
        })
        .unwrap();
        let r = grid_scalar_curvature(&m).unwrap();
        let mut worst: f64 = 0.0;
        for (idx, x) in lat.iter_points() {
            if let Some(v) = r[idx] {
                let grad = [0.1 * x[0], 0.2 * x[1], -0.1 * x[2]];
                let lap = 0.1 + 0.2 - 0.1;
                let g2: f64 = grad.iter().map(|g| g * g).sum();
                let exact = -(-2.0 * phi(x)).exp() * (4.0 * lap + 2.0 * g2);
                worst = worst.max((v - exact).abs());
            }
        }
        assert!(worst < 2e-3, "worst {worst}");
    }

    #[test]
    fn stereographic_sphere_has_curvature_six() {
        // Unit round sphere: g = 4/(1+|x|²)² δ.
        // Second-order differences: the error drops by about 4 when h halves.
        let worst = |n: usize, h: f64| {
            let lat = Lattice::centered(n, h).unwrap();
            let m = GridMetric::from_fn(lat.clone(), |x| {
                let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                let c = 4.0 / (1.0 + r2).powi(2);
                [c, c, c, 0.0, 0.0, 0.0]
            })
            .unwrap();
            let r = grid_scalar_curvature(&m).unwrap();
            r.into_iter()
                .flatten()
                .map(|v| (v - 6.0).abs())
                .fold(0.0, f64::max)
        };
        let (a, b) = (worst(24, 0.05), worst(48, 0.025));
        assert!(a < 7e-2 && b < a / 3.5, "{a} {b}");
    }

    #[test]
    fn closeness_of_scaled_metric() {
        let lat = Lattice::centered(6, 0.1).unwrap();
        let a = GridMetric::flat(lat.clone());
        let b = a.scaled(1.1).unwrap();
        assert!((b.closeness(&a).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(b.ellipticity(), (1.1, 1.1));
    }
}
