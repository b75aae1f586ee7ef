//! Sublevel sets of lattice fields: marching tetrahedra over the Kuhn split
//! of each cell, with metric volume, area and surface integrals.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::grid::{GridMetric, Lattice, Sym3};

/// The six tetrahedra of the Kuhn split, as corner bitmasks (x = bit 0).
pub(crate) const KUHN_TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Offsets of the 14 Kuhn-edge neighbours of a node.
pub(crate) const KUHN_NEIGHBOURS: [[i32; 3]; 14] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
    [-1, 0, 0],
    [0, -1, 0],
    [0, 0, -1],
    [-1, -1, 0],
    [-1, 0, -1],
    [0, -1, -1],
    [-1, -1, -1],
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelMeasure {
    pub volume: f64,
    pub area: f64,
    /// `∫ |∇w|²` over the level surface (when a gradient is supplied).
    pub h2: f64,
    /// `∫ 1/|∇w|` over the level surface.
    pub inv_grad: f64,
    /// `∫ |∇w|` over the level surface.
    pub grad: f64,
    pub triangles: usize,
    pub sublevel_components: usize,
    pub surface_components: usize,
}

#[inline]
fn corner_offset(bit: usize) -> [usize; 3] {
    [bit & 1, (bit >> 1) & 1, (bit >> 2) & 1]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn tet_volume(p: [[f64; 3]; 4]) -> f64 {
    dot(sub(p[1], p[0]), cross(sub(p[2], p[0]), sub(p[3], p[0]))).abs() / 6.0
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + t * (b[0] - a[0]),
        a[1] + t * (b[1] - a[1]),
        a[2] + t * (b[2] - a[2]),
    ]
}

/// Data of one lattice tetrahedron in local coordinates (units of `h`).
struct Tet {
    pos: [[f64; 3]; 4],
    val: [f64; 4],
    node: [usize; 4],
}

/// Barycentric coordinates of `x` in the tetrahedron `pos`.
fn barycentric(pos: &[[f64; 3]; 4], x: [f64; 3]) -> [f64; 4] {
    let mut out = [0.0; 4];
    let signed = |i: usize| {
        let mut q = *pos;
        q[i] = x;
        dot(sub(q[1], q[0]), cross(sub(q[2], q[0]), sub(q[3], q[0])))
    };
    let full = dot(
        sub(pos[1], pos[0]),
        cross(sub(pos[2], pos[0]), sub(pos[3], pos[0])),
    );
    for (i, o) in out.iter_mut().enumerate() {
        *o = signed(i) / full;
    }
    out
}

struct Accum {
    volume: f64,
    area: f64,
    h2: f64,
    inv_grad: f64,
    grad: f64,
    triangles: Vec<[(usize, usize); 3]>,
}

impl Accum {
    fn new() -> Self {
        Self {
            volume: 0.0,
            area: 0.0,
            h2: 0.0,
            inv_grad: 0.0,
            grad: 0.0,
            triangles: Vec::new(),
        }
    }

    fn merge(mut self, o: Accum) -> Self {
        self.volume += o.volume;
        self.area += o.area;
        self.h2 += o.h2;
        self.inv_grad += o.inv_grad;
        self.grad += o.grad;
        self.triangles.extend(o.triangles);
        self
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Sublevel `{field < level}` measures. Tetrahedra touching `NaN` samples
/// are left out, so a `NaN` mask restricts every measure to a region.
/// `gradient` supplies chart-coordinate gradients of the field at nodes; when
/// absent the piecewise-linear gradient of each tetrahedron is used.
pub fn level_measure(
    m: &GridMetric,
    field: &[f64],
    level: f64,
    gradient: Option<&[[f64; 3]]>,
) -> Result<LevelMeasure> {
    let lat = m.lattice();
    if field.len() != lat.len() || gradient.is_some_and(|g| g.len() != lat.len()) {
        return Err(Error::Domain("field does not match the lattice".into()));
    }
    let h = lat.h;
    let [nx, ny, nz] = lat.dims;
    let sqrt_det: Vec<f64> = m.values().iter().map(|s| s.det().sqrt()).collect();
    let acc = (0..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut acc = Accum::new();
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let mut cnode = [0usize; 8];
                    let mut cval = [0.0; 8];
                    let mut any_in = false;
                    let mut any_out = false;
                    for (b, (cn, cv)) in cnode.iter_mut().zip(cval.iter_mut()).enumerate() {
                        let o = corner_offset(b);
                        *cn = lat.index(i + o[0], j + o[1], k + o[2]);
                        let v = field[*cn];
                        *cv = v - level;
                        if *cv < 0.0 {
                            any_in = true;
                        } else {
                            any_out = true;
                        }
                    }
                    if !any_in {
                        continue;
                    }
                    for tet in KUHN_TETS {
                        let t = Tet {
                            pos: tet.map(|b| corner_offset(b).map(|c| c as f64)),
                            val: tet.map(|b| cval[b]),
                            node: tet.map(|b| cnode[b]),
                        };
                        if t.val.iter().any(|v| v.is_nan()) {
                            continue;
                        }
                        if !any_out {
                            // Whole tetrahedron inside: exact integral of linear √det g.
                            let rho: f64 = t.node.iter().map(|&n| sqrt_det[n]).sum::<f64>() / 4.0;
                            acc.volume += rho * h * h * h / 6.0;
                            continue;
                        }
                        process_tet(m, &sqrt_det, gradient, h, &t, &mut acc);
                    }
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Accum::new(), Accum::merge);
    let surface_components = count_surface_components(&acc.triangles);
    let sublevel_components = count_sublevel_components(lat, field, level);
    Ok(LevelMeasure {
        volume: acc.volume,
        area: acc.area,
        h2: acc.h2,
        inv_grad: acc.inv_grad,
        grad: acc.grad,
        triangles: acc.triangles.len(),
        sublevel_components,
        surface_components,
    })
}

fn metric_at(m: &GridMetric, t: &Tet, bary: [f64; 4]) -> Sym3 {
    let mut acc = [0.0; 6];
    for (w, &n) in bary.iter().zip(&t.node) {
        for (a, v) in acc.iter_mut().zip(m.at(n).0.iter()) {
            *a += w * v;
        }
    }
    Sym3(acc)
}

fn process_tet(
    m: &GridMetric,
    sqrt_det: &[f64],
    gradient: Option<&[[f64; 3]]>,
    h: f64,
    t: &Tet,
    acc: &mut Accum,
) {
    let inside: Vec<usize> = (0..4).filter(|&i| t.val[i] < 0.0).collect();
    let outside: Vec<usize> = (0..4).filter(|&i| t.val[i] >= 0.0).collect();
    if inside.is_empty() {
        return;
    }
    let rho_at = |x: [f64; 3]| -> f64 {
        let b = barycentric(&t.pos, x);
        b.iter().zip(&t.node).map(|(w, &n)| w * sqrt_det[n]).sum()
    };
    let piece = |p: [[f64; 3]; 4]| -> f64 {
        let c = [0, 1, 2].map(|d| 0.25 * (p[0][d] + p[1][d] + p[2][d] + p[3][d]));
        tet_volume(p) * rho_at(c)
    };
    let cross_pt = |a: usize, b: usize| -> [f64; 3] {
        let s = t.val[a] / (t.val[a] - t.val[b]);
        lerp(t.pos[a], t.pos[b], s)
    };
    let h3 = h * h * h;
    // Volume of the inside part, and the level polygon as edge crossings.
    let poly: Vec<(usize, usize)> = match inside.len() {
        4 => {
            acc.volume += piece(t.pos) * h3;
            return;
        }
        1 => {
            let a = inside[0];
            let q: Vec<[f64; 3]> = outside.iter().map(|&b| cross_pt(a, b)).collect();
            acc.volume += piece([t.pos[a], q[0], q[1], q[2]]) * h3;
            outside.iter().map(|&b| (a, b)).collect()
        }
        3 => {
            let b = outside[0];
            let q: Vec<[f64; 3]> = inside.iter().map(|&a| cross_pt(a, b)).collect();
            acc.volume += (piece(t.pos) - piece([t.pos[b], q[0], q[1], q[2]])) * h3;
            inside.iter().map(|&a| (a, b)).collect()
        }
        _ => {
            let (a0, a1) = (inside[0], inside[1]);
            let (b0, b1) = (outside[0], outside[1]);
            let pa = [t.pos[a0], cross_pt(a0, b0), cross_pt(a0, b1)];
            let pb = [t.pos[a1], cross_pt(a1, b0), cross_pt(a1, b1)];
            acc.volume += (piece([pa[0], pa[1], pa[2], pb[0]])
                + piece([pa[1], pa[2], pb[0], pb[1]])
                + piece([pa[2], pb[0], pb[1], pb[2]]))
                * h3;
            // Quad a0b0 – a0b1 – a1b1 – a1b0 in cyclic order.
            vec![(a0, b0), (a0, b1), (a1, b1), (a1, b0)]
        }
    };
    // Piecewise-linear gradient (chart coordinates, per unit length).
    let pl_grad = || -> [f64; 3] {
        let e1 = sub(t.pos[1], t.pos[0]);
        let e2 = sub(t.pos[2], t.pos[0]);
        let e3 = sub(t.pos[3], t.pos[0]);
        let d = [
            t.val[1] - t.val[0],
            t.val[2] - t.val[0],
            t.val[3] - t.val[0],
        ];
        let det = dot(e1, cross(e2, e3));
        let c23 = cross(e2, e3);
        let c31 = cross(e3, e1);
        let c12 = cross(e1, e2);
        [0, 1, 2].map(|k| (d[0] * c23[k] + d[1] * c31[k] + d[2] * c12[k]) / (det * h))
    };
    let tris: Vec<[usize; 3]> = if poly.len() == 3 {
        vec![[0, 1, 2]]
    } else {
        vec![[0, 1, 2], [0, 2, 3]]
    };
    let pts: Vec<[f64; 3]> = poly.iter().map(|&(a, b)| cross_pt(a, b)).collect();
    let pl = if gradient.is_none() {
        Some(pl_grad())
    } else {
        None
    };
    for tri in tris {
        let (p0, p1, p2) = (pts[tri[0]], pts[tri[1]], pts[tri[2]]);
        let c = [0, 1, 2].map(|d| (p0[d] + p1[d] + p2[d]) / 3.0);
        let bary = barycentric(&t.pos, c);
        let g = metric_at(m, t, bary);
        let e1 = sub(p1, p0).map(|v| v * h);
        let e2 = sub(p2, p0).map(|v| v * h);
        let g11 = g.quad(e1);
        let g22 = g.quad(e2);
        let g12 = dot(g.mul_vec(e1), e2);
        let area = 0.5 * (g11 * g22 - g12 * g12).max(0.0).sqrt();
        acc.area += area;
        let grad = match (gradient, pl) {
            (Some(gr), _) => {
                let mut v = [0.0; 3];
                for (w, &n) in bary.iter().zip(&t.node) {
                    for d in 0..3 {
                        v[d] += w * gr[n][d];
                    }
                }
                v
            }
            (None, Some(v)) => v,
            _ => unreachable!(),
        };
        let gn2 = g.inverse().map(|gi| gi.quad(grad)).unwrap_or(f64::NAN);
        acc.h2 += area * gn2;
        acc.grad += area * gn2.sqrt();
        if gn2 > 0.0 {
            acc.inv_grad += area / gn2.sqrt();
        }
        acc.triangles
            .push(tri.map(|q| edge_key(t.node[poly[q].0], t.node[poly[q].1])));
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn count_surface_components(tris: &[[(usize, usize); 3]]) -> usize {
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut parent: Vec<usize> = Vec::new();
    for tri in tris {
        let v: Vec<usize> = tri
            .iter()
            .map(|e| {
                let n = ids.len();
                *ids.entry(*e).or_insert_with(|| {
                    parent.push(n);
                    n
                })
            })
            .collect();
        for w in &v[1..] {
            let (a, b) = (find(&mut parent, v[0]), find(&mut parent, *w));
            if a != b {
                parent[a] = b;
            }
        }
    }
    (0..parent.len())
        .filter(|&i| find(&mut parent, i) == i)
        .count()
}

/// Connected components of `{field < level}` under Kuhn-edge adjacency.
pub fn count_sublevel_components(lat: &Lattice, field: &[f64], level: f64) -> usize {
    let inside = |i: usize| field[i] < level; // NaN compares false
    let mut seen = vec![false; lat.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..lat.len() {
        if seen[start] || !inside(start) {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(u) = stack.pop() {
            let c = lat.coords(u);
            for off in KUHN_NEIGHBOURS {
                let n = [0, 1, 2].map(|d| c[d] as i64 + off[d] as i64);
                if (0..3).any(|d| n[d] < 0 || n[d] >= lat.dims[d] as i64) {
                    continue;
                }
                let v = lat.index(n[0] as usize, n[1] as usize, n[2] as usize);
                if !seen[v] && inside(v) {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    count
}

/// Central-difference chart gradient at every node (one-sided on the boundary;
/// non-finite neighbours fall back to the other side).
pub fn nodal_gradient(lat: &Lattice, field: &[f64]) -> Vec<[f64; 3]> {
    let stride = [1, lat.dims[0], lat.dims[0] * lat.dims[1]];
    (0..lat.len())
        .into_par_iter()
        .map(|idx| {
            let c = lat.coords(idx);
            let mut g = [0.0; 3];
            for d in 0..3 {
                let f0 = field[idx];
                let fp = (c[d] + 1 < lat.dims[d])
                    .then(|| field[idx + stride[d]])
                    .filter(|v| v.is_finite());
                let fm = (c[d] > 0)
                    .then(|| field[idx - stride[d]])
                    .filter(|v| v.is_finite());
                g[d] = match (fp, fm) {
                    (Some(p), Some(m)) => (p - m) / (2.0 * lat.h),
                    (Some(p), None) => (p - f0) / lat.h,
                    (None, Some(m)) => (f0 - m) / lat.h,
                    (None, None) => f64::NAN,
                };
            }
            g
        })
        .collect()
}

/// `∫ |∇f|_g dvol` with the piecewise-linear gradient of each tetrahedron and
/// the metric at its centroid. Tetrahedra touching `NaN` samples are skipped.
pub fn total_variation(m: &GridMetric, field: &[f64]) -> f64 {
    let lat = m.lattice();
    let h = lat.h;
    let [nx, ny, nz] = lat.dims;
    (0..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut s = 0.0;
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    for tet in KUHN_TETS {
                        let node = tet.map(|b| {
                            let o = corner_offset(b);
                            lat.index(i + o[0], j + o[1], k + o[2])
                        });
                        let val = node.map(|n| field[n]);
                        if val.iter().any(|v| v.is_nan()) {
                            continue;
                        }
                        let pos = tet.map(|b| corner_offset(b).map(|c| c as f64));
                        let e = [
                            sub(pos[1], pos[0]),
                            sub(pos[2], pos[0]),
                            sub(pos[3], pos[0]),
                        ];
                        let d = [val[1] - val[0], val[2] - val[0], val[3] - val[0]];
                        let det = dot(e[0], cross(e[1], e[2]));
                        let (c23, c31, c12) =
                            (cross(e[1], e[2]), cross(e[2], e[0]), cross(e[0], e[1]));
                        let grad = [0, 1, 2]
                            .map(|q| (d[0] * c23[q] + d[1] * c31[q] + d[2] * c12[q]) / (det * h));
                        let g = {
                            let mut acc = [0.0; 6];
                            for &n in &node {
                                for (a, v) in acc.iter_mut().zip(m.at(n).0.iter()) {
                                    *a += 0.25 * v;
                                }
                            }
                            Sym3(acc)
                        };
                        let gi = g.inverse().expect("positive definite metric");
                        s += gi.quad(grad).sqrt() * g.det().sqrt() * h * h * h / 6.0;
                    }
                }
            }
            s
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn radius_field(lat: &Lattice) -> Vec<f64> {
        lat.iter_points()
            .map(|(_, x)| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())
            .collect()
    }

    #[test]
    fn kuhn_tets_fill_the_cube() {
        let total: f64 = KUHN_TETS
            .iter()
            .map(|t| tet_volume(t.map(|b| corner_offset(b).map(|c| c as f64))))
            .sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn linear_field_slab_is_exact() {
        let lat = Lattice::new([0.0; 3], 0.1, [11, 11, 11]).unwrap();
        let m = GridMetric::flat(lat.clone());
        let f: Vec<f64> = lat.iter_points().map(|(_, x)| x[0]).collect();
        let lm = level_measure(&m, &f, 0.437, None).unwrap();
        assert!((lm.volume - 0.437).abs() < 1e-12);
        assert!((lm.area - 1.0).abs() < 1e-12);
        assert!((lm.h2 - 1.0).abs() < 1e-12);
        assert_eq!((lm.sublevel_components, lm.surface_components), (1, 1));
    }

    #[test]
    fn sphere_measures_converge() {
        let lat = Lattice::centered(48, 0.05).unwrap();
        let m = GridMetric::flat(lat.clone());
        let f = radius_field(&lat);
        let r = 0.8;
        let lm = level_measure(&m, &f, r, None).unwrap();
        assert!((lm.volume / (4.0 * PI / 3.0 * r * r * r) - 1.0).abs() < 5e-3);
        assert!((lm.area / (4.0 * PI * r * r) - 1.0).abs() < 5e-3);
        assert_eq!((lm.sublevel_components, lm.surface_components), (1, 1));
    }

    #[test]
    fn two_balls_have_two_components() {
        let lat = Lattice::centered(40, 0.05).unwrap();
        let f: Vec<f64> = lat
            .iter_points()
            .map(|(_, x)| {
                let a = ((x[0] - 0.5).powi(2) + x[1] * x[1] + x[2] * x[2]).sqrt();
                let b = ((x[0] + 0.5).powi(2) + x[1] * x[1] + x[2] * x[2]).sqrt();
                a.min(b)
            })
            .collect();
        let lm = level_measure(&GridMetric::flat(lat), &f, 0.3, None).unwrap();
        assert_eq!((lm.sublevel_components, lm.surface_components), (2, 2));
    }

    #[test]
    fn scaled_metric_scales_measures() {
        let lat = Lattice::centered(20, 0.1).unwrap();
        let f = radius_field(&lat);
        let a = level_measure(&GridMetric::flat(lat.clone()), &f, 0.6, None).unwrap();
        let b = level_measure(&GridMetric::flat(lat).scaled(4.0).unwrap(), &f, 0.6, None).unwrap();
        assert!((b.volume / a.volume - 8.0).abs() < 1e-12);
        assert!((b.area / a.area - 4.0).abs() < 1e-12);
        assert!((b.h2 / a.h2 - 1.0).abs() < 1e-12);
    }
}
