//! Lattice p-Laplacian solver for the normalised Green function.
//!
//! The p-Dirichlet energy of the capacitary potential of `B_ε(o)` in
//! `B_R(o)` is discretised by one-sided differences at the eight corners of
//! every cell touching a free node ("corner stencil"). Edges that cross the
//! Dirichlet spheres are shortened to the crossing point (Shortley–Weller),
//! and each cell's energy weight is its volume inside the annulus, so the
//! balls are resolved below lattice spacing. Balls are measured with the
//! metric frozen at the pole.
//!
//! The regularised energy `Σ w (dᵀ M d + μ²)^{p/2}` is minimised by a
//! preconditioned descent phase and a damped Newton–CG polish, with
//! continuation in `p` from the linear problem and in `μ` towards zero.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::field::SolverConfig;
use super::radial::{check_exponent, log_norm_constant};
use crate::error::{Error, Result};
use crate::metrics::grid::{GridMetric, Lattice, Sym3};

const NONE: u32 = u32::MAX;
const SUB: usize = 6;
const THETA_MIN: f64 = 1e-2;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Inner,
    Free,
    Outer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageHistory {
    pub p: f64,
    pub mu: f64,
    pub energies: Vec<f64>,
    pub newton_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub unknowns: usize,
    pub stages: Vec<StageHistory>,
    pub cg_iterations: usize,
    /// `‖∇E‖₂ / ‖∇E(u₀)‖₂` at the final stage.
    pub residual: f64,
    /// Last Newton decrement relative to the energy.
    pub decrement: f64,
    pub energy_monotone: bool,
    /// Free nodes strictly below all six neighbours (zero for a discrete
    /// maximum principle).
    pub local_minima: usize,
    pub converged: bool,
}

/// Capacitary potential and normalised Green function on a lattice.
#[derive(Debug, Clone, Serialize)]
pub struct LatticeField {
    #[serde(skip)]
    pub metric: GridMetric,
    pub pole: [f64; 3],
    pub r_outer: f64,
    pub eps_inner: f64,
    /// `None` for fields sampled from the `p → 1` limit.
    pub p: Option<f64>,
    #[serde(skip)]
    pub class: Vec<NodeClass>,
    /// Capacitary potential: 1 on `B_ε`, 0 outside `B_R`.
    #[serde(skip)]
    pub u: Vec<f64>,
    /// `w` at every node; `+∞` where the potential vanishes.
    #[serde(skip)]
    pub w: Vec<f64>,
    /// `Cap_p(B_ε, B_R)` of the discrete minimiser.
    pub capacity_inner: f64,
    /// `log t_ε`, the factor with `G = t_ε u`.
    pub log_scale: f64,
    pub diagnostics: Option<SolverDiagnostics>,
    #[serde(skip)]
    disc: Option<Arc<Discretisation>>,
}

/// Squared norm of `x - o` in the metric frozen at the pole.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PoleChart {
    pub o: [f64; 3],
    pub g: Sym3,
}

impl PoleChart {
    pub fn new(m: &GridMetric, o: [f64; 3]) -> Self {
        Self {
            o,
            g: m.interpolate(o),
        }
    }

    pub fn rho(&self, x: [f64; 3]) -> f64 {
        self.g
            .quad([x[0] - self.o[0], x[1] - self.o[1], x[2] - self.o[2]])
            .sqrt()
    }

    /// Smallest `θ ∈ (0, 1]` with `ρ(x + θ e) = r`.
    fn crossing(&self, x: [f64; 3], e: [f64; 3], r: f64) -> f64 {
        let y = [x[0] - self.o[0], x[1] - self.o[1], x[2] - self.o[2]];
        let a = self.g.quad(e);
        let ge = self.g.mul_vec(e);
        let b = 2.0 * (y[0] * ge[0] + y[1] * ge[1] + y[2] * ge[2]);
        let c = self.g.quad(y) - r * r;
        let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
        let mut best = 1.0f64;
        for t in [(-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a)] {
            if t > 0.0 && t < best {
                best = t;
            }
        }
        best.clamp(THETA_MIN, 1.0)
    }

    /// Euclidean radius containing the chart ball of radius `r`.
    pub fn euclidean_reach(&self, r: f64) -> f64 {
        let lo = self
            .g
            .eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        r / lo.sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
struct Corner {
    cell: u32,
    w: f64,
    c: [f64; 3],
    nb: [u32; 3],
    ub: [f64; 3],
}

#[derive(Debug)]
struct Discretisation {
    lattice: Lattice,
    chart: PoleChart,
    eps: f64,
    r_outer: f64,
    free: Vec<usize>,
    /// Inverse metric per cell.
    cells: Vec<Sym3>,
    cell_node: Vec<u32>,
    /// Eight corners per unknown, in octant order.
    corners: Vec<Corner>,
    rev_ptr: Vec<u32>,
    rev: Vec<(u32, u8)>,
}

fn det_sum(v: impl IndexedParallelIterator<Item = f64>) -> f64 {
    // Fixed-size chunks keep the reduction order independent of the thread count.
    let parts: Vec<f64> = v.chunks(CHUNK).map(|c| c.iter().sum::<f64>()).collect();
    parts.iter().sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    det_sum(a.par_iter().zip(b.par_iter()).map(|(x, y)| x * y))
}

impl Discretisation {
    fn build(
        m: &GridMetric,
        chart: PoleChart,
        eps: f64,
        r_outer: f64,
    ) -> Result<(Self, Vec<NodeClass>)> {
        let lat = m.lattice().clone();
        let h = lat.h;
        let class: Vec<NodeClass> = (0..lat.len())
            .into_par_iter()
            .map(|i| {
                let r = chart.rho(lat.point(i));
                if r <= eps {
                    NodeClass::Inner
                } else if r < r_outer {
                    NodeClass::Free
                } else {
                    NodeClass::Outer
                }
            })
            .collect();
        let free: Vec<usize> = (0..lat.len())
            .filter(|&i| class[i] == NodeClass::Free)
            .collect();
        if free.is_empty() {
            return Err(Error::Config("annulus contains no lattice nodes".into()));
        }
        let mut unk = vec![NONE; lat.len()];
        for (a, &i) in free.iter().enumerate() {
            unk[i] = a as u32;
        }
        for &i in &free {
            let c = lat.coords(i);
            if (0..3).any(|d| c[d] == 0 || c[d] + 1 >= lat.dims[d]) {
                return Err(Error::Config(
                    "outer ball touches the lattice boundary".into(),
                ));
            }
        }

        // Cells with at least one free corner.
        let cd = [lat.dims[0] - 1, lat.dims[1] - 1, lat.dims[2] - 1];
        let cell_of = |c: [usize; 3]| c[0] + cd[0] * (c[1] + cd[1] * c[2]);
        let mut cell_id = vec![NONE; cd[0] * cd[1] * cd[2]];
        let mut cell_node = Vec::new();
        for &i in &free {
            let c = lat.coords(i);
            for oct in 0..8 {
                let lc = [0, 1, 2].map(|k| if (oct >> k) & 1 == 1 { c[k] - 1 } else { c[k] });
                let id = cell_of(lc);
                if cell_id[id] == NONE {
                    cell_id[id] = cell_node.len() as u32;
                    cell_node.push(lat.index(lc[0], lc[1], lc[2]) as u32);
                }
            }
        }
        // Per cell: inverse metric, annulus volume, octant inside-fractions.
        let cell_data: Vec<(Sym3, f64, [f64; 8])> = cell_node
            .par_iter()
            .map(|&n0| {
                let base = lat.point(n0 as usize);
                let centre = [base[0] + 0.5 * h, base[1] + 0.5 * h, base[2] + 0.5 * h];
                let g = m.interpolate(centre);
                let ginv = g.inverse().unwrap_or(Sym3::IDENTITY);
                let vol = h * h * h * g.det().sqrt();
                let rmin = box_rho_min(&chart, base, h);
                let rmax = (0..8)
                    .map(|b| chart.rho([0, 1, 2].map(|k| base[k] + h * ((b >> k) & 1) as f64)))
                    .fold(0.0, f64::max);
                if rmin > eps && rmax < r_outer {
                    return (ginv, vol, [1.0; 8]);
                }
                let mut inside = [0usize; 8];
                for s in 0..SUB * SUB * SUB {
                    let a = [s % SUB, (s / SUB) % SUB, s / (SUB * SUB)];
                    let x = [0, 1, 2].map(|k| base[k] + h * (a[k] as f64 + 0.5) / SUB as f64);
                    let r = chart.rho(x);
                    if r > eps && r < r_outer {
                        let oct = (0..3)
                            .map(|k| usize::from(a[k] >= SUB / 2) << k)
                            .sum::<usize>();
                        inside[oct] += 1;
                    }
                }
                let per = (SUB * SUB * SUB / 8) as f64;
                let total: usize = inside.iter().sum();
                let frac = inside.map(|n| n as f64 / per);
                (ginv, vol * total as f64 / (8.0 * per), frac)
            })
            .collect();

        let corners: Vec<Corner> = free
            .par_iter()
            .flat_map_iter(|&i| {
                let c = lat.coords(i);
                let x = lat.point(i);
                let cell_id = &cell_id;
                let cell_data = &cell_data;
                let class = &class;
                let unk = &unk;
                let lat = &lat;
                (0..8).map(move |oct| {
                    let lc = [0, 1, 2].map(|k| if (oct >> k) & 1 == 1 { c[k] - 1 } else { c[k] });
                    let cid = cell_id[cell_of(lc)];
                    let (_, vol, frac) = &cell_data[cid as usize];
                    // Local position of node i in the cell.
                    let pos = oct;
                    let free_sum: f64 = (0..8)
                        .filter(|&q| {
                            let nc = [0, 1, 2].map(|k| lc[k] + ((q >> k) & 1));
                            class[lat.index(nc[0], nc[1], nc[2])] == NodeClass::Free
                        })
                        .map(|q| frac[q])
                        .sum();
                    let w = if free_sum > 0.0 {
                        vol * frac[pos] / free_sum
                    } else {
                        0.0
                    };
                    let mut cc = [0.0; 3];
                    let mut nb = [NONE; 3];
                    let mut ub = [0.0; 3];
                    for k in 0..3 {
                        let sigma = if (oct >> k) & 1 == 1 { -1.0 } else { 1.0 };
                        let mut nc = c;
                        nc[k] = if sigma > 0.0 { c[k] + 1 } else { c[k] - 1 };
                        let j = lat.index(nc[0], nc[1], nc[2]);
                        match class[j] {
                            NodeClass::Free => {
                                nb[k] = unk[j];
                                cc[k] = sigma / h;
                            }
                            fixed => {
                                let (r, v) = if fixed == NodeClass::Inner {
                                    (eps, 1.0)
                                } else {
                                    (r_outer, 0.0)
                                };
                                let mut e = [0.0; 3];
                                e[k] = sigma * h;
                                let theta = chart.crossing(x, e, r);
                                ub[k] = v;
                                cc[k] = sigma / (theta * h);
                            }
                        }
                    }
                    Corner {
                        cell: cid,
                        w,
                        c: cc,
                        nb,
                        ub,
                    }
                })
            })
            .collect();

        let n = free.len();
        let mut count = vec![0u32; n + 1];
        for cr in &corners {
            for k in 0..3 {
                if cr.nb[k] != NONE {
                    count[cr.nb[k] as usize + 1] += 1;
                }
            }
        }
        for a in 0..n {
            count[a + 1] += count[a];
        }
        let mut fill = count.clone();
        let mut rev = vec![(0u32, 0u8); count[n] as usize];
        for (ci, cr) in corners.iter().enumerate() {
            for k in 0..3 {
                if cr.nb[k] != NONE {
                    let slot = &mut fill[cr.nb[k] as usize];
                    rev[*slot as usize] = (ci as u32, k as u8);
                    *slot += 1;
                }
            }
        }
        let cells = cell_data.into_iter().map(|c| c.0).collect();
        Ok((
            Self {
                lattice: lat,
                chart,
                eps,
                r_outer,
                free,
                cells,
                cell_node,
                corners,
                rev_ptr: count,
                rev,
            },
            class,
        ))
    }

    #[inline]
    fn d(&self, ci: usize, u: &[f64]) -> [f64; 3] {
        let cr = &self.corners[ci];
        let ui = u[ci / 8];
        let mut d = [0.0; 3];
        for k in 0..3 {
            let v = if cr.nb[k] == NONE {
                cr.ub[k]
            } else {
                u[cr.nb[k] as usize]
            };
            d[k] = cr.c[k] * (v - ui);
        }
        d
    }

    fn energy(&self, u: &[f64], p: f64, mu2: f64) -> f64 {
        det_sum((0..self.corners.len()).into_par_iter().map(|ci| {
            let cr = &self.corners[ci];
            if cr.w == 0.0 {
                return 0.0;
            }
            let d = self.d(ci, u);
            cr.w * (self.cells[cr.cell as usize].quad(d) + mu2).powf(0.5 * p)
        }))
    }

    /// Per-corner dual vectors `y` assembled into a node vector.
    fn gather(&self, y: &[[f64; 3]], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(a, o)| {
            let mut s = 0.0;
            for ci in 8 * a..8 * a + 8 {
                let cr = &self.corners[ci];
                s -= cr.c[0] * y[ci][0] + cr.c[1] * y[ci][1] + cr.c[2] * y[ci][2];
            }
            for &(ci, k) in &self.rev[self.rev_ptr[a] as usize..self.rev_ptr[a + 1] as usize] {
                s += self.corners[ci as usize].c[k as usize] * y[ci as usize][k as usize];
            }
            *o = s;
        });
    }

    fn gradient(&self, u: &[f64], p: f64, mu2: f64, y: &mut [[f64; 3]], g: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(ci, yc)| {
            let cr = &self.corners[ci];
            if cr.w == 0.0 {
                *yc = [0.0; 3];
                return;
            }
            let d = self.d(ci, u);
            let m = &self.cells[cr.cell as usize];
            let md = m.mul_vec(d);
            let phi = m.quad(d) + mu2;
            let a = cr.w * p * phi.powf(0.5 * p - 1.0);
            *yc = [a * md[0], a * md[1], a * md[2]];
        });
        self.gather(y, g);
    }

    fn hessian(&self, u: &[f64], p: f64, mu2: f64) -> Hessian {
        let coef: Vec<(f64, f64, [f64; 3])> = (0..self.corners.len())
            .into_par_iter()
            .map(|ci| {
                let cr = &self.corners[ci];
                if cr.w == 0.0 {
                    return (0.0, 0.0, [0.0; 3]);
                }
                let d = self.d(ci, u);
                let m = &self.cells[cr.cell as usize];
                let md = m.mul_vec(d);
                let phi = m.quad(d) + mu2;
                let alpha = cr.w * p * phi.powf(0.5 * p - 1.0);
                let beta = cr.w * p * (p - 2.0) * phi.powf(0.5 * p - 2.0);
                (alpha, beta, md)
            })
            .collect();
        let n = self.free.len();
        let diag: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|a| {
                let mut s = 0.0;
                for ci in 8 * a..8 * a + 8 {
                    let (al, be, md) = coef[ci];
                    let c = self.corners[ci].c;
                    let m = &self.cells[self.corners[ci].cell as usize];
                    let mdc = md[0] * c[0] + md[1] * c[1] + md[2] * c[2];
                    s += al * m.quad(c) + be * mdc * mdc;
                }
                for &(ci, k) in &self.rev[self.rev_ptr[a] as usize..self.rev_ptr[a + 1] as usize] {
                    let (al, be, md) = coef[ci as usize];
                    let cr = &self.corners[ci as usize];
                    let k = k as usize;
                    let m = &self.cells[cr.cell as usize];
                    s += cr.c[k] * cr.c[k] * (al * m.get(k, k) + be * md[k] * md[k]);
                }
                s.max(1e-300)
            })
            .collect();
        Hessian { coef, diag }
    }

    fn hess_vec(&self, hs: &Hessian, v: &[f64], z: &mut [[f64; 3]], out: &mut [f64]) {
        z.par_iter_mut().enumerate().for_each(|(ci, zc)| {
            let (al, be, md) = hs.coef[ci];
            if al == 0.0 {
                *zc = [0.0; 3];
                return;
            }
            let cr = &self.corners[ci];
            let vi = v[ci / 8];
            let mut dd = [0.0; 3];
            for k in 0..3 {
                let vn = if cr.nb[k] == NONE {
                    0.0
                } else {
                    v[cr.nb[k] as usize]
                };
                dd[k] = cr.c[k] * (vn - vi);
            }
            let m = &self.cells[cr.cell as usize];
            let mdd = m.mul_vec(dd);
            let proj = be * (md[0] * dd[0] + md[1] * dd[1] + md[2] * dd[2]);
            *zc = [0, 1, 2].map(|k| al * mdd[k] + proj * md[k]);
        });
        self.gather(z, out);
    }

    fn full_field(&self, class: &[NodeClass], u: &[f64]) -> Vec<f64> {
        let mut full: Vec<f64> = class
            .iter()
            .map(|c| if *c == NodeClass::Inner { 1.0 } else { 0.0 })
            .collect();
        for (a, &i) in self.free.iter().enumerate() {
            full[i] = u[a];
        }
        full
    }
}

struct Hessian {
    coef: Vec<(f64, f64, [f64; 3])>,
    diag: Vec<f64>,
}

/// Smallest pole-chart radius over an axis-aligned cell.
fn box_rho_min(chart: &PoleChart, base: [f64; 3], h: f64) -> f64 {
    // Exact for the flat chart metric; for anisotropic frozen metrics the
    // Euclidean box distance scaled by the smallest eigenvalue is a lower bound.
    let mut q = 0.0;
    for k in 0..3 {
        let lo = base[k] - chart.o[k];
        let hi = lo + h;
        let t = if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            hi
        } else {
            0.0
        };
        q += t * t;
    }
    let lmin = chart
        .g
        .eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    (q * lmin).sqrt()
}

struct Workspace {
    y: Vec<[f64; 3]>,
    g: Vec<f64>,
}

/// Preconditioned CG on `H s = b`; returns the iteration count.
fn pcg(
    disc: &Discretisation,
    hs: &Hessian,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    z3: &mut [[f64; 3]],
    s: &mut [f64],
) -> usize {
    let n = b.len();
    s.iter_mut().for_each(|x| *x = 0.0);
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r
        .par_iter()
        .zip(hs.diag.par_iter())
        .map(|(r, d)| r / d)
        .collect();
    let mut dir = z.clone();
    let mut rz = dot(&r, &z);
    let bnorm = dot(b, b).sqrt();
    let mut hd = vec![0.0; n];
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return it;
        }
        disc.hess_vec(hs, &dir, z3, &mut hd);
        let curv = dot(&dir, &hd);
        if !(curv > 0.0) {
            return it;
        }
        let alpha = rz / curv;
        s.par_iter_mut()
            .zip(dir.par_iter())
            .for_each(|(x, d)| *x += alpha * d);
        r.par_iter_mut()
            .zip(hd.par_iter())
            .for_each(|(x, d)| *x -= alpha * d);
        z.par_iter_mut()
            .zip(r.par_iter().zip(hs.diag.par_iter()))
            .for_each(|(z, (r, d))| *z = r / d);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        dir.par_iter_mut()
            .zip(z.par_iter())
            .for_each(|(d, z)| *d = z + beta * *d);
    }
    max_iter
}

fn axpy(u: &[f64], t: f64, s: &[f64]) -> Vec<f64> {
    u.par_iter()
        .zip(s.par_iter())
        .map(|(a, b)| a + t * b)
        .collect()
}

/// Backtracking Armijo search along `s`; returns the accepted step and energy.
fn armijo(
    disc: &Discretisation,
    u: &[f64],
    s: &[f64],
    e0: f64,
    gs: f64,
    p: f64,
    mu2: f64,
) -> Option<(f64, f64)> {
    let mut t = 1.0;
    for _ in 0..40 {
        let e = disc.energy(&axpy(u, t, s), p, mu2);
        if e <= e0 + 1e-4 * t * gs {
            return Some((t, e));
        }
        t *= 0.5;
    }
    None
}

struct StageOutcome {
    history: StageHistory,
    cg: usize,
    decrement: f64,
}

fn descent(
    disc: &Discretisation,
    u: &mut Vec<f64>,
    p: f64,
    mu2: f64,
    iters: usize,
    ws: &mut Workspace,
) -> Vec<f64> {
    let mut energies = Vec::new();
    let mut e = disc.energy(u, p, mu2);
    let mut dir: Vec<f64> = Vec::new();
    let mut g_prev: Vec<f64> = Vec::new();
    let mut z_prev: Vec<f64> = Vec::new();
    for _ in 0..iters {
        disc.gradient(u, p, mu2, &mut ws.y, &mut ws.g);
        let hs = disc.hessian(u, p, mu2);
        let z: Vec<f64> = ws.g.iter().zip(&hs.diag).map(|(g, d)| g / d).collect();
        let beta = if g_prev.is_empty() {
            0.0
        } else {
            let num: f64 = dot(&z, &ws.g) - dot(&z, &g_prev);
            (num / dot(&z_prev, &g_prev)).max(0.0)
        };
        if dir.is_empty() {
            dir = z.iter().map(|x| -x).collect();
        } else {
            dir.iter_mut()
                .zip(&z)
                .for_each(|(d, z)| *d = -z + beta * *d);
        }
        let mut gs = dot(&ws.g, &dir);
        if gs >= 0.0 {
            dir = z.iter().map(|x| -x).collect();
            gs = dot(&ws.g, &dir);
        }
        // Scale the step by the exact minimiser of the local quadratic model.
        let mut hd = vec![0.0; dir.len()];
        let mut z3 = vec![[0.0; 3]; disc.corners.len()];
        disc.hess_vec(&hs, &dir, &mut z3, &mut hd);
        let curv = dot(&dir, &hd);
        if curv > 0.0 {
            let t = -gs / curv;
            dir.iter_mut().for_each(|d| *d *= t);
            gs *= t;
        }
        match armijo(disc, u, &dir, e, gs, p, mu2) {
            Some((t, en)) => {
                *u = axpy(u, t, &dir);
                e = en;
                energies.push(e);
            }
            None => break,
        }
        g_prev = ws.g.clone();
        z_prev = z;
    }
    energies
}

fn newton(
    disc: &Discretisation,
    u: &mut Vec<f64>,
    p: f64,
    mu2: f64,
    tol: f64,
    max_iter: usize,
    cg_max: usize,
    ws: &mut Workspace,
) -> StageOutcome {
    let mut energies = vec![disc.energy(u, p, mu2)];
    let mut z3 = vec![[0.0; 3]; disc.corners.len()];
    let mut s = vec![0.0; u.len()];
    let mut cg_total = 0;
    let mut eta = 1e-2;
    let mut decrement = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let e0 = *energies.last().unwrap();
        disc.gradient(u, p, mu2, &mut ws.y, &mut ws.g);
        let hs = disc.hessian(u, p, mu2);
        let b: Vec<f64> = ws.g.iter().map(|g| -g).collect();
        cg_total += pcg(disc, &hs, &b, eta, cg_max, &mut z3, &mut s);
        let gs = dot(&ws.g, &s);
        if !(gs < 0.0) {
            decrement = 0.0;
            converged = true;
            break;
        }
        decrement = -gs / e0.abs().max(1e-300);
        if 0.5 * decrement <= tol {
            converged = true;
            break;
        }
        match armijo(disc, u, &s, e0, gs, p, mu2) {
            Some((t, e)) => {
                *u = axpy(u, t, &s);
                energies.push(e);
            }
            None => {
                // No decrease at float resolution: the iterate is stationary.
                converged = 0.5 * decrement <= tol.sqrt();
                break;
            }
        }
        eta = decrement.sqrt().clamp(1e-10, 1e-2);
    }
    StageOutcome {
        history: StageHistory {
            p,
            mu: mu2.sqrt(),
            energies,
            newton_iterations: iterations,
            converged,
        },
        cg: cg_total,
        decrement,
    }
}

/// Checks shared by every lattice solve.
pub(crate) fn check_setup(
    m: &GridMetric,
    chart: &PoleChart,
    r_outer: f64,
    cfg: &SolverConfig,
) -> Result<()> {
    cfg.validate(Some(r_outer))?;
    let (lo, hi) = m.ellipticity();
    if !(lo > 0.0) || hi / lo > cfg.ellipticity_limit {
        return Err(Error::Config(format!(
            "ellipticity bounds ({lo}, {hi}) exceed the admissible ratio {}",
            cfg.ellipticity_limit
        )));
    }
    let lat = m.lattice();
    if cfg.eps_inner < 3.0 * lat.h * (1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "eps_inner = {} is below the resolvable scale 3h = {}",
            cfg.eps_inner,
            3.0 * lat.h
        )));
    }
    let reach = chart.euclidean_reach(r_outer);
    let up = lat.upper();
    for d in 0..3 {
        if chart.o[d] - reach < lat.origin[d] + lat.h || chart.o[d] + reach > up[d] - lat.h {
            return Err(Error::Config(format!(
                "B_R(o) with R = {r_outer} does not fit inside the lattice"
            )));
        }
    }
    Ok(())
}

/// Normalised p-Green function of `m` with pole `pole`, vanishing at the
/// chart sphere of radius `r_outer` and normalised by the capacity of the
/// excised ball of radius `cfg.eps_inner`.
pub fn grid_green(
    m: &GridMetric,
    pole: [f64; 3],
    p: f64,
    r_outer: f64,
    cfg: &SolverConfig,
) -> Result<LatticeField> {
    check_exponent(p)?;
    let chart = PoleChart::new(m, pole);
    check_setup(m, &chart, r_outer, cfg)?;
    let eps = cfg.eps_inner;
    let (disc, class) = Discretisation::build(m, chart, eps, r_outer)?;
    let n = disc.free.len();
    let mut u: Vec<f64> = disc
        .free
        .par_iter()
        .map(|&i| {
            let r = chart.rho(disc.lattice.point(i));
            ((1.0 / r - 1.0 / r_outer) / (1.0 / eps - 1.0 / r_outer)).clamp(0.0, 1.0)
        })
        .collect();
    let mut ws = Workspace {
        y: vec![[0.0; 3]; disc.corners.len()],
        g: vec![0.0; n],
    };
    let scale = 1.0 / (r_outer - eps);

    // Continuation path in p from the linear problem.
    let mut ps = vec![2.0];
    let steps = ((p - 2.0).abs() / 0.25).ceil() as usize;
    for k in 1..=steps {
        ps.push(2.0 + (p - 2.0) * k as f64 / steps as f64);
    }
    let mut mus = Vec::new();
    let mut mu = 1e-2;
    while mu > cfg.mu_final {
        mus.push(mu);
        mu *= 1e-2;
    }
    mus.push(cfg.mu_final);

    let mut stages = Vec::new();
    let mut cg = 0;
    let mut decrement = 0.0;
    let mut budget = cfg.max_iterations;
    let g0 = {
        let mu2 = (mus[0] * scale).powi(2);
        disc.gradient(&u, p, mu2, &mut ws.y, &mut ws.g);
        dot(&ws.g, &ws.g).sqrt()
    };
    for (si, &pk) in ps.iter().enumerate() {
        let last_p = si + 1 == ps.len();
        let stage_mus: Vec<f64> = if last_p { mus.clone() } else { vec![mus[0]] };
        for (mi, &mk) in stage_mus.iter().enumerate() {
            let mu2 = (mk * scale).powi(2);
            let mut pre = Vec::new();
            if last_p && mi == 0 && cfg.descent_iterations > 0 {
                pre = descent(&disc, &mut u, pk, mu2, cfg.descent_iterations, &mut ws);
            }
            let tol = if last_p {
                cfg.energy_tolerance
            } else {
                cfg.energy_tolerance.sqrt()
            };
            let mut out = newton(
                &disc,
                &mut u,
                pk,
                mu2,
                tol,
                budget.max(1),
                cfg.cg_max_iterations,
                &mut ws,
            );
            budget = budget.saturating_sub(out.history.newton_iterations);
            if !pre.is_empty() {
                // Descent energies precede the Newton polish of the same stage.
                let mut e = pre;
                e.extend(out.history.energies.drain(..));
                out.history.energies = e;
            }
            cg += out.cg;
            decrement = out.decrement;
            stages.push(out.history);
        }
    }
    let mu2 = (cfg.mu_final * scale).powi(2);
    disc.gradient(&u, p, mu2, &mut ws.y, &mut ws.g);
    let residual = dot(&ws.g, &ws.g).sqrt() / g0.max(1e-300);
    let energy_monotone = stages.iter().all(|s| {
        s.energies
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-14) + 1e-300)
    });
    let converged = stages.last().is_some_and(|s| s.converged);
    let full = disc.full_field(&class, &u);
    let local_minima = count_local_minima(&disc.lattice, &class, &full);
    let capacity = disc.energy(&u, p, 0.0);
    let log_scale = -(capacity.ln() - log_norm_constant(p)) / (p - 1.0);
    let w = full
        .par_iter()
        .map(|&v| {
            if v > 0.0 {
                -(p - 1.0) * (log_scale + v.ln())
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let diagnostics = SolverDiagnostics {
        unknowns: n,
        stages,
        cg_iterations: cg,
        residual,
        decrement,
        energy_monotone,
        local_minima,
        converged,
    };
    Ok(LatticeField {
        metric: m.clone(),
        pole,
        r_outer,
        eps_inner: eps,
        p: Some(p),
        class,
        u: full,
        w,
        capacity_inner: capacity,
        log_scale,
        diagnostics: Some(diagnostics),
        disc: Some(Arc::new(disc)),
    })
}

fn neighbours6(lat: &Lattice, i: usize) -> impl Iterator<Item = usize> + '_ {
    let c = lat.coords(i);
    (0..6).filter_map(move |s| {
        let k = s / 2;
        let mut n = c;
        if s % 2 == 0 {
            if c[k] == 0 {
                return None;
            }
            n[k] -= 1;
        } else {
            if c[k] + 1 >= lat.dims[k] {
                return None;
            }
            n[k] += 1;
        }
        Some(lat.index(n[0], n[1], n[2]))
    })
}

fn count_local_minima(lat: &Lattice, class: &[NodeClass], u: &[f64]) -> usize {
    (0..lat.len())
        .into_par_iter()
        .filter(|&i| class[i] == NodeClass::Free && neighbours6(lat, i).all(|j| u[i] < u[j]))
        .count()
}

impl LatticeField {
    pub fn lattice(&self) -> &Lattice {
        self.metric.lattice()
    }

    pub(crate) fn chart(&self) -> PoleChart {
        PoleChart::new(&self.metric, self.pole)
    }

    /// Node value of `log G`; `-∞` where the potential vanishes.
    pub fn log_green(&self, i: usize) -> f64 {
        match self.p {
            Some(p) => -self.w[i] / (p - 1.0),
            None => f64::NEG_INFINITY,
        }
    }

    /// Field built from node values of `w` (e.g. a sampled `p → 1` limit).
    pub fn from_w(
        metric: GridMetric,
        pole: [f64; 3],
        r_outer: f64,
        eps_inner: f64,
        w: Vec<f64>,
    ) -> Result<Self> {
        if w.len() != metric.lattice().len() {
            return Err(Error::Domain("w must have one value per node".into()));
        }
        let chart = PoleChart::new(&metric, pole);
        let lat = metric.lattice();
        let class = (0..lat.len())
            .map(|i| {
                let r = chart.rho(lat.point(i));
                if r <= eps_inner {
                    NodeClass::Inner
                } else if r < r_outer {
                    NodeClass::Free
                } else {
                    NodeClass::Outer
                }
            })
            .collect();
        Ok(Self {
            metric,
            pole,
            r_outer,
            eps_inner,
            p: None,
            class,
            u: Vec::new(),
            w,
            capacity_inner: f64::NAN,
            log_scale: f64::NAN,
            diagnostics: None,
            disc: None,
        })
    }

    /// `∫_{u<σ} |∇u|^p` over the discrete annulus, with the fraction of each
    /// corner region below `σ` taken from trilinear samples of the potential.
    pub fn sublevel_energy(&self, sigma: f64) -> Result<f64> {
        let p = self
            .p
            .ok_or_else(|| Error::Unsupported("sublevel energy needs a p-harmonic field".into()))?;
        let disc = self
            .disc
            .as_ref()
            .ok_or_else(|| Error::Unsupported("field carries no discretisation".into()))?;
        let h = disc.lattice.h;
        let u_free: Vec<f64> = disc.free.iter().map(|&i| self.u[i]).collect();
        let half = SUB / 2;
        Ok(det_sum((0..disc.corners.len()).into_par_iter().map(|ci| {
            let cr = &disc.corners[ci];
            if cr.w == 0.0 {
                return 0.0;
            }
            let n0 = disc.cell_node[cr.cell as usize] as usize;
            let c0 = disc.lattice.coords(n0);
            let vals: [f64; 8] = std::array::from_fn(|b| {
                self.u[disc.lattice.index(
                    c0[0] + (b & 1),
                    c0[1] + ((b >> 1) & 1),
                    c0[2] + ((b >> 2) & 1),
                )]
            });
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let frac = if hi < sigma {
                1.0
            } else if lo >= sigma {
                0.0
            } else {
                let node = disc.free[ci / 8];
                let cn = disc.lattice.coords(node);
                let pos: [usize; 3] = [0, 1, 2].map(|k| cn[k] - c0[k]);
                let base = disc.lattice.point(n0);
                let (mut tot, mut below) = (0usize, 0usize);
                for s in 0..half * half * half {
                    let a = [s % half, (s / half) % half, s / (half * half)];
                    let t = [0, 1, 2]
                        .map(|k| (pos[k] * half + a[k]) as f64 / SUB as f64 + 0.5 / SUB as f64);
                    let x = [0, 1, 2].map(|k| base[k] + h * t[k]);
                    let r = disc.chart.rho(x);
                    if !(r > disc.eps && r < disc.r_outer) {
                        continue;
                    }
                    tot += 1;
                    let mut v = 0.0;
                    for (b, val) in vals.iter().enumerate() {
                        let wgt: f64 = (0..3)
                            .map(|k| if (b >> k) & 1 == 1 { t[k] } else { 1.0 - t[k] })
                            .product();
                        v += wgt * val;
                    }
                    if v < sigma {
                        below += 1;
                    }
                }
                if tot == 0 {
                    f64::from(u8::from(u_free[ci / 8] < sigma))
                } else {
                    below as f64 / tot as f64
                }
            };
            if frac == 0.0 {
                return 0.0;
            }
            let d = disc.d(ci, &u_free);
            frac * cr.w * disc.cells[cr.cell as usize].quad(d).powf(0.5 * p)
        })))
    }

    /// `Cap_p({w ≤ t}, B_R) = σ^{-p} ∫_{u<σ} |∇u|^p` with `σ = e^{-t/(p-1)}/t_ε`.
    pub fn sublevel_capacity(&self, t: f64) -> Result<f64> {
        let p = self.p.ok_or_else(|| {
            Error::Unsupported("sublevel capacity needs a p-harmonic field".into())
        })?;
        let log_sigma = -t / (p - 1.0) - self.log_scale;
        if log_sigma >= 0.0 {
            return Err(Error::Domain(format!(
                "level t = {t} lies inside the excised ball"
            )));
        }
        let sigma = log_sigma.exp();
        let e = self.sublevel_energy(sigma)?;
        if e <= 0.0 {
            return Err(Error::EmptySublevel(t));
        }
        Ok((e.ln() - p * log_sigma).exp())
    }

    /// Free nodes whose pole-chart radius lies in `[a, b]`.
    pub fn annulus_nodes(&self, a: f64, b: f64) -> Vec<usize> {
        let chart = self.chart();
        let lat = self.lattice();
        (0..lat.len())
            .filter(|&i| {
                self.class[i] == NodeClass::Free && {
                    let r = chart.rho(lat.point(i));
                    r >= a && r <= b
                }
            })
            .collect()
    }

    /// Pole-chart radius of node `i`.
    pub fn rho(&self, i: usize) -> f64 {
        self.chart().rho(self.lattice().point(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::WarpedMetric;
    use crate::pharmonic::radial::{radial_ball_capacity, radial_green};

    fn setup(n: usize, h: f64) -> (GridMetric, f64, SolverConfig) {
        let m = GridMetric::flat(Lattice::centered(n, h).unwrap());
        let r = 0.45 * h * (n as f64 - 1.0);
        let cfg = SolverConfig {
            eps_inner: 4.0 * h,
            ..SolverConfig::default()
        };
        (m, r, cfg)
    }

    #[test]
    fn linear_capacity_matches_radial() {
        let (m, r, cfg) = setup(41, 0.1);
        let f = grid_green(&m, [0.0; 3], 2.0, r, &cfg).unwrap();
        let exact =
            radial_ball_capacity(&WarpedMetric::euclidean(10.0), 2.0, cfg.eps_inner, r).unwrap();
        let rel = f.capacity_inner / exact - 1.0;
        assert!(rel.abs() < 0.03, "cap {} vs {exact}", f.capacity_inner);
        let d = f.diagnostics.as_ref().unwrap();
        assert!(d.energy_monotone && d.converged, "{d:?}");
        assert_eq!(d.local_minima, 0);
    }

    #[test]
    fn nonlinear_green_tracks_radial() {
        let (m, r, cfg) = setup(41, 0.1);
        let p = 1.5;
        let f = grid_green(&m, [0.0; 3], p, r, &cfg).unwrap();
        let rad = radial_green(&WarpedMetric::euclidean(10.0), p, r).unwrap();
        let mut worst: f64 = 0.0;
        for i in f.annulus_nodes(2.0 * cfg.eps_inner, 0.8 * r) {
            let g = f.log_green(i).exp();
            let e = rad.green(f.rho(i)).unwrap();
            worst = worst.max((g / e - 1.0).abs());
        }
        assert!(worst < 0.05, "{worst}");
        let d = f.diagnostics.as_ref().unwrap();
        assert!(d.energy_monotone, "{d:?}");
    }

    #[test]
    fn sublevel_capacity_law() {
        let (m, r, cfg) = setup(41, 0.1);
        let p = 1.5;
        let f = grid_green(&m, [0.0; 3], p, r, &cfg).unwrap();
        let c = crate::pharmonic::radial::norm_constant(p);
        for t in [-1.0, -0.5] {
            let cap = f.sublevel_capacity(t).unwrap();
            let ratio = cap * (-t).exp() / c;
            assert!((ratio - 1.0).abs() < 0.06, "t={t}: {ratio}");
        }
    }

    #[test]
    fn setup_errors() {
        let (m, r, cfg) = setup(17, 0.1);
        assert!(grid_green(&m, [0.0; 3], 3.0, r, &cfg).is_err());
        let small = SolverConfig {
            eps_inner: 0.1,
            ..cfg.clone()
        };
        assert!(grid_green(&m, [0.0; 3], 1.5, r, &small).is_err());
        assert!(grid_green(&m, [0.0; 3], 1.5, 2.0 * r, &cfg).is_err());
    }
}
