//! Graph distances on the 26-neighbour lattice.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::grid::GridMetric;
use crate::error::{Error, Result};

/// Distances from one source node; unreachable nodes hold `f64::INFINITY`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceField {
    pub source: usize,
    pub dist: Vec<f64>,
}

impl DistanceField {
    pub fn unreachable(&self) -> usize {
        self.dist.iter().filter(|d| d.is_infinite()).count()
    }
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance, ties broken by index for determinism.
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

pub(crate) const OFFSETS: [[i32; 3]; 26] = {
    let mut out = [[0; 3]; 26];
    let mut n = 0;
    let mut k = -1;
    while k <= 1 {
        let mut j = -1;
        while j <= 1 {
            let mut i = -1;
            while i <= 1 {
                if !(i == 0 && j == 0 && k == 0) {
                    out[n] = [i, j, k];
                    n += 1;
                }
                i += 1;
            }
            j += 1;
        }
        k += 1;
    }
    out
};

/// Riemannian length of the straight lattice edge from node `a` along `off`,
/// by Simpson's rule on `√g(γ', γ')`.
pub(crate) fn edge_length(m: &GridMetric, a: usize, b: usize, off: [i32; 3]) -> f64 {
    let lat = m.lattice();
    let e = off.map(|o| o as f64 * lat.h);
    let pa = lat.point(a);
    let mid = [pa[0] + 0.5 * e[0], pa[1] + 0.5 * e[1], pa[2] + 0.5 * e[2]];
    let la = m.at(a).quad(e).sqrt();
    let lb = m.at(b).quad(e).sqrt();
    let lm = m.interpolate(mid).quad(e).sqrt();
    (la + 4.0 * lm + lb) / 6.0
}

/// Shortest-path distances from `source`, stopping once all nodes closer than
/// `cutoff` are settled. Nodes outside `mask` (when given) are not traversed.
pub fn grid_distance_bounded(
    m: &GridMetric,
    source: usize,
    cutoff: f64,
    mask: Option<&[bool]>,
) -> Result<DistanceField> {
    let lat = m.lattice();
    if source >= lat.len() {
        return Err(Error::Domain(format!(
            "source node {source} outside the lattice"
        )));
    }
    if let Some(mk) = mask {
        if mk.len() != lat.len() || !mk[source] {
            return Err(Error::Domain(
                "mask must cover the lattice and contain the source".into(),
            ));
        }
    }
    let mut dist = vec![f64::INFINITY; lat.len()];
    let mut done = vec![false; lat.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Item(0.0, source));
    while let Some(Item(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if d > cutoff {
            break;
        }
        let c = lat.coords(u);
        for off in OFFSETS {
            let n = [
                c[0] as i64 + off[0] as i64,
                c[1] as i64 + off[1] as i64,
                c[2] as i64 + off[2] as i64,
            ];
            if (0..3).any(|k| n[k] < 0 || n[k] >= lat.dims[k] as i64) {
                continue;
            }
            let v = lat.index(n[0] as usize, n[1] as usize, n[2] as usize);
            if done[v] || mask.is_some_and(|mk| !mk[v]) {
                continue;
            }
            let nd = d + edge_length(m, u, v, off);
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Item(nd, v));
            }
        }
    }
    Ok(DistanceField { source, dist })
}

pub fn grid_distance(m: &GridMetric, source: usize) -> Result<DistanceField> {
    grid_distance_bounded(m, source, f64::INFINITY, None)
}

/// Worst relative overestimate of Euclidean distance by the flat 26-neighbour
/// graph: `|(1, √2 − 1, √3 − √2)| − 1`, approached along that direction.
/// It is a property of the stencil, so it does not shrink under refinement;
/// what refinement halves is the absolute overestimate at a fixed pair.
pub const STENCIL_TOLERANCE: f64 = 0.128_092_758;

#[cfg(test)]
mod tests {
    use super::super::grid::{Lattice, Sym3};
    use super::*;

    fn flat(n: usize, h: f64) -> GridMetric {
        GridMetric::flat(Lattice::new([0.0; 3], h, [n; 3]).unwrap())
    }

    #[test]
    fn flat_axis_distance_is_exact() {
        let m = flat(21, 0.1);
        let lat = m.lattice().clone();
        let d = grid_distance(&m, 0).unwrap();
        let target = lat.index(10, 0, 0);
        assert!((d.dist[target] - 1.0).abs() < 0.02);
        assert_eq!(d.unreachable(), 0);
    }

    #[test]
    fn scaled_metric_doubles_distances() {
        let m = flat(9, 0.25);
        let m4 = m.scaled(4.0).unwrap();
        let a = grid_distance(&m, 3).unwrap();
        let b = grid_distance(&m4, 3).unwrap();
        for (x, y) in a.dist.iter().zip(&b.dist) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y.max(1.0));
        }
    }

    #[test]
    fn masked_nodes_are_unreachable() {
        let m = flat(5, 1.0);
        let lat = m.lattice().clone();
        let mut mask = vec![true; lat.len()];
        for (idx, mk) in mask.iter_mut().enumerate() {
            if lat.coords(idx)[0] == 2 {
                *mk = false;
            }
        }
        let d = grid_distance_bounded(&m, 0, f64::INFINITY, Some(&mask)).unwrap();
        assert!(d.dist[lat.index(4, 0, 0)].is_infinite());
    }

    #[test]
    fn stencil_tolerance_bounds_flat_anisotropy() {
        let m = flat(13, 1.0);
        let lat = m.lattice().clone();
        let d = grid_distance(&m, 0).unwrap();
        let mut worst: f64 = 0.0;
        for (idx, p) in lat.iter_points().skip(1) {
            let e = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            worst = worst.max(d.dist[idx] / e - 1.0);
        }
        assert!(worst <= STENCIL_TOLERANCE, "{worst}");
    }

    #[test]
    fn pinched_metric_distance_ratio() {
        let lat = Lattice::new([0.0; 3], 0.2, [8; 3]).unwrap();
        let eps = 0.21;
        let flat = GridMetric::flat(lat.clone());
        let pinched = GridMetric::from_fn(lat.clone(), |x| {
            let s = 1.0 + eps * (0.5 + 0.5 * (3.0 * x[0]).sin() * (2.0 * x[1]).cos());
            Sym3::IDENTITY.scaled(s).0
        })
        .unwrap();
        let close = pinched.closeness(&flat).unwrap();
        let a = grid_distance(&flat, 0).unwrap();
        let b = grid_distance(&pinched, 0).unwrap();
        let bound = (1.0 + close).sqrt();
        for (x, y) in a.dist.iter().zip(&b.dist).skip(1) {
            let ratio = y / x;
            assert!(ratio <= bound * (1.0 + 1e-12) && ratio >= 1.0 / bound / (1.0 + 1e-12));
        }
    }
}
