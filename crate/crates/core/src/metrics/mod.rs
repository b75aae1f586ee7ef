//! Warped-product and lattice metrics, mollification and measured constants.

pub mod constants;
pub mod distance;
pub mod grid;
pub mod io;
pub mod mollify;
pub mod warp;

use serde::{Deserialize, Serialize};

pub use constants::{
    deficit_scalar_estimate, geometry_constants, ConstantsOptions, DeficitEstimate,
    GeometryConstants,
};
pub use distance::{grid_distance, grid_distance_bounded, DistanceField};
pub use grid::{grid_scalar_curvature, GridMetric, Lattice, Sym3};
pub use mollify::{mollify, PerturbedFamily, Region, SmoothedApproximation};
pub use warp::{InnerEnd, RadialJet, SampledWarp, WarpKind, WarpedMetric};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", content = "metric", rename_all = "snake_case")]
pub enum Metric {
    Warped(WarpedMetric),
    Grid(GridMetric),
}

impl Metric {
    pub fn as_warped(&self) -> Option<&WarpedMetric> {
        match self {
            Metric::Warped(w) => Some(w),
            Metric::Grid(_) => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridMetric> {
        match self {
            Metric::Grid(g) => Some(g),
            Metric::Warped(_) => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Metric::Warped(w) => w.label(),
            Metric::Grid(_) => "grid",
        }
    }
}

impl From<WarpedMetric> for Metric {
    fn from(w: WarpedMetric) -> Self {
        Metric::Warped(w)
    }
}

impl From<GridMetric> for Metric {
    fn from(g: GridMetric) -> Self {
        Metric::Grid(g)
    }
}
