//! Local weak inverse mean curvature flow on three-dimensional metrics,
//! computed as the `p → 1` limit of normalised p-harmonic Green functions.
//!
//! The crate is organised bottom-up:
//!
//! - [`metrics`]: warped-product and lattice metrics, mollification, scalar
//!   curvature and measured geometric constants;
//! - [`pharmonic`]: radial and lattice Green functions, capacities, the
//!   `p → 1` continuation and potential-theoretic bound checks;
//! - [`imcf`]: sublevel-set geometry, Hawking mass, flow reports and the
//!   candidate-set pipeline;
//! - [`mass`]: quasi-local and isoperimetric masses, isoperimetric profiles
//!   and rigidity diagnostics.

pub mod error;
pub mod imcf;
pub mod mass;
pub mod metrics;
pub mod numeric;
pub mod pharmonic;

pub use error::{Error, Result};
pub use metrics::{GridMetric, Lattice, Metric, WarpKind, WarpedMetric};
