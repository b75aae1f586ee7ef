//! p-harmonic Green functions, capacities and their `p → 1` limit.

pub mod bounds;
pub mod capacity;
pub mod export;
pub mod field;
pub mod grid;
pub mod limit;
pub mod probe;
pub mod radial;

pub use bounds::{bound_checks, BoundOptions, BoundReport};
pub use capacity::{capacity_monotone, field_capacity, p_capacity, CapacitySet};
pub use field::{CapacityReport, FieldData, FieldKind, PotentialField, SolverConfig};
pub use grid::{grid_green, LatticeField, NodeClass, SolverDiagnostics};
pub use limit::{imcf_limit, imcf_limit_traced, ContinuationStep};
pub use probe::{weak_solution_probe, Competitor, ProbeReport};
pub use radial::{norm_constant, radial_ball_capacity, radial_green, radial_limit, RadialField};
