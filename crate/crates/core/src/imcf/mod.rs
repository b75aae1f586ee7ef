//! Sublevel-set geometry of the weak flow `E_t = {w < t}`, Hawking mass,
//! flow reports and the candidate-set pipeline.

pub mod candidate;
pub mod coarea;
pub mod flow;
pub mod geometry;
pub mod mesh;

pub use candidate::{
    candidate_set_builder, rho_for, CandidateMember, CandidateOptions, CandidateSet,
};
pub use coarea::{coarea_check, CoareaField, CoareaRegion, CoareaResult};
pub use flow::{
    flow_csv, flow_report, flow_report_with, FlowConstants, FlowReport, FlowTolerances, GerochStep,
    TGrid, Verdict,
};
pub use geometry::{hawking_mass, sublevel_geometry, LevelSetGeometry};
