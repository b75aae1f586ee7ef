//! Potential fields and solver configuration.

use serde::{Deserialize, Serialize};

use super::grid::LatticeField;
use super::radial::{check_exponent, norm_constant, RadialField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// The normalised Green function `G_p`.
    Green,
    /// `w_p = -(p-1) log G_p`, or the `p → 1` limit `w`.
    Log,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldData {
    Radial(RadialField),
    Lattice(LatticeField),
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialField {
    pub kind: FieldKind,
    pub data: FieldData,
    pub pole: [f64; 3],
    /// Sup-norm gap between the last two iterates of a `p → 1` continuation.
    pub cauchy_gap: Option<f64>,
    /// `false` when a continuation exhausted its schedule before the gap tolerance.
    pub converged: bool,
}

impl PotentialField {
    pub fn radial(kind: FieldKind, f: RadialField) -> Self {
        Self {
            kind,
            data: FieldData::Radial(f),
            pole: [0.0; 3],
            cauchy_gap: None,
            converged: true,
        }
    }

    pub fn lattice(kind: FieldKind, f: LatticeField) -> Self {
        let pole = f.pole;
        Self {
            kind,
            data: FieldData::Lattice(f),
            pole,
            cauchy_gap: None,
            converged: true,
        }
    }

    pub fn p(&self) -> Option<f64> {
        match &self.data {
            FieldData::Radial(r) => r.p,
            FieldData::Lattice(l) => l.p,
        }
    }

    pub fn r_outer(&self) -> f64 {
        match &self.data {
            FieldData::Radial(r) => r.r_outer,
            FieldData::Lattice(l) => l.r_outer,
        }
    }

    pub fn c_norm(&self) -> Option<f64> {
        self.p().map(norm_constant)
    }

    pub fn as_radial(&self) -> Option<&RadialField> {
        match &self.data {
            FieldData::Radial(r) => Some(r),
            FieldData::Lattice(_) => None,
        }
    }

    pub fn as_lattice(&self) -> Option<&LatticeField> {
        match &self.data {
            FieldData::Lattice(l) => Some(l),
            FieldData::Radial(_) => None,
        }
    }

    /// The same field reported as `w`.
    pub fn to_log(&self) -> Self {
        Self {
            kind: FieldKind::Log,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Strictly decreasing exponents in `(1, 3)` for the `p → 1` continuation.
    pub p_schedule: Vec<f64>,
    /// Newton iterations stop when the decrement falls below this fraction of the energy.
    pub energy_tolerance: f64,
    pub max_iterations: usize,
    /// Radius of the excised ball carrying unit Dirichlet data.
    pub eps_inner: f64,
    /// Annulus `[a, b]` on which continuation iterates are compared.
    pub annulus: [f64; 2],
    /// Tolerance on the sup-norm gap between consecutive continuation iterates.
    pub cauchy_tolerance: f64,
    /// Final regularisation `μ`, relative to the data scale `1/(R - ε)`.
    pub mu_final: f64,
    /// Descent iterations before the Newton polish.
    pub descent_iterations: usize,
    pub cg_max_iterations: usize,
    /// Largest admissible `Λ/λ` of the lattice metric.
    pub ellipticity_limit: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p_schedule: (1..=10).map(|k| 1.0 + 0.5f64.powi(k)).collect(),
            energy_tolerance: 1e-12,
            max_iterations: 200,
            eps_inner: 0.2,
            annulus: [0.1, 1.0],
            cauchy_tolerance: 1e-3,
            mu_final: 1e-8,
            descent_iterations: 20,
            cg_max_iterations: 4000,
            ellipticity_limit: 1e4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, r_outer: Option<f64>) -> Result<()> {
        for p in &self.p_schedule {
            check_exponent(*p)?;
        }
        if self.p_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(
                "p_schedule must be strictly decreasing".into(),
            ));
        }
        if !(self.energy_tolerance > 0.0 && self.cauchy_tolerance > 0.0 && self.mu_final >= 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.max_iterations == 0 || self.cg_max_iterations == 0 {
            return Err(Error::Config("iteration limits must be positive".into()));
        }
        if !(self.annulus[0] > 0.0 && self.annulus[0] < self.annulus[1]) {
            return Err(Error::Config(format!("invalid annulus {:?}", self.annulus)));
        }
        if let Some(r) = r_outer {
            if !(self.eps_inner > 0.0 && self.eps_inner < r / 4.0) {
                return Err(Error::Config(format!(
                    "eps_inner = {} must lie in (0, R/4) with R = {r}",
                    self.eps_inner
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub set: String,
    pub p: f64,
    pub capacity: f64,
    /// p-Dirichlet energy of the capacitary potential.
    pub energy: f64,
    pub residual: f64,
}
