//! Scenario files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use imcf_core::imcf::{CoareaRegion, FlowTolerances, TGrid};
use imcf_core::mass::SetFamily;
use imcf_core::metrics::io::MetricSpec;
use imcf_core::pharmonic::SolverConfig;

use crate::verify::Suite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Metric,
    Green,
    Flow,
    Mass,
    Profile,
    Verify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Metric => "metric",
            ExperimentKind::Green => "green",
            ExperimentKind::Flow => "flow",
            ExperimentKind::Mass => "mass",
            ExperimentKind::Profile => "profile",
            ExperimentKind::Verify => "verify",
        }
    }
}

/// Green-function run: a fixed exponent, or the `p → 1` limit when `p` is absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenOptions {
    pub p: Option<f64>,
    /// Outer radius `R`; defaults to the chart radius of warped metrics.
    pub r_outer: Option<f64>,
    pub pole: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowOptions {
    pub t_grid: TGrid,
    /// Curvature defect `δ` with `R ≥ −δ`.
    pub delta: f64,
    /// Tolerance for the rigidity probe.
    pub rigidity_tolerance: f64,
    /// Optional coarea check of the flow potential.
    pub coarea: Option<CoareaRegion>,
    pub coarea_levels: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            t_grid: TGrid::default(),
            delta: 0.0,
            rigidity_tolerance: 1e-9,
            coarea: None,
            coarea_levels: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOptions {
    pub volumes: Vec<f64>,
    pub eps: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            volumes: (-6..=6).map(|k| 2f64.powf(k as f64 / 2.0)).collect(),
            eps: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    /// Output directory; `--out` takes precedence.
    pub dir: Option<PathBuf>,
    /// File name prefix; defaults to the experiment kind.
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Defaults to the subcommand.
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub green: GreenOptions,
    #[serde(default)]
    pub flow: FlowOptions,
    #[serde(default)]
    pub mass: Option<SetFamily>,
    #[serde(default)]
    pub profile: ProfileOptions,
    #[serde(default)]
    pub suite: Option<String>,
    #[serde(default)]
    pub outputs: Outputs,
    /// Only orders sampling; all computations are deterministic.
    #[serde(default)]
    pub seed: u64,
}

/// Scenario with its source text, base directory and hash.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
    /// SHA-256 of the scenario file bytes (of the canonical JSON when built in place).
    pub hash: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Scenario {
    pub fn empty(kind: ExperimentKind) -> Self {
        Scenario {
            kind: Some(kind),
            metric: None,
            solver: SolverConfig::default(),
            green: GreenOptions::default(),
            flow: FlowOptions::default(),
            mass: None,
            profile: ProfileOptions::default(),
            suite: None,
            outputs: Outputs::default(),
            seed: 0,
        }
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| anyhow::anyhow!("scenario, line {} column {}: {e}", e.line(), e.column()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Loaded> {
        let bytes =
            std::fs::read(path).with_context(|| format!("reading scenario {}", path.display()))?;
        let text = std::str::from_utf8(&bytes)
            .with_context(|| format!("scenario {} is not UTF-8", path.display()))?;
        let scenario = Self::parse(text).with_context(|| format!("in {}", path.display()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Loaded {
            scenario,
            base_dir,
            hash: sha256_hex(&bytes),
        })
    }

    pub fn in_place(self) -> Loaded {
        let bytes = serde_json::to_vec(&self).expect("scenario serialises");
        Loaded {
            scenario: self,
            base_dir: PathBuf::from("."),
            hash: sha256_hex(&bytes),
        }
    }

    /// Parse-stage validation of everything that does not need the metric.
    pub fn validate(&self, kind: ExperimentKind, base_dir: &Path) -> anyhow::Result<()> {
        if let Some(k) = self.kind {
            if k != kind {
                bail!(
                    "scenario kind `{}` does not match the `{}` subcommand",
                    k.name(),
                    kind.name()
                );
            }
        }
        if let Some(p) = self.green.p {
            if !(p > 1.0 && p < 3.0) {
                bail!("exponent p = {p} must lie in (1, 3)");
            }
        }
        self.solver.validate(None).context("solver configuration")?;
        if !(self.flow.t_grid.step > 0.0) {
            bail!("t-grid step must be positive");
        }
        if !(self.flow.delta >= 0.0) {
            bail!("defect delta must be non-negative");
        }
        if let Some(s) = &self.suite {
            s.parse::<Suite>().map_err(anyhow::Error::msg)?;
        }
        let needs_metric = match kind {
            ExperimentKind::Verify => false,
            ExperimentKind::Mass => !matches!(self.mass, Some(SetFamily::Records { .. })),
            _ => true,
        };
        if needs_metric && self.metric.is_none() {
            bail!("the `{}` experiment needs a metric", kind.name());
        }
        if kind == ExperimentKind::Mass && self.mass.is_none() {
            bail!("the `mass` experiment needs a set family");
        }
        if let Some(m) = &self.metric {
            check_data_files(m, base_dir)?;
        }
        Ok(())
    }

    pub fn tolerances(&self, lattice: bool, scale: f64) -> FlowTolerances {
        let t = if lattice {
            FlowTolerances::lattice()
        } else {
            FlowTolerances::radial()
        };
        t.scaled(scale)
    }
}

fn check_data_files(m: &MetricSpec, base: &Path) -> anyhow::Result<()> {
    let path = match m {
        MetricSpec::Sampled { data, .. } | MetricSpec::Grid { data, .. } => &data.path,
        MetricSpec::GridFromWarp { warp, .. } => return check_data_files(warp, base),
        _ => return Ok(()),
    };
    let full = if path.is_absolute() {
        path.clone()
    } else {
        base.join(path)
    };
    if !full.is_file() {
        bail!("metric data file {} does not exist", full.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_positions() {
        let e = Scenario::parse("{\n  \"kind\": \"flow\",\n  \"bogus\": 1\n}")
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 3"), "{e}");
    }

    #[test]
    fn exponent_outside_range_is_rejected() {
        let s = Scenario::parse(
            r#"{"metric": {"kind": "euclidean", "s_max": 10}, "green": {"p": 3.5}}"#,
        )
        .unwrap();
        assert!(s.validate(ExperimentKind::Green, Path::new(".")).is_err());
        let s = Scenario::parse(
            r#"{"metric": {"kind": "euclidean", "s_max": 10}, "green": {"p": 1.5}}"#,
        )
        .unwrap();
        s.validate(ExperimentKind::Green, Path::new(".")).unwrap();
    }

    #[test]
    fn kind_must_match_the_subcommand() {
        let s = Scenario::parse(
            r#"{"kind": "mass", "mass": {"family": "centered_balls", "radii": [1]}}"#,
        )
        .unwrap();
        assert!(s.validate(ExperimentKind::Flow, Path::new(".")).is_err());
    }

    #[test]
    fn hash_is_stable() {
        let a = Scenario::empty(ExperimentKind::Verify).in_place().hash;
        let b = Scenario::empty(ExperimentKind::Verify).in_place().hash;
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
    }
}
