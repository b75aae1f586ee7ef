use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use imcf_cli::{exit, ExperimentKind, RunOptions, Scenario, Suite};

#[derive(Parser)]
#[command(
    name = "imcf",
    version,
    about = "Weak inverse mean curvature flow laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: scenario `outputs.dir`, else `out`].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the compute kernels.
    #[arg(long, global = true, env = "IMCF_THREADS")]
    threads: Option<usize>,
    /// Multiplies every verdict tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Describe a metric: warp samples or lattice summary.
    Metric,
    /// Green function at a fixed p, or the p → 1 limit.
    Green,
    /// Flow report: sublevel geometry, Hawking mass and verdicts.
    Flow,
    /// Quasi-local and isoperimetric mass of a set family.
    Mass,
    /// Radial isoperimetric profile.
    Profile,
    /// Acceptance suite.
    Verify {
        /// radial, grid or full [default: scenario `suite`, else radial].
        suite: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::USAGE as u8)
        }
    }
}

/// `Err` is a usage or validation error; computation failures are reported
/// through the outcome.
fn real_main(cli: Cli) -> anyhow::Result<i32> {
    let (kind, suite) = match cli.command {
        Command::Metric => (ExperimentKind::Metric, None),
        Command::Green => (ExperimentKind::Green, None),
        Command::Flow => (ExperimentKind::Flow, None),
        Command::Mass => (ExperimentKind::Mass, None),
        Command::Profile => (ExperimentKind::Profile, None),
        Command::Verify { suite } => (ExperimentKind::Verify, suite),
    };
    let c = cli.common;
    if !(c.tolerance_scale > 0.0 && c.tolerance_scale.is_finite()) {
        anyhow::bail!("--tolerance-scale must be positive");
    }
    let mut loaded = match &c.config {
        Some(p) => Scenario::load(p)?,
        None if kind == ExperimentKind::Verify => Scenario::empty(kind).in_place(),
        None => anyhow::bail!("the `{}` subcommand needs --config", kind.name()),
    };
    if let Some(s) = suite {
        s.parse::<Suite>().map_err(anyhow::Error::msg)?;
        loaded.scenario.suite = Some(s);
    }
    loaded.scenario.validate(kind, &loaded.base_dir)?;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring threads")?;
    }
    let out_dir = c
        .out
        .or_else(|| loaded.scenario.outputs.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let opts = RunOptions {
        out_dir,
        tolerance_scale: c.tolerance_scale,
        print: true,
    };
    let outcome = imcf_cli::run(kind, &loaded, &opts)?;
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
        eprintln!(
            "partial outputs flagged in {}",
            outcome.summary_path.display()
        );
        return Ok(exit::RUNTIME);
    }
    eprintln!(
        "{}: {} ({} artifacts, summary {})",
        kind.name(),
        if outcome.pass { "pass" } else { "FAIL" },
        outcome.artifacts.len(),
        outcome.summary_path.display()
    );
    Ok(if outcome.pass {
        exit::OK
    } else {
        exit::VERDICT_FAILED
    })
}
