//! Metric definition files and raw array loading.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::grid::{GridMetric, Lattice, Sym3};
use super::warp::{SampledWarp, WarpKind, WarpedMetric};
use super::Metric;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayFormat {
    Csv,
    /// Flat little-endian 64-bit floats.
    Binary,
}

impl ArrayFormat {
    fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") | Some("txt") => ArrayFormat::Csv,
            _ => ArrayFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRef {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<ArrayFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub origin: [f64; 3],
    pub dims: [usize; 3],
}

/// Structured metric description, as read from a metric definition file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean {
        s_max: f64,
    },
    SpaceForm {
        a: f64,
        s_max: f64,
    },
    Sphere {
        k: f64,
        s_max: f64,
    },
    Schwarzschild {
        m: f64,
        s_max: f64,
    },
    Kinked {
        core_a: f64,
        r_kink: f64,
        slope: f64,
        s_max: f64,
    },
    AbsPerturbed {
        amplitude: f64,
        center: f64,
        s_max: f64,
    },
    Sampled {
        h: f64,
        modulus: f64,
        data: DataRef,
        #[serde(default)]
        s_max: Option<f64>,
    },
    /// Lattice field with six components `[xx, yy, zz, xy, xz, yz]` per node, x fastest.
    Grid {
        #[serde(rename = "box")]
        bbox: BoxSpec,
        h: f64,
        data: DataRef,
    },
    /// Flat lattice on an `n³` box centred at the origin.
    GridFlat {
        n: usize,
        h: f64,
    },
    /// A warped metric sampled in Cartesian chart coordinates on an `n³` box centred at the pole.
    GridFromWarp {
        warp: Box<MetricSpec>,
        n: usize,
        h: f64,
    },
}

impl MetricSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!(
                "metric definition, line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })
    }

    /// Builds the metric; relative data paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<Metric> {
        let warped =
            |kind: WarpKind, s_max: f64| WarpedMetric::new(kind, s_max).map(Metric::Warped);
        match self {
            MetricSpec::Euclidean { s_max } => warped(WarpKind::Euclidean, *s_max),
            MetricSpec::SpaceForm { a, s_max } => warped(WarpKind::SpaceForm { a: *a }, *s_max),
            MetricSpec::Sphere { k, s_max } => warped(WarpKind::Sphere { k: *k }, *s_max),
            MetricSpec::Schwarzschild { m, s_max } => {
                warped(WarpKind::Schwarzschild { m: *m }, *s_max)
            }
            MetricSpec::Kinked {
                core_a,
                r_kink,
                slope,
                s_max,
            } => warped(
                WarpKind::Kinked {
                    core_a: *core_a,
                    r_kink: *r_kink,
                    slope: *slope,
                },
                *s_max,
            ),
            MetricSpec::AbsPerturbed {
                amplitude,
                center,
                s_max,
            } => warped(
                WarpKind::AbsPerturbed {
                    amplitude: *amplitude,
                    center: *center,
                },
                *s_max,
            ),
            MetricSpec::Sampled {
                h,
                modulus,
                data,
                s_max,
            } => {
                let values = load_array(&resolve(base_dir, &data.path), data.format, None)?;
                let sw = SampledWarp::new(*h, values, *modulus)?;
                let r = s_max.unwrap_or(sw.r_max());
                warped(WarpKind::Sampled(sw), r)
            }
            MetricSpec::Grid { bbox, h, data } => {
                let lat = Lattice::new(bbox.origin, *h, bbox.dims)?;
                let n = lat.len();
                let raw = load_array(&resolve(base_dir, &data.path), data.format, Some(n * 6))?;
                let g = raw
                    .chunks_exact(6)
                    .map(|c| Sym3([c[0], c[1], c[2], c[3], c[4], c[5]]))
                    .collect();
                GridMetric::new(lat, g).map(Metric::Grid)
            }
            MetricSpec::GridFlat { n, h } => {
                Ok(Metric::Grid(GridMetric::flat(Lattice::centered(*n, *h)?)))
            }
            MetricSpec::GridFromWarp { warp, n, h } => match warp.build(base_dir)? {
                Metric::Warped(w) => w.to_grid(Lattice::centered(*n, *h)?).map(Metric::Grid),
                Metric::Grid(_) => {
                    Err(Error::Config("grid_from_warp needs a warped metric".into()))
                }
            },
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_metric(path: &Path) -> Result<Metric> {
    let text = std::fs::read_to_string(path)?;
    let spec = MetricSpec::from_json(&text)?;
    spec.build(path.parent().unwrap_or(Path::new(".")))
}

/// Reads a flat array; `expected` checks the declared length.
pub fn load_array(
    path: &Path,
    format: Option<ArrayFormat>,
    expected: Option<usize>,
) -> Result<Vec<f64>> {
    let fmt = format.unwrap_or_else(|| ArrayFormat::infer(path));
    let values = match fmt {
        ArrayFormat::Binary => {
            let bytes = std::fs::read(path)?;
            if bytes.len() % 8 != 0 {
                return Err(Error::Parse(format!(
                    "{}: {} bytes is not a whole number of 64-bit floats",
                    path.display(),
                    bytes.len()
                )));
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        }
        ArrayFormat::Csv => parse_csv_numbers(&std::fs::read_to_string(path)?, path)?,
    };
    if let Some(n) = expected {
        if values.len() != n {
            return Err(Error::Parse(format!(
                "{}: expected {n} values, found {}",
                path.display(),
                values.len()
            )));
        }
    }
    Ok(values)
}

fn parse_csv_numbers(text: &str, path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let v: f64 = tok.parse().map_err(|_| {
                Error::Parse(format!(
                    "{}:{}: cannot parse '{tok}' as a number",
                    path.display(),
                    ln + 1
                ))
            })?;
            out.push(v);
        }
    }
    Ok(out)
}

pub fn write_binary(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_closed_form_specs() {
        let m = MetricSpec::from_json(r#"{"kind":"space_form","a":1.0,"s_max":3.0}"#)
            .unwrap()
            .build(Path::new("."))
            .unwrap();
        match m {
            Metric::Warped(w) => assert!((w.warp(1.0) - 1f64.sinh()).abs() < 1e-15),
            _ => panic!(),
        }
        let err = MetricSpec::from_json("{\"kind\":\"space_form\",\n \"a\": }").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(MetricSpec::from_json(r#"{"kind":"warp_drive","s_max":1}"#).is_err());
    }

    #[test]
    fn sampled_and_grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let vals: Vec<f64> = (0..=100).map(|i| (i as f64 * 0.01).sin()).collect();
        write_binary(&dir.path().join("w.bin"), &vals).unwrap();
        let csv: String = vals.iter().map(|v| format!("{v:.17e}\n")).collect();
        std::fs::write(dir.path().join("w.csv"), format!("# warp samples\n{csv}")).unwrap();
        for name in ["w.bin", "w.csv"] {
            let spec = format!(
                r#"{{"kind":"sampled","h":0.01,"modulus":0.02,"data":{{"path":"{name}"}}}}"#
            );
            let m = MetricSpec::from_json(&spec)
                .unwrap()
                .build(dir.path())
                .unwrap();
            match m {
                Metric::Warped(w) => assert!((w.warp(0.5) - 0.5f64.sin()).abs() < 1e-8),
                _ => panic!(),
            }
        }
        let n = 4usize;
        let field: Vec<f64> = (0..n * n * n)
            .flat_map(|_| [2.0, 2.0, 2.0, 0.0, 0.0, 0.0])
            .collect();
        write_binary(&dir.path().join("g.bin"), &field).unwrap();
        let spec = r#"{"kind":"grid","box":{"origin":[0,0,0],"dims":[4,4,4]},"h":0.5,"data":{"path":"g.bin"}}"#;
        match MetricSpec::from_json(spec)
            .unwrap()
            .build(dir.path())
            .unwrap()
        {
            Metric::Grid(g) => assert_eq!(g.ellipticity(), (2.0, 2.0)),
            _ => panic!(),
        }
        let short = r#"{"kind":"grid","box":{"origin":[0,0,0],"dims":[5,4,4]},"h":0.5,"data":{"path":"g.bin"}}"#;
        assert!(MetricSpec::from_json(short)
            .unwrap()
            .build(dir.path())
            .is_err());
    }
}
