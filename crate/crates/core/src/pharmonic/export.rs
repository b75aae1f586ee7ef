//! CSV and flat binary dumps of potential fields.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::field::{FieldData, FieldKind, PotentialField};
use crate::error::{Error, Result};
use crate::metrics::io::write_binary;

/// Round-trip safe formatting with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn kind_name(k: FieldKind) -> &'static str {
    match k {
        FieldKind::Green => "G",
        FieldKind::Log => "w",
    }
}

/// `s,value` rows for the radial samples of a field.
pub fn radial_csv(f: &PotentialField) -> Result<String> {
    let r = f
        .as_radial()
        .ok_or_else(|| Error::Unsupported("CSV export covers radial fields".into()))?;
    let name = kind_name(f.kind);
    let mut out = String::new();
    let _ = writeln!(out, "# s: centre-sphere coordinate radius");
    let _ = writeln!(
        out,
        "# value: {} ({}), p = {}",
        name,
        if name == "G" {
            "normalised Green function"
        } else {
            "log-transformed potential"
        },
        r.p.map_or("limit".to_string(), fmt17)
    );
    let _ = writeln!(out, "s,value");
    for &s in &r.radii {
        let v = match f.kind {
            FieldKind::Green => r.green(s)?,
            FieldKind::Log => r.w(s)?,
        };
        let _ = writeln!(out, "{},{}", fmt17(s), fmt17(v));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LatticeShape {
    pub dims: [usize; 3],
    pub origin: [f64; 3],
    pub h: f64,
    pub order: &'static str,
    pub dtype: &'static str,
    pub kind: FieldKind,
    pub p: Option<f64>,
    pub pole: [f64; 3],
    pub r_outer: f64,
    pub eps_inner: f64,
}

/// Writes the node values to `path` (little-endian `f64`, x fastest) and
/// the shape descriptor to `path` with `.json` appended.
pub fn write_lattice(f: &PotentialField, path: &Path) -> Result<()> {
    let l = match &f.data {
        FieldData::Lattice(l) => l,
        FieldData::Radial(_) => {
            return Err(Error::Unsupported(
                "binary dumps cover lattice fields".into(),
            ))
        }
    };
    let values: Vec<f64> = match (f.kind, l.p) {
        (FieldKind::Log, _) => l.w.clone(),
        (FieldKind::Green, Some(p)) => l.w.iter().map(|w| (-w / (p - 1.0)).exp()).collect(),
        (FieldKind::Green, None) => {
            return Err(Error::Unsupported("the limit has no Green function".into()))
        }
    };
    write_binary(path, &values)?;
    let lat = l.lattice();
    let shape = LatticeShape {
        dims: lat.dims,
        origin: lat.origin,
        h: lat.h,
        order: "x-fastest",
        dtype: "f64le",
        kind: f.kind,
        p: l.p,
        pole: l.pole,
        r_outer: l.r_outer,
        eps_inner: l.eps_inner,
    };
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    let text = serde_json::to_string_pretty(&shape).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(side, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::WarpedMetric;
    use crate::pharmonic::radial::radial_green;

    #[test]
    fn csv_round_trips_values() {
        let m = WarpedMetric::euclidean(10.0);
        let f = PotentialField::radial(FieldKind::Green, radial_green(&m, 1.5, 10.0).unwrap());
        let csv = radial_csv(&f).unwrap();
        let row = csv
            .lines()
            .find(|l| !l.starts_with('#') && !l.starts_with('s'))
            .unwrap();
        let mut it = row.split(',').map(|x| x.parse::<f64>().unwrap());
        let (s, v) = (it.next().unwrap(), it.next().unwrap());
        assert_eq!(v, f.as_radial().unwrap().green(s).unwrap());
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
    }
}
