//! Quasi-local and isoperimetric masses, isoperimetric profiles and
//! rigidity diagnostics.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub mod iso;
pub mod profile;
pub mod rigidity;

pub use iso::{iso_mass_estimate, Certificate, MassReport, SetFamily, SetRecord, Trend};
pub use profile::{radial_profile, DiniSample, IsoProfile};
pub use rigidity::{rigidity_probe, RigidityDiagnostic, RigidityStatus};

/// Volume of a Euclidean round ball of perimeter `P`: `P^{3/2}/(6√π)`.
pub fn euclidean_volume(perimeter: f64) -> f64 {
    perimeter.powf(1.5) / (6.0 * PI.sqrt())
}

/// `m_QL(E) = (2/P)(|E| − P^{3/2}/(6√π))`.
pub fn quasi_local_mass(volume: f64, perimeter: f64) -> Result<f64> {
    if !(perimeter > 0.0) || !perimeter.is_finite() {
        return Err(Error::Domain(format!(
            "perimeter must be positive, got {perimeter}"
        )));
    }
    Ok(2.0 / perimeter * (volume - euclidean_volume(perimeter)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_ball_and_arithmetic() {
        assert!(quasi_local_mass(4.0 * PI / 3.0, 4.0 * PI).unwrap().abs() < 1e-15);
        let m = quasi_local_mass(5.0, 4.0 * PI).unwrap();
        assert!((m - 0.12911).abs() < 1e-5, "{m}");
        assert!(quasi_local_mass(1.0, 0.0).is_err());
        assert!(quasi_local_mass(1.0, -2.0).is_err());
    }

    proptest! {
        #[test]
        fn zero_on_the_equality_curve(p in 1e-3f64..1e6) {
            let m = quasi_local_mass(euclidean_volume(p), p).unwrap();
            prop_assert!(m.abs() <= 1e-12 * p.sqrt());
        }

        #[test]
        fn scales_linearly(v in 0.1f64..100.0, p in 0.1f64..100.0, lam in 0.1f64..10.0) {
            let a = quasi_local_mass(v, p).unwrap();
            let b = quasi_local_mass(lam.powi(3) * v, lam * lam * p).unwrap();
            prop_assert!((b - lam * a).abs() <= 1e-10 * (1.0 + b.abs() + (v / p.sqrt()) * lam));
        }
    }
}
