//! Canned initial densities, sampled on the radii of the simulation grid.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_radial_csv;
use crate::model::RadialProfile;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `u₀ ≡ scale`.
    Constant {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `u₀ = 2 (1 − (r/R)²) · scale`.
    Quadratic {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `height` on `[0, plateau_radius]`, a cubic Hermite tail of width
    /// `tail_width` falling to zero with zero slope, and zero beyond.
    Plateau {
        height: f64,
        plateau_radius: f64,
        tail_width: f64,
    },
    /// Samples read from a CSV file with header `r,u`.
    Csv { path: PathBuf },
}

impl InitialData {
    pub fn validate(&self, radius: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            InitialData::Constant { scale } | InitialData::Quadratic { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return bad(format!("scale = {scale} must be positive"));
                }
            }
            InitialData::Plateau { height, plateau_radius, tail_width } => {
                if !(height > 0.0 && height.is_finite()) {
                    return bad(format!("plateau height = {height} must be positive"));
                }
                if !(plateau_radius > 0.0 && tail_width > 0.0) {
                    return bad("plateau_radius and tail_width must be positive".into());
                }
                if plateau_radius + tail_width > radius {
                    return bad(format!(
                        "plateau_radius + tail_width = {} exceeds R = {radius}",
                        plateau_radius + tail_width
                    ));
                }
            }
            InitialData::Csv { .. } => {}
        }
        Ok(())
    }

    /// Density at radius `r` for the analytic families.
    pub fn density(&self, r: f64, radius: f64) -> Option<f64> {
        match *self {
            InitialData::Constant { scale } => Some(scale),
            InitialData::Quadratic { scale } => {
                let x = r / radius;
                Some(2.0 * (1.0 - x * x) * scale)
            }
            InitialData::Plateau { height, plateau_radius, tail_width } => Some(if r <= plateau_radius {
                height
            } else if r >= plateau_radius + tail_width {
                0.0
            } else {
                let x = (r - plateau_radius) / tail_width;
                height * (1.0 - x * x * (3.0 - 2.0 * x))
            }),
            InitialData::Csv { .. } => None,
        }
    }

    /// Samples the family at `radii`, or reads the CSV (paths relative to `base`).
    pub fn sample(&self, radii: &[f64], radius: f64, base: &Path) -> Result<RadialProfile> {
        self.validate(radius)?;
        match self {
            InitialData::Csv { path } => read_radial_csv(&base.join(path)),
            _ => {
                let u = radii.iter().map(|&r| self.density(r, radius).expect("analytic family")).collect();
                RadialProfile::new(radii.to_vec(), u)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_is_c1_and_vanishes_at_tail_end() {
        let f = InitialData::Plateau { height: 3.0, plateau_radius: 0.2, tail_width: 0.3 };
        let d = |r| f.density(r, 1.0).unwrap();
        assert_eq!(d(0.1), 3.0);
        assert_eq!(d(0.5), 0.0);
        assert_eq!(d(0.9), 0.0);
        let h = 1e-7;
        assert!(((d(0.2 + h) - d(0.2)) / h).abs() < 1e-4);
        assert!(((d(0.5) - d(0.5 - h)) / h).abs() < 1e-4);
        assert!((d(0.35) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(InitialData::Plateau { height: 1.0, plateau_radius: 0.6, tail_width: 0.5 }.validate(1.0).is_err());
        assert!(InitialData::Constant { scale: 0.0 }.validate(1.0).is_err());
        assert!(InitialData::Quadratic { scale: 1.0 }.validate(1.0).is_ok());
    }

    #[test]
    fn config_syntax() {
        let f: InitialData = serde_json::from_str(r#"{"family":"quadratic"}"#).unwrap();
        assert_eq!(f, InitialData::Quadratic { scale: 1.0 });
        assert!(serde_json::from_str::<InitialData>(r#"{"family":"quadratic","bogus":1}"#).is_err());
        assert!(serde_json::from_str::<InitialData>(r#"{"family":"gaussian"}"#).is_err());
    }
}
