use std::f64::consts::{FRAC_2_PI, FRAC_PI_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Increasing bijection from the support of the effects onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportTransform {
    /// `[lo, hi]` onto `[-1, 1]`.
    Affine { lo: f64, hi: f64 },
    /// `[0, inf)` onto `[-1, 1)` by `2z / (1 + z) - 1`.
    PositiveHalfLine,
    /// The real line onto `(-1, 1)` by `(2 / pi) arctan z`.
    RealLine,
    Identity,
}

impl SupportTransform {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SupportTransform::Affine { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                Err(Error::InvalidParams(format!("affine transform needs lo < hi, got [{lo}, {hi}]")))
            }
            _ => Ok(()),
        }
    }

    fn domain_name(&self) -> &'static str {
        match self {
            SupportTransform::Affine { .. } => "[lo, hi]",
            SupportTransform::PositiveHalfLine => "[0, inf)",
            SupportTransform::RealLine => "(-inf, inf)",
            SupportTransform::Identity => "[-1, 1]",
        }
    }

    fn in_domain(&self, z: f64) -> bool {
        match *self {
            SupportTransform::Affine { lo, hi } => (lo..=hi).contains(&z),
            SupportTransform::PositiveHalfLine => z >= 0.0,
            SupportTransform::RealLine => !z.is_nan(),
            SupportTransform::Identity => (-1.0..=1.0).contains(&z),
        }
    }

    fn formula(&self, z: f64) -> f64 {
        match *self {
            SupportTransform::Affine { lo, hi } => (z - 0.5 * (lo + hi)) / (0.5 * (hi - lo)),
            SupportTransform::PositiveHalfLine => {
                if z == f64::INFINITY {
                    1.0
                } else {
                    2.0 * z / (1.0 + z) - 1.0
                }
            }
            SupportTransform::RealLine => FRAC_2_PI * z.atan(),
            SupportTransform::Identity => z,
        }
    }

    pub fn apply(&self, z: f64) -> Result<f64> {
        if !self.in_domain(z) {
            return Err(Error::Domain {
                value: z,
                domain: self.domain_name(),
            });
        }
        Ok(self.formula(z).clamp(-1.0, 1.0))
    }

    /// Like [`apply`](Self::apply), but points outside the domain map to the
    /// nearest end of `[-1, 1]`. Used for estimated effects, which can fall
    /// slightly outside the true support; order relative to interior points is kept.
    pub fn apply_saturating(&self, z: f64) -> f64 {
        if z.is_nan() {
            return f64::NAN;
        }
        match *self {
            SupportTransform::PositiveHalfLine if z < 0.0 => -1.0,
            _ => self.formula(z).clamp(-1.0, 1.0),
        }
    }

    /// Inverse map; the open ends of unbounded supports return `+-inf`.
    pub fn invert(&self, u: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&u) {
            return Err(Error::Domain {
                value: u,
                domain: "[-1, 1]",
            });
        }
        Ok(match *self {
            SupportTransform::Affine { lo, hi } => 0.5 * (lo + hi) + u * 0.5 * (hi - lo),
            SupportTransform::PositiveHalfLine => {
                if u == 1.0 {
                    f64::INFINITY
                } else {
                    (1.0 + u) / (1.0 - u)
                }
            }
            SupportTransform::RealLine => {
                if u.abs() == 1.0 {
                    u * f64::INFINITY
                } else {
                    (FRAC_PI_2 * u).tan()
                }
            }
            SupportTransform::Identity => u,
        })
    }
}
