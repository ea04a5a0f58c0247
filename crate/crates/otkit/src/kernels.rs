//! Radial kernels, Gibbs kernel entries, kernel pseudo-metrics, and the
//! Hölder constants attached to each kernel family.

use crate::{OtError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RadialKernel {
    Gauss { length_scale: f64 },
    Laplace { length_scale: f64 },
    Imq { c: f64 },
    Energy,
}

/// Exponent alpha and constant c of the kernel Hölder inequality
/// d_k(x, y) <= c * ||x - y||^alpha.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderConstants {
    pub alpha: f64,
    pub c_holder: f64,
}

impl RadialKernel {
    pub fn gauss(length_scale: f64) -> Result<Self> {
        check_positive(length_scale, "length scale")?;
        Ok(Self::Gauss { length_scale })
    }

    pub fn laplace(length_scale: f64) -> Result<Self> {
        check_positive(length_scale, "length scale")?;
        Ok(Self::Laplace { length_scale })
    }

    pub fn imq(c: f64) -> Result<Self> {
        check_positive(c, "IMQ parameter c")?;
        Ok(Self::Imq { c })
    }

    /// True when the radial profile is smooth at t = 0 (no kink).
    pub fn smooth_at_zero(&self) -> bool {
        matches!(self, Self::Gauss { .. } | Self::Imq { .. })
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match *self {
            Self::Gauss { length_scale } => (-(t * t) / (length_scale * length_scale)).exp(),
            Self::Laplace { length_scale } => (-t / length_scale).exp(),
            Self::Imq { c } => 1.0 / (t * t + c * c).sqrt(),
            Self::Energy => -t,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Self::Energy)
    }

    pub fn holder_constants(&self) -> HolderConstants {
        match *self {
            Self::Gauss { length_scale } => HolderConstants {
                alpha: 1.0,
                c_holder: 2.0 / (length_scale * length_scale),
            },
            Self::Laplace { length_scale } => HolderConstants {
                alpha: 0.5,
                c_holder: 2.0 / length_scale,
            },
            Self::Imq { c } => HolderConstants { alpha: 1.0, c_holder: 2.0 / c.powi(4) },
            Self::Energy => HolderConstants { alpha: 0.5, c_holder: std::f64::consts::SQRT_2 },
        }
    }

    /// sqrt(2k(0) - 2k(t)): the kernel-induced pseudo-metric between points
    /// at radial distance t.
    pub fn pseudo_metric(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(OtError::InvalidParameter(format!(
                "pseudo_metric needs t >= 0, got {t}"
            )));
        }
        let sq = 2.0 * self.evaluate(0.0) - 2.0 * self.evaluate(t);
        if sq < -1e-14 {
            return Err(OtError::Numeric(format!(
                "negative squared pseudo-metric {sq}; kernel parameterization is not PSD"
            )));
        }
        Ok(sq.max(0.0).sqrt())
    }
}

fn check_positive(v: f64, name: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(OtError::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Gibbs kernel entry e^{-lambda t^r}.
pub fn gibbs_entry(exponent: f64, lambda: f64, t: f64) -> f64 {
    debug_assert!(lambda > 0.0 && t >= 0.0);
    let tr = if exponent == 2.0 {
        t * t
    } else if exponent == 1.0 {
        t
    } else {
        t.powf(exponent)
    };
    (-lambda * tr).exp()
}
