use std::f64::consts::PI;

use crate::point::{self, Point};
use crate::special::bessel_k0;
use crate::{Error, Result};

/// Resolvent density `G_α(x, y) = ∫_0^∞ e^{−αt} p_t(x, y) dt` of Brownian
/// motion with generator `½Δ`.
///
/// * d = 1: `e^{−√(2α)|x−y|} / √(2α)` (α > 0)
/// * d = 2: `K₀(√(2α)|x−y|) / π` (α > 0, x ≠ y)
/// * d = 3: `e^{−√(2α)|x−y|} / (2π|x−y|)` (α ≥ 0, x ≠ y)
pub fn green_resolvent(dim: usize, alpha: f64, x: &Point, y: &Point) -> Result<f64> {
    green_radial(dim, alpha, point::dist(x, y))
}

pub fn green_radial(dim: usize, alpha: f64, r: f64) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("resolvent parameter {alpha} must be ≥ 0")));
    }
    let k = (2.0 * alpha).sqrt();
    match dim {
        1 => {
            if alpha == 0.0 {
                return Err(Error::InvalidParameter("the line is recurrent: need α > 0".into()));
            }
            Ok((-k * r).exp() / k)
        }
        2 => {
            if alpha == 0.0 {
                return Err(Error::InvalidParameter("the plane is recurrent: need α > 0".into()));
            }
            if r == 0.0 {
                return Err(Error::SingularKernel(2));
            }
            Ok(bessel_k0(k * r) / PI)
        }
        3 => {
            if r == 0.0 {
                return Err(Error::SingularKernel(3));
            }
            Ok((-k * r).exp() / (2.0 * PI * r))
        }
        _ => Err(Error::InvalidParameter(format!("dimension {dim} not in 1..=3"))),
    }
}

/// Leading far-field behaviour
/// `(1/√(2α)) (√(2α) / (2π r))^{(d−1)/2} e^{−√(2α) r}` as `r → ∞`.
pub fn green_far_field(dim: usize, alpha: f64, r: f64) -> f64 {
    let k = (2.0 * alpha).sqrt();
    (k / (2.0 * PI * r)).powf(0.5 * (dim as f64 - 1.0)) * (-k * r).exp() / k
}
