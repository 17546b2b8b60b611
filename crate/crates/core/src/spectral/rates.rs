//! Large-deviation rates for the population in a moving window, and the
//! Gaussian tail estimates behind them.

use std::f64::consts::PI;

use crate::point::{self, Point};
use crate::quadrature::{integrate, Tolerance};
use crate::special::{bessel_i0e, norm_cdf};

/// `Λ_δ = λ + √(−2λ) δ` for `δ ≤ √(−2λ)`, else `δ²/2`.
///
/// `−Λ_δ` is the exponential growth rate of the number of particles beyond
/// `δ t` at time `t`; it vanishes at the front speed `δ = √(−λ/2)`.
pub fn big_lambda(lambda: f64, delta: f64) -> f64 {
    let s = (-2.0 * lambda).sqrt();
    if delta <= s {
        lambda + s * delta
    } else {
        0.5 * delta * delta
    }
}

/// `F(p) = −λ p − δ²/(2(1 − p))`: grow near the catalyst for a fraction `p`
/// of the time, then travel ballistically for the rest.
pub fn split_objective(lambda: f64, delta: f64, p: f64) -> f64 {
    -lambda * p - delta * delta / (2.0 * (1.0 - p))
}

/// Maximiser of [`split_objective`] on `[0, 1)`: `1 − δ/√(−2λ)` or 0.
pub fn p_opt(lambda: f64, delta: f64) -> f64 {
    let s = (-2.0 * lambda).sqrt();
    if delta < s {
        1.0 - delta / s
    } else {
        0.0
    }
}

/// `∫_t^∞ e^{−v²/2} v^{d−1} dv`.
pub fn gaussian_tail(t: f64, d: u32) -> f64 {
    assert!(d >= 1, "dimension must be ≥ 1");
    // v = t + w; the factor e^{−t²/2} is pulled out so large t do not underflow
    // the integrand before the prefactor is applied.
    let upper = if t > 5.0 { 60.0 / t } else { 12.0 + (-t).max(0.0) };
    let k = d as i32 - 1;
    let inner = integrate(
        |w| (-t * w - 0.5 * w * w).exp() * (t + w).powi(k),
        0.0,
        upper,
        Tolerance { abs: 0.0, rel: 1e-12 },
    )
    .value;
    (-0.5 * t * t).exp() * inner
}

/// `e^{−t²/2} t^{d−2}`, the leading behaviour of [`gaussian_tail`].
pub fn gaussian_tail_asymptote(t: f64, d: u32) -> f64 {
    (-0.5 * t * t).exp() * t.powi(d as i32 - 2)
}

/// `P_x(|B_t| ≥ R)` for Brownian motion in dimension `d ∈ {1, 2, 3}`.
pub fn ball_exit_probability(dim: usize, t: f64, radius: f64, x: &Point) -> f64 {
    assert!(t > 0.0 && radius > 0.0, "need t > 0 and R > 0");
    let rho = point::norm(x);
    let sd = t.sqrt();
    let tol = Tolerance { abs: 1e-15, rel: 1e-12 };
    let upper = radius + rho + 40.0 * sd;
    match dim {
        1 => norm_cdf((rho - radius) / sd) + norm_cdf(-(radius + rho) / sd),
        2 => integrate(|r| r / t * (-(r - rho).powi(2) / (2.0 * t)).exp() * bessel_i0e(r * rho / t), radius, upper, tol)
            .value,
        3 => {
            let density = |r: f64| {
                if rho == 0.0 {
                    (2.0 / PI).sqrt() * r * r / t.powf(1.5) * (-r * r / (2.0 * t)).exp()
                } else {
                    r / (rho * (2.0 * PI * t).sqrt())
                        * (-(r - rho).powi(2) / (2.0 * t)).exp()
                        * -(-2.0 * r * rho / t).exp_m1()
                }
            };
            integrate(density, radius, upper, tol).value
        }
        _ => panic!("dimension {dim} not supported"),
    }
}

/// Whether `P_x(|B_t| ≥ R) ≥ P_0(|B_t| ≥ R)` holds up to `1e−8`.
pub fn ball_tail_monotonicity(dim: usize, t: f64, radius: f64, x: &Point) -> bool {
    ball_exit_probability(dim, t, radius, x) >= ball_exit_probability(dim, t, radius, &point::ORIGIN) - 1e-8
}
