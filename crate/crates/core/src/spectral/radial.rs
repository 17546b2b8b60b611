//! s-wave bound states in three dimensions for the delta shell `c δ_R` and
//! the ball potential `c 1{|x| ≤ R}`.
//!
//! With `w(r) = r u(r)` the radial equation is `−½ w'' − V w = λ w`, `w(0) = 0`.
//! For the shell, `w'` jumps by `−2c w(R)` at `R`; matching `sinh(s r)` inside
//! to `e^{−s r}` outside gives `s (1 + coth(sR)) = 2c`. For the ball,
//! matching `sin(k r)` to `e^{−s r}` with `k = √(2(λ + c))` gives
//! `k cot(kR) = −s`.

use std::f64::consts::PI;

use super::{Eigenfunction, GridLayout, SpectralMethod, SpectralResult};
use crate::quadrature::{integrate, Tolerance};
use crate::{Error, Result};

fn check(c: f64, radius: f64) -> Result<()> {
    if c > 0.0 && radius > 0.0 && c.is_finite() && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("need c > 0 and R > 0, got c = {c}, R = {radius}")))
    }
}

fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi.abs() {
            break;
        }
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Critical shell coupling `c_* = 1/(2R)`.
pub fn shell_threshold(radius: f64) -> f64 {
    0.5 / radius
}

/// Critical ball coupling `c_* = π²/(8R²)`.
pub fn ball_threshold(radius: f64) -> f64 {
    PI * PI / (8.0 * radius * radius)
}

// 1 + coth(x) = 2 / (1 − e^{−2x})
fn one_plus_coth(x: f64) -> f64 {
    -2.0 / (-2.0 * x).exp_m1()
}

/// Ground state of `c δ_R` in three dimensions from the s-wave matching
/// condition; `λ = 0` (no bound state) when `cR ≤ 1/2`.
pub fn lambda_delta_shell_d3(c: f64, radius: f64) -> Result<SpectralResult> {
    check(c, radius)?;
    if c <= shell_threshold(radius) {
        return Ok(SpectralResult::no_bound_state(SpectralMethod::Transcendental));
    }
    let g = |s: f64| s * one_plus_coth(s * radius) - 2.0 * c;
    let s = bisect(g, 1e-300, c);
    let profile = radial_profile(
        s,
        radius,
        |r| if r == 0.0 { s } else { (s * r).sinh() / r },
        (s * radius).sinh(),
    );
    Ok(SpectralResult::new(-0.5 * s * s, SpectralMethod::Transcendental, Some(profile)))
}

/// Root of the printed shell equation `2s e^{2sR}/(e^{2sR} − 1) = c`, kept
/// for reporting next to the matching-condition root. It exists only for
/// `cR > 1`. Returns `λ`.
pub fn shell_printed_form_root(c: f64, radius: f64) -> Option<f64> {
    if !(c > 0.0 && radius > 0.0) || c * radius <= 1.0 {
        return None;
    }
    let s = bisect(|s| s * one_plus_coth(s * radius) - c, 1e-300, c);
    Some(-0.5 * s * s)
}

// Ground-state bracket in s: kR runs over (π/2, π].
fn ball_bracket(c: f64, radius: f64) -> (f64, f64) {
    let hi = (2.0 * (c - ball_threshold(radius))).sqrt();
    let lo_sq = 2.0 * c - (PI / radius).powi(2);
    (if lo_sq > 0.0 { lo_sq.sqrt() } else { 0.0 }, hi)
}

/// Ground state of `c 1{|x| ≤ R}` in three dimensions; `λ = 0` when
/// `c ≤ π²/(8R²)`, otherwise `λ ∈ (c_* − c, 0)`.
pub fn lambda_ball_d3(c: f64, radius: f64) -> Result<SpectralResult> {
    check(c, radius)?;
    if c <= ball_threshold(radius) {
        return Ok(SpectralResult::no_bound_state(SpectralMethod::Transcendental));
    }
    let k_of = |s: f64| (2.0 * c - s * s).max(0.0).sqrt();
    let f = |s: f64| {
        let k = k_of(s);
        k * (k * radius).cos() + s * (k * radius).sin()
    };
    let (lo, hi) = ball_bracket(c, radius);
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::BracketFailure(format!("ball matching: f({lo}) = {}, f({hi}) = {}", f(lo), f(hi))));
    }
    let s = bisect(f, lo, hi);
    let k = k_of(s);
    let profile = radial_profile(
        s,
        radius,
        |r| if r == 0.0 { k } else { (k * r).sin() / r },
        (k * radius).sin(),
    );
    Ok(SpectralResult::new(-0.5 * s * s, SpectralMethod::Transcendental, Some(profile)))
}

/// Root of the printed ball equation `tan(kR)/(kR) = −1/√(−2λ)` on the
/// ground-state branch, if it has one there. Returns `λ`.
pub fn ball_printed_form_root(c: f64, radius: f64) -> Option<f64> {
    if !(c > 0.0 && radius > 0.0) || c <= ball_threshold(radius) {
        return None;
    }
    let p = |s: f64| {
        let k = (2.0 * c - s * s).max(0.0).sqrt();
        s * (k * radius).sin() + k * radius * (k * radius).cos()
    };
    let (lo, hi) = ball_bracket(c, radius);
    if !(p(lo) < 0.0 && p(hi) > 0.0) {
        return None;
    }
    let s = bisect(p, lo, hi);
    Some(-0.5 * s * s)
}

/// Tabulates `u(r)` (interior branch `inner`, exterior `w_R e^{−s(r−R)}/r`)
/// and normalises `4π ∫ u² r² dr = 1`.
fn radial_profile(s: f64, radius: f64, inner: impl Fn(f64) -> f64, w_at_radius: f64) -> Eigenfunction {
    let u = |r: f64| {
        if r <= radius {
            inner(r)
        } else {
            w_at_radius * (-s * (r - radius)).exp() / r
        }
    };
    let outer = radius + 40.0 / s;
    let tol = Tolerance::rel(1e-12);
    let norm2 = 4.0 * PI
        * (integrate(|r| (u(r) * r).powi(2), 0.0, radius, tol).value
            + integrate(|r| (u(r) * r).powi(2), radius, outer, tol).value);
    let scale = norm2.sqrt().recip();
    let n = 8000;
    let nodes: Vec<f64> = (0..=n).map(|i| outer * i as f64 / n as f64).collect();
    let values = nodes.iter().map(|&r| scale * u(r)).collect();
    Eigenfunction::Grid { layout: GridLayout::Radial { dim: 3 }, nodes, values, s }
}
