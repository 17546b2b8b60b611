//! Principal eigenvalue `λ` of `−½Δ − ν` and its ground state `h`.
//!
//! `λ ≤ 0` is the bottom of the spectrum; `−λ` is the growth rate of the
//! particle population and `√(−λ/2)` the speed of its front. Solvers are
//! provided in several independent flavours so they can check each other:
//! closed forms, transcendental matching conditions, a Perron-root solver on
//! atoms built from the resolvent kernel, and finite-difference grids.

mod atomic;
mod grid;
mod green;
mod radial;
mod rates;

use serde::{Deserialize, Serialize};

use crate::point::{self, Point};

pub use atomic::{lambda_atomic, lambda_single_dirac, lambda_two_diracs, perron_root};
pub use green::{green_far_field, green_radial, green_resolvent};
pub use grid::{lambda_grid, GridMode, GridSpec, ZERO_CLAMP};
pub use radial::{
    ball_printed_form_root, ball_threshold, lambda_ball_d3, lambda_delta_shell_d3,
    shell_printed_form_root, shell_threshold,
};
pub use rates::{
    ball_exit_probability, ball_tail_monotonicity, big_lambda, gaussian_tail, gaussian_tail_asymptote,
    p_opt, split_objective,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    ClosedForm,
    Transcendental,
    AtomicPerron,
    Grid1d,
    GridRadial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridLayout {
    Line,
    /// Radially symmetric profile `u(|x|)` in dimension `dim`.
    Radial { dim: usize },
}

/// L²-normalised, strictly positive ground state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Eigenfunction {
    /// `√c e^{−c|x−a|}`.
    SingleDirac { c: f64, location: f64 },
    /// `h(x) = Σ_j G_{−λ}(x, x_j) w_j h(x_j)` on the line, `s = √(−2λ)`.
    Atomic { locations: Vec<f64>, weights: Vec<f64>, values: Vec<f64>, s: f64 },
    /// Piecewise-linear interpolation of nodal values, with an `e^{−s r}`
    /// tail beyond the last node.
    Grid { layout: GridLayout, nodes: Vec<f64>, values: Vec<f64>, s: f64 },
}

impl Eigenfunction {
    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            Self::SingleDirac { c, location } => c.sqrt() * (-c * (x[0] - location).abs()).exp(),
            Self::Atomic { locations, weights, values, s } => locations
                .iter()
                .zip(weights)
                .zip(values)
                .map(|((&loc, &w), &h)| w * h * (-s * (x[0] - loc).abs()).exp() / s)
                .sum(),
            Self::Grid { layout, nodes, values, s } => {
                let r = match layout {
                    GridLayout::Line => x[0],
                    GridLayout::Radial { .. } => point::norm(x),
                };
                interpolate(nodes, values, *s, r)
            }
        }
    }

    /// `∫ h(x) dx`.
    pub fn integral(&self) -> f64 {
        match self {
            Self::SingleDirac { c, .. } => 2.0 / c.sqrt(),
            Self::Atomic { weights, values, s, .. } => {
                weights.iter().zip(values).map(|(w, h)| w * h).sum::<f64>() * 2.0 / (s * s)
            }
            Self::Grid { layout, nodes, values, .. } => {
                let measure = |r: f64| match layout {
                    GridLayout::Line => 1.0,
                    GridLayout::Radial { dim } => crate::measures::unit_sphere_area(*dim) * r.powi(*dim as i32 - 1),
                };
                trapezoid(nodes, values, measure)
            }
        }
    }

    /// `c_h(x) = h(x) ∫ h`, the constant in `E_x[e^{A_t}] ~ c_h(x) e^{−λt}`.
    pub fn growth_constant(&self, x: &Point) -> f64 {
        self.eval(x) * self.integral()
    }
}

fn interpolate(nodes: &[f64], values: &[f64], s: f64, r: f64) -> f64 {
    let n = nodes.len();
    if r <= nodes[0] {
        return if nodes[0] >= 0.0 { values[0] } else { values[0] * (-s * (nodes[0] - r)).exp() };
    }
    if r >= nodes[n - 1] {
        return values[n - 1] * (-s * (r - nodes[n - 1])).exp();
    }
    let i = nodes.partition_point(|&x| x <= r).clamp(1, n - 1);
    let (x0, x1) = (nodes[i - 1], nodes[i]);
    let t = (r - x0) / (x1 - x0);
    values[i - 1] * (1.0 - t) + values[i] * t
}

fn trapezoid(nodes: &[f64], values: &[f64], weight: impl Fn(f64) -> f64) -> f64 {
    nodes
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] * weight(x[0]) + v[1] * weight(x[1])))
        .sum()
}

/// Outcome of an eigenvalue computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub lambda: f64,
    pub method: SpectralMethod,
    /// `√(−λ/2)`.
    pub speed: f64,
    pub eigenfunction: Option<Eigenfunction>,
}

impl SpectralResult {
    pub fn new(lambda: f64, method: SpectralMethod, eigenfunction: Option<Eigenfunction>) -> Self {
        assert!(lambda <= 0.0, "principal eigenvalue must be ≤ 0, got {lambda}");
        let eigenfunction = if lambda < 0.0 { eigenfunction } else { None };
        // `λ = 0` would give `−0` for the speed.
        let speed = if lambda < 0.0 { (-lambda / 2.0).sqrt() } else { 0.0 };
        Self { lambda, method, speed, eigenfunction }
    }

    /// The bottom of the spectrum is the continuum edge: no bound state.
    pub fn no_bound_state(method: SpectralMethod) -> Self {
        Self::new(0.0, method, None)
    }

    pub fn has_bound_state(&self) -> bool {
        self.lambda < 0.0
    }

    /// `s = √(−2λ)`, the decay rate of the ground state.
    pub fn decay_rate(&self) -> f64 {
        if self.lambda < 0.0 { (-2.0 * self.lambda).sqrt() } else { 0.0 }
    }

    /// `Λ_δ`; see [`big_lambda`].
    pub fn big_lambda(&self, delta: f64) -> f64 {
        big_lambda(self.lambda, delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};

    #[test]
    fn single_dirac_profile_is_normalised() {
        let h = Eigenfunction::SingleDirac { c: 1.7, location: 0.0 };
        let sq = integrate(|x| h.eval(&[x, 0.0, 0.0]).powi(2), -40.0, 40.0, Tolerance::rel(1e-12)).value;
        assert!((sq - 1.0).abs() < 1e-9);
        assert!((h.growth_constant(&[0.0; 3]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn speed_relation() {
        let r = SpectralResult::new(-0.5, SpectralMethod::ClosedForm, None);
        assert!((r.speed * r.speed + r.lambda / 2.0).abs() < 1e-15);
        let z = SpectralResult::new(0.0, SpectralMethod::Grid1d, Some(Eigenfunction::SingleDirac { c: 1.0, location: 0.0 }));
        assert!(z.eigenfunction.is_none());
    }
}
