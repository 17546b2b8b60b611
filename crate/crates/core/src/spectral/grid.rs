//! Finite-difference ground state of `−½Δ − μ`, the arbiter for the
//! transcendental solvers.
//!
//! Every mode reduces to a symmetric tridiagonal matrix with Dirichlet ends.
//! The lowest eigenvalue is located by Sturm-count bisection and the
//! eigenvector by shifted inverse iteration.

use serde::{Deserialize, Serialize};

use super::{Eigenfunction, GridLayout, SpectralMethod, SpectralResult};
use crate::measures::{BranchingRateMeasure, DensityPreset, MeasureKind};
use crate::{Error, Result};

/// Eigenvalues at or above `−ZERO_CLAMP` are reported as `λ = 0`.
pub const ZERO_CLAMP: f64 = 1e-10;

const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// Nodes `−X + i h` on the line; atoms become `mass/h` at the nearest node.
    #[serde(rename = "line_1d")]
    Line1d,
    /// Radial profile in three dimensions written as `w = r u`, `w(0) = 0`;
    /// a sphere becomes `c/h` at the node nearest its radius.
    #[serde(rename = "radial_d3")]
    RadialD3,
    /// Radial profile in the plane, finite volumes centred at `(i − ½) h`.
    #[serde(rename = "radial_d2")]
    RadialD2,
}

/// Domain half-width (radius for radial modes) and number of nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { half_width: 30.0, nodes: 6001 }
    }
}

impl GridSpec {
    pub fn new(half_width: f64, nodes: usize) -> Self {
        Self { half_width, nodes }
    }
}

struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiagonal {
    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.diag.len() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            d = self.diag[i] - x - if i == 0 { 0.0 } else { b2 / d };
            if d == 0.0 {
                d = -f64::EPSILON * (self.diag[i].abs() + x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin_lower(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
                self.diag[i] - left - right
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Solves `(T − σ) y = rhs` by the Thomas algorithm; `σ` is below the
    /// spectrum, so the system is positive definite.
    fn solve_shifted(&self, sigma: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut denom = self.diag[0] - sigma;
        c[0] = if n > 1 { self.off[0] / denom } else { 0.0 };
        y[0] = rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - sigma - self.off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            y[i] = (rhs[i] - self.off[i - 1] * y[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            y[i] -= c[i] * y[i + 1];
        }
        y
    }

    fn lowest_eigenvalue(&self) -> (f64, f64) {
        let mut lo = self.gershgorin_lower();
        let mut hi = -ZERO_CLAMP;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-14 * hi.abs().max(1e-3) || mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo, hi)
    }

    fn lowest_eigenvector(&self, below: f64, lambda: f64) -> Result<Vec<f64>> {
        let n = self.diag.len();
        let sigma = below - 1e-9 * lambda.abs().max(1e-6);
        let mut x = vec![1.0 / (n as f64).sqrt(); n];
        for _ in 0..MAX_ITERATIONS {
            let mut y = self.solve_shifted(sigma, &x);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let sign = if y.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            y.iter_mut().for_each(|v| *v *= sign / norm);
            let change = y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            x = y;
            if change < 1e-12 {
                return Ok(x);
            }
        }
        Err(Error::NonConvergence(MAX_ITERATIONS))
    }
}

fn nearest(node_of: impl Fn(f64) -> f64, x: f64, count: usize) -> Option<usize> {
    let i = node_of(x).round();
    (i >= 0.0 && (i as usize) < count).then_some(i as usize)
}

// Indicator densities are averaged over the cell so the well edge need not
// sit on a node; smooth densities are sampled at the node.
fn cell_density(measure: &BranchingRateMeasure, x: f64, h: f64) -> f64 {
    match measure.kind() {
        MeasureKind::Density(DensityPreset::BallIndicator { radius, coupling }) => {
            let r = x.abs();
            let lo = (r - 0.5 * h).max(0.0);
            let hi = r + 0.5 * h;
            coupling * ((hi.min(*radius) - lo).max(0.0)) / (hi - lo)
        }
        MeasureKind::Density(_) => measure.density(&[x, 0.0, 0.0]),
        _ => 0.0,
    }
}

/// Lowest eigenvalue of the discretised `−½Δ − μ`.
///
/// `μ` may be a density, atoms (line only) or a sphere (radial modes). The
/// box must be wide enough for the ground state to have decayed at its edge;
/// close to a threshold that means `X` of a few hundred.
pub fn lambda_grid(measure: &BranchingRateMeasure, mode: GridMode, spec: GridSpec) -> Result<SpectralResult> {
    if !(spec.half_width.is_finite() && spec.half_width > 0.0) || spec.nodes < 5 {
        return Err(Error::InvalidParameter(format!("grid needs X > 0 and at least 5 nodes, got {spec:?}")));
    }
    let expected_dim = match mode {
        GridMode::Line1d => 1,
        GridMode::RadialD2 => 2,
        GridMode::RadialD3 => 3,
    };
    if measure.dim() != expected_dim {
        return Err(Error::InvalidParameter(format!(
            "{mode:?} grid needs a measure on R^{expected_dim}, got R^{}",
            measure.dim()
        )));
    }
    let x_max = spec.half_width;
    let n = spec.nodes;
    match mode {
        GridMode::Line1d => {
            let h = 2.0 * x_max / (n - 1) as f64;
            let coords: Vec<f64> = (0..n).map(|i| -x_max + i as f64 * h).collect();
            let mut potential: Vec<f64> = coords.iter().map(|&x| cell_density(measure, x, h)).collect();
            for atom in measure.atoms() {
                let i = nearest(|x| (x + x_max) / h, atom.location[0], n)
                    .filter(|&i| i > 0 && i < n - 1)
                    .ok_or_else(|| Error::InvalidParameter(format!("atom at {} outside the grid", atom.location[0])))?;
                potential[i] += atom.weight / h;
            }
            // Interior unknowns 1..n−1.
            let inner = 1..n - 1;
            let t = Tridiagonal {
                diag: inner.clone().map(|i| 1.0 / (h * h) - potential[i]).collect(),
                off: vec![-0.5 / (h * h); n - 3],
            };
            finish(&t, SpectralMethod::Grid1d, |lambda, v| {
                let scale = h.sqrt().recip();
                let mut values = vec![0.0];
                values.extend(v.iter().map(|x| x * scale));
                values.push(0.0);
                Eigenfunction::Grid { layout: GridLayout::Line, nodes: coords.clone(), values, s: (-2.0 * lambda).sqrt() }
            })
        }
        GridMode::RadialD3 => {
            let h = x_max / n as f64;
            let radii: Vec<f64> = (1..n).map(|i| i as f64 * h).collect();
            let mut potential: Vec<f64> = radii.iter().map(|&r| cell_density(measure, r, h)).collect();
            match measure.kind() {
                MeasureKind::SphereSurface { radius, coupling } => {
                    let i = nearest(|r| r / h - 1.0, *radius, radii.len())
                        .ok_or_else(|| Error::InvalidParameter(format!("sphere radius {radius} outside the grid")))?;
                    potential[i] += coupling / h;
                }
                MeasureKind::Atoms(a) if !a.is_empty() => {
                    return Err(Error::Unsupported("point masses in dimension 3".into()));
                }
                _ => {}
            }
            let t = Tridiagonal {
                diag: potential.iter().map(|v| 1.0 / (h * h) - v).collect(),
                off: vec![-0.5 / (h * h); radii.len() - 1],
            };
            finish(&t, SpectralMethod::GridRadial, |lambda, w| {
                // 4π Σ w² h = 1, u = w / r.
                let scale = (4.0 * std::f64::consts::PI * h).sqrt().recip();
                let mut nodes = vec![0.0];
                nodes.extend(&radii);
                let mut values = vec![scale * w[0] / h];
                values.extend(w.iter().zip(&radii).map(|(w, r)| scale * w / r));
                Eigenfunction::Grid { layout: GridLayout::Radial { dim: 3 }, nodes, values, s: (-2.0 * lambda).sqrt() }
            })
        }
        GridMode::RadialD2 => {
            let h = x_max / n as f64;
            let centres: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) * h).collect();
            let mut potential: Vec<f64> = centres.iter().map(|&r| cell_density(measure, r, h)).collect();
            match measure.kind() {
                MeasureKind::SphereSurface { radius, coupling } => {
                    let i = nearest(|r| r / h - 0.5, *radius, n)
                        .ok_or_else(|| Error::InvalidParameter(format!("circle radius {radius} outside the grid")))?;
                    potential[i] += coupling / h;
                }
                MeasureKind::Atoms(a) if !a.is_empty() => {
                    return Err(Error::Unsupported("point masses in dimension 2".into()));
                }
                _ => {}
            }
            // −½ (1/r)(r u')' on cells of volume r_i h, symmetrised with √r_i.
            let face = |i: usize| i as f64 * h;
            let diag = (0..n)
                .map(|i| 0.5 * (face(i) + face(i + 1)) / (h * h * centres[i]) - potential[i])
                .collect();
            let off = (0..n - 1)
                .map(|i| -0.5 * face(i + 1) / (h * h * (centres[i] * centres[i + 1]).sqrt()))
                .collect();
            let t = Tridiagonal { diag, off };
            finish(&t, SpectralMethod::GridRadial, |lambda, v| {
                // 2π Σ u² r h = 1 with v = √(r h) u.
                let scale = (2.0 * std::f64::consts::PI).sqrt().recip();
                let values = v.iter().zip(&centres).map(|(v, r)| scale * v / (r * h).sqrt()).collect();
                Eigenfunction::Grid {
                    layout: GridLayout::Radial { dim: 2 },
                    nodes: centres.clone(),
                    values,
                    s: (-2.0 * lambda).sqrt(),
                }
            })
        }
    }
}

fn finish(
    t: &Tridiagonal,
    method: SpectralMethod,
    profile: impl FnOnce(f64, &[f64]) -> Eigenfunction,
) -> Result<SpectralResult> {
    if t.count_below(-ZERO_CLAMP) == 0 {
        return Ok(SpectralResult::no_bound_state(method));
    }
    let (lo, hi) = t.lowest_eigenvalue();
    let lambda = 0.5 * (lo + hi);
    let v = t.lowest_eigenvector(lo, lambda)?;
    Ok(SpectralResult::new(lambda, method, Some(profile(lambda, &v))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{lambda_ball_d3, lambda_delta_shell_d3, lambda_single_dirac};

    #[test]
    fn single_dirac_matches_closed_form() {
        for c in [0.5, 1.0, 2.0] {
            let m = BranchingRateMeasure::dirac(c).unwrap();
            let g = lambda_grid(&m, GridMode::Line1d, GridSpec::default()).unwrap();
            let exact = lambda_single_dirac(c).unwrap().lambda;
            assert!((g.lambda - exact).abs() < 5e-4, "c = {c}: {} vs {exact}", g.lambda);
            // Lattice Green function: sinh(κh) = ch.
            let h = 0.01;
            let discrete = (1.0 - (1.0 + c * c * h * h).sqrt()) / (h * h);
            assert!((g.lambda - discrete).abs() < 1e-9, "{} vs {discrete}", g.lambda);
        }
    }

    #[test]
    fn zero_measure_has_no_bound_state() {
        let m = BranchingRateMeasure::zero(1).unwrap();
        assert_eq!(lambda_grid(&m, GridMode::Line1d, GridSpec::default()).unwrap().lambda, 0.0);
        let m3 = BranchingRateMeasure::zero(3).unwrap();
        assert_eq!(lambda_grid(&m3, GridMode::RadialD3, GridSpec::new(30.0, 3000)).unwrap().lambda, 0.0);
    }

    #[test]
    fn ball_d3_matches_matching_condition() {
        let m = BranchingRateMeasure::ball(3, 1.0, 2.0).unwrap();
        let g = lambda_grid(&m, GridMode::RadialD3, GridSpec::new(30.0, 6000)).unwrap();
        let exact = lambda_ball_d3(2.0, 1.0).unwrap().lambda;
        assert!((g.lambda / exact - 1.0).abs() < 5e-3, "{} vs {exact}", g.lambda);
    }

    #[test]
    fn shell_d3_matches_matching_condition() {
        for c in [1.0, 2.0, 5.0] {
            let m = BranchingRateMeasure::sphere(3, 1.0, c).unwrap();
            let g = lambda_grid(&m, GridMode::RadialD3, GridSpec::new(40.0, 8000)).unwrap();
            let exact = lambda_delta_shell_d3(c, 1.0).unwrap().lambda;
            assert!((g.lambda / exact - 1.0).abs() < 5e-3, "c = {c}: {} vs {exact}", g.lambda);
        }
    }

    #[test]
    fn d3_thresholds() {
        let spec = GridSpec::new(200.0, 20_000);
        let shell = |c| lambda_grid(&BranchingRateMeasure::sphere(3, 1.0, c).unwrap(), GridMode::RadialD3, spec).unwrap();
        assert_eq!(shell(0.45).lambda, 0.0);
        assert_eq!(shell(0.5).lambda, 0.0);
        assert!(shell(0.6).lambda < 0.0);
        let c_star = std::f64::consts::PI.powi(2) / 8.0;
        let ball = |c| lambda_grid(&BranchingRateMeasure::ball(3, 1.0, c).unwrap(), GridMode::RadialD3, spec).unwrap();
        assert_eq!(ball(0.95 * c_star).lambda, 0.0);
        assert_eq!(ball(c_star).lambda, 0.0);
        assert!(ball(1.1 * c_star).lambda < 0.0);
    }

    #[test]
    fn planar_disc_always_binds() {
        // Any attractive well binds in two dimensions, with λ ~ −e^{−1/c}-type
        // smallness; a moderate coupling is comfortably negative.
        let m = BranchingRateMeasure::ball(2, 1.0, 1.0).unwrap();
        let g = lambda_grid(&m, GridMode::RadialD2, GridSpec::new(60.0, 6000)).unwrap();
        // Matching J0/K0 at r = 1: k J1(k)/J0(k) = s K1(s)/K0(s), k² + s² = 2.
        assert!(g.lambda < -0.1 && g.lambda > -1.0, "{}", g.lambda);
    }

    #[test]
    fn profiles_are_positive_and_normalised() {
        let m = BranchingRateMeasure::ball(3, 1.0, 2.0).unwrap();
        let g = lambda_grid(&m, GridMode::RadialD3, GridSpec::new(30.0, 6000)).unwrap();
        let h = g.eigenfunction.unwrap();
        if let Eigenfunction::Grid { nodes, values, .. } = &h {
            let dr = nodes[1] - nodes[0];
            let sq: f64 = nodes.iter().zip(values).map(|(r, u)| 4.0 * std::f64::consts::PI * r * r * u * u * dr).sum();
            assert!((sq - 1.0).abs() < 1e-6, "{sq}");
            assert!(values.iter().all(|&u| u >= -1e-12));
        }
        let reference = lambda_ball_d3(2.0, 1.0).unwrap().eigenfunction.unwrap();
        for r in [0.0, 0.5, 1.0, 2.0] {
            let p = [r, 0.0, 0.0];
            assert!((h.eval(&p) / reference.eval(&p) - 1.0).abs() < 1e-2, "r = {r}");
        }
    }

    #[test]
    fn atoms_off_grid_or_in_d3_are_rejected() {
        let m = BranchingRateMeasure::two_diracs(1.0, 1.0, 50.0).unwrap();
        assert!(lambda_grid(&m, GridMode::Line1d, GridSpec::default()).is_err());
        let m = BranchingRateMeasure::dirac(1.0).unwrap();
        assert!(lambda_grid(&m, GridMode::RadialD3, GridSpec::default()).is_err());
    }
}
