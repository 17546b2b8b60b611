//! The semilinear heat equation `∂u/∂t = ½u″ + (G(u) − u) V` on the line,
//! where `G` is the offspring generating function and `V` a mollified
//! branching-rate density.
//!
//! With `u(0, x, y) = 1{|x| ≤ y}` the solution is `P_x(L_T ≤ y)` for the
//! maximal displacement `L_T`; with `1{x ≤ y}` it is the law of the rightmost
//! particle. Time stepping is Strang splitting: Crank–Nicolson diffusion for
//! half a step, an explicit reaction step, another half diffusion step. The
//! first two steps use implicit Euler halves to damp the jump of the initial
//! data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bbm::{estimate_rate, RateFit};
use crate::measures::{BranchingRateMeasure, MeasureKind, OffspringLaw};
use crate::quadrature::{integrate, Tolerance};
use crate::special::norm_cdf;
use crate::{Error, Result};

/// Largest admissible `Δt · max V` for the explicit reaction step.
pub const REACTION_LIMIT: f64 = 0.1;

/// Tolerated excursion of `u` outside `[0, 1]` before it is an error.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-12;

const MASS_TOL: f64 = 1e-6;
const SMOOTHING_STEPS: usize = 2;

/// Which extreme the solution describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extreme {
    /// `L_T = max_k |B_T^k|`; zero Dirichlet data at both ends.
    Max,
    /// `R_T = max_k B_T^k`; one on the left, zero on the right.
    Rightmost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeSpec {
    pub half_width: f64,
    pub spacing: f64,
    /// Upper bound on the time step; reduced further to keep
    /// `Δt · max V ≤ 0.1`.
    pub dt: f64,
    /// Standard deviation of the Gaussian that replaces each atom.
    pub mollifier_width: f64,
}

impl Default for PdeSpec {
    fn default() -> Self {
        Self { half_width: 60.0, spacing: 0.0125, dt: 0.005, mollifier_width: 0.05 }
    }
}

/// Nodes `x_i = −X + i h` and cell averages of the mollified potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeGrid {
    pub half_width: f64,
    pub spacing: f64,
    pub dt: f64,
    pub potential: Vec<f64>,
}

impl PdeGrid {
    pub fn new(measure: &BranchingRateMeasure, spec: PdeSpec) -> Result<Self> {
        if measure.dim() != 1 {
            return Err(Error::Unsupported(format!("the PDE is solved on the line only, got d = {}", measure.dim())));
        }
        let PdeSpec { half_width, spacing, dt, mollifier_width } = spec;
        for (name, v) in [("half width", half_width), ("spacing", spacing), ("time step", dt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        // An odd node count keeps the origin on the grid.
        let half = (half_width / spacing).round() as usize;
        if half < 2 {
            return Err(Error::InvalidParameter("grid needs at least five nodes".into()));
        }
        let h = half_width / half as f64;
        let nodes = 2 * half + 1;
        let x = |i: usize| -half_width + i as f64 * h;
        let potential: Vec<f64> = match measure.kind() {
            MeasureKind::Atoms(_) | MeasureKind::LatticeAtoms { .. } => {
                if !(mollifier_width.is_finite() && mollifier_width > 0.0) {
                    return Err(Error::InvalidParameter(format!("mollifier width {mollifier_width} must be positive")));
                }
                let atoms = measure.atoms();
                (0..nodes)
                    .map(|i| {
                        let (lo, hi) = (x(i) - 0.5 * h, x(i) + 0.5 * h);
                        atoms
                            .iter()
                            .map(|a| {
                                let z = |u: f64| (u - a.location[0]) / mollifier_width;
                                a.weight * (norm_cdf(z(hi)) - norm_cdf(z(lo)))
                            })
                            .sum::<f64>()
                            / h
                    })
                    .collect()
            }
            MeasureKind::Density(_) => (0..nodes)
                .map(|i| {
                    let (lo, hi) = (x(i) - 0.5 * h, x(i) + 0.5 * h);
                    integrate(|u| measure.density(&[u, 0.0, 0.0]), lo, hi, Tolerance { abs: 1e-14, rel: 1e-10 }).value / h
                })
                .collect(),
            MeasureKind::SphereSurface { .. } => {
                return Err(Error::Unsupported("surface measures have no PDE preset".into()));
            }
        };
        let grid = Self { half_width, spacing: h, dt, potential };
        let target = measure.total_mass();
        let actual = grid.mass();
        if (actual - target).abs() > MASS_TOL * target.max(1.0) {
            return Err(Error::MassMismatch { target, actual });
        }
        Ok(grid)
    }

    pub fn nodes(&self) -> usize {
        self.potential.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing
    }

    /// `∫ V dx` as seen by the scheme.
    pub fn mass(&self) -> f64 {
        self.potential.iter().sum::<f64>() * self.spacing
    }

    pub fn max_potential(&self) -> f64 {
        self.potential.iter().copied().fold(0.0, f64::max)
    }

    /// Time step actually used: at most `dt` and at most `0.1 / max V`.
    pub fn effective_dt(&self) -> f64 {
        let vmax = self.max_potential();
        if vmax > 0.0 {
            self.dt.min(REACTION_LIMIT / vmax)
        } else {
            self.dt
        }
    }

    /// Linear interpolation of nodal values at `x`.
    pub fn interpolate(&self, u: &[f64], x: f64) -> f64 {
        let s = ((x + self.half_width) / self.spacing).clamp(0.0, (self.nodes() - 1) as f64);
        let i = (s.floor() as usize).min(self.nodes() - 2);
        let w = s - i as f64;
        (1.0 - w) * u[i] + w * u[i + 1]
    }
}

/// `(I − k D₂) v = rhs` on the interior with fixed end values, `D₂` the
/// second difference; factorised once per step length.
struct Implicit {
    k: f64,
    /// Modified super-diagonal and inverse pivots of the Thomas sweep.
    c: Vec<f64>,
    inv: Vec<f64>,
}

impl Implicit {
    fn new(k: f64, interior: usize) -> Self {
        let (mut c, mut inv) = (Vec::with_capacity(interior), Vec::with_capacity(interior));
        let mut prev = 0.0;
        for _ in 0..interior {
            let pivot = 1.0 + 2.0 * k + k * prev;
            let p = 1.0 / pivot;
            inv.push(p);
            prev = -k * p;
            c.push(prev);
        }
        Self { k, c, inv }
    }

    /// Solves in place; `u[0]` and `u[n−1]` are the boundary values.
    fn solve(&self, u: &mut [f64], rhs: &mut [f64]) {
        let n = u.len();
        rhs[0] += self.k * u[0];
        rhs[n - 3] += self.k * u[n - 1];
        let mut prev = 0.0;
        for (r, inv) in rhs[..n - 2].iter_mut().zip(&self.inv) {
            prev = (*r + self.k * prev) * inv;
            *r = prev;
        }
        let mut next = 0.0;
        for j in (0..n - 2).rev() {
            next = rhs[j] - self.c[j] * next;
            u[j + 1] = next;
        }
    }
}

/// Diffusion over `tau` with the generator `½ d²/dx²`.
struct Diffusion {
    implicit: Implicit,
    /// Weight of the explicit half (0 for implicit Euler).
    explicit_k: f64,
    rhs: Vec<f64>,
}

impl Diffusion {
    fn crank_nicolson(tau: f64, h: f64, n: usize) -> Self {
        let k = 0.25 * tau / (h * h);
        Self { implicit: Implicit::new(k, n - 2), explicit_k: k, rhs: vec![0.0; n - 2] }
    }

    fn implicit_euler(tau: f64, h: f64, n: usize) -> Self {
        let k = 0.5 * tau / (h * h);
        Self { implicit: Implicit::new(k, n - 2), explicit_k: 0.0, rhs: vec![0.0; n - 2] }
    }

    fn apply(&mut self, u: &mut [f64]) {
        let k = self.explicit_k;
        for (j, r) in self.rhs.iter_mut().enumerate() {
            let i = j + 1;
            *r = u[i] + k * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
        }
        self.implicit.solve(u, &mut self.rhs);
    }
}

fn react(u: &mut [f64], potential: &[f64], dt: f64, offspring: &OffspringLaw) {
    for (v, &w) in u.iter_mut().zip(potential) {
        if w > 0.0 {
            *v += dt * w * (offspring.generating_function(*v) - *v);
        }
    }
}

fn check_range(u: &mut [f64]) -> Result<()> {
    let worst = u.iter().map(|&v| (-v).max(v - 1.0)).fold(0.0, f64::max);
    if worst > MAX_PRINCIPLE_TOL {
        return Err(Error::MaximumPrinciple(worst));
    }
    for v in u.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(())
}

/// Initial data as cell averages, so a jump between nodes is resolved to
/// second order.
fn initial_data(grid: &PdeGrid, y: f64, extreme: Extreme) -> Vec<f64> {
    let h = grid.spacing;
    let below = |b: f64, x: f64| ((b - (x - 0.5 * h)) / h).clamp(0.0, 1.0);
    (0..grid.nodes())
        .map(|i| {
            let x = grid.x(i);
            match extreme {
                Extreme::Rightmost => below(y, x),
                Extreme::Max => (below(y, x) - below(-y, x)).max(0.0),
            }
        })
        .collect()
}

/// Solves up to each of the increasing `times` and reports the solution
/// there through `visit`.
fn evolve(
    grid: &PdeGrid,
    y: f64,
    times: &[f64],
    offspring: &OffspringLaw,
    extreme: Extreme,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidParameter("record times must be non-negative and increasing".into()));
    }
    let n = grid.nodes();
    let h = grid.spacing;
    let dt_max = grid.effective_dt();
    let mut u = initial_data(grid, y, extreme);
    let mut now = 0.0;
    let mut taken = 0usize;
    for (k, &target) in times.iter().enumerate() {
        let span = target - now;
        if span > 0.0 {
            let steps = (span / dt_max).ceil() as usize;
            let dt = span / steps as f64;
            let mut cn = Diffusion::crank_nicolson(0.5 * dt, h, n);
            let mut be = Diffusion::implicit_euler(0.5 * dt, h, n);
            for _ in 0..steps {
                let diffuse = if taken < SMOOTHING_STEPS { &mut be } else { &mut cn };
                diffuse.apply(&mut u);
                react(&mut u, &grid.potential, dt, offspring);
                diffuse.apply(&mut u);
                check_range(&mut u)?;
                taken += 1;
            }
        }
        now = target;
        visit(k, &u);
    }
    Ok(())
}

/// `u(T, ·, y)` on the grid nodes.
pub fn solve_fkpp_1d(
    grid: &PdeGrid,
    y: f64,
    horizon: f64,
    offspring: &OffspringLaw,
    extreme: Extreme,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    evolve(grid, y, &[horizon], offspring, extreme, |_, u| out = u.to_vec())?;
    Ok(out)
}

/// `u(T_k, x0, y)` for each of the increasing `times`.
pub fn solve_fkpp_at(
    grid: &PdeGrid,
    x0: f64,
    y: f64,
    times: &[f64],
    offspring: &OffspringLaw,
    extreme: Extreme,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; times.len()];
    evolve(grid, y, times, offspring, extreme, |k, u| out[k] = grid.interpolate(u, x0))?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub t: f64,
    /// Level where `u(T, x0, ·)` crosses ½; absent when it does not.
    pub y_half: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontCurve {
    pub points: Vec<FrontPoint>,
    /// `u(T, x0, ·)` was nondecreasing on the `y` grid at every `T`.
    pub monotone: bool,
}

/// Median of the extreme at each time: one solve per `y`, then the ½
/// crossing by linear interpolation in `y`.
pub fn front_curve(
    grid: &PdeGrid,
    x0: f64,
    ys: &[f64],
    times: &[f64],
    offspring: &OffspringLaw,
    extreme: Extreme,
) -> Result<FrontCurve> {
    front_from_table(ys, times, &level_table(grid, x0, ys, times, offspring, extreme)?)
}

/// `table[j][k] = u(T_k, x0, y_j)`, one solve per level, in parallel.
pub fn level_table(
    grid: &PdeGrid,
    x0: f64,
    ys: &[f64],
    times: &[f64],
    offspring: &OffspringLaw,
    extreme: Extreme,
) -> Result<Vec<Vec<f64>>> {
    ys.par_iter().map(|&y| solve_fkpp_at(grid, x0, y, times, offspring, extreme)).collect()
}

/// Front curve from a table laid out as in [`level_table`].
pub fn front_from_table(ys: &[f64], times: &[f64], table: &[Vec<f64>]) -> Result<FrontCurve> {
    if ys.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("y grid must be strictly increasing".into()));
    }
    if table.len() != ys.len() || table.iter().any(|row| row.len() != times.len()) {
        return Err(Error::InvalidParameter("table does not match the level and time grids".into()));
    }
    let mut monotone = true;
    let points = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let col: Vec<f64> = table.iter().map(|row| row[k]).collect();
            monotone &= col.windows(2).all(|w| w[1] >= w[0] - MAX_PRINCIPLE_TOL);
            let y_half = col.windows(2).zip(ys.windows(2)).find(|(u, _)| u[0] < 0.5 && u[1] >= 0.5).map(|(u, y)| {
                y[0] + (0.5 - u[0]) / (u[1] - u[0]) * (y[1] - y[0])
            });
            FrontPoint { t, y_half }
        })
        .collect();
    Ok(FrontCurve { points, monotone })
}

/// Underflow floor for `1 − u`.
pub const TAIL_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDecay {
    /// `(T, 1 − u(T, x0, δT))`.
    pub points: Vec<(f64, f64)>,
    /// Times dropped because `1 − u` fell below the floor.
    pub truncated: Vec<f64>,
    /// Log-slope over the retained times; absent with fewer than two.
    pub fit: Option<RateFit>,
}

/// Exponential decay of `P_x(L_T > δT) = 1 − u(T, x0, δT)`.
pub fn tail_decay_check(
    grid: &PdeGrid,
    x0: f64,
    delta: f64,
    times: &[f64],
    offspring: &OffspringLaw,
) -> Result<TailDecay> {
    let tails: Vec<f64> = times
        .par_iter()
        .map(|&t| Ok(1.0 - solve_fkpp_at(grid, x0, delta * t, &[t], offspring, Extreme::Max)?[0]))
        .collect::<Result<_>>()?;
    let (kept, dropped): (Vec<_>, Vec<_>) =
        times.iter().copied().zip(tails).partition(|&(_, p)| p >= TAIL_FLOOR);
    let fit = if kept.len() >= 2 {
        let (ts, ps): (Vec<f64>, Vec<f64>) = kept.iter().copied().unzip();
        Some(estimate_rate(&ts, &ps, (ts[0], ts[ts.len() - 1]))?)
    } else {
        None
    };
    Ok(TailDecay { points: kept, truncated: dropped.into_iter().map(|p| p.0).collect(), fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(half_width: f64, spacing: f64, dt: f64) -> PdeSpec {
        PdeSpec { half_width, spacing, dt, mollifier_width: 0.05 }
    }

    #[test]
    fn mollified_mass_and_reaction_limit() {
        let m = BranchingRateMeasure::dirac(1.0).unwrap();
        let g = PdeGrid::new(&m, spec(10.0, 0.0125, 1.0)).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-9);
        assert!(g.effective_dt() * g.max_potential() <= REACTION_LIMIT * (1.0 + 1e-12));
        assert_eq!(g.x(g.nodes() / 2), 0.0);
        let ball = BranchingRateMeasure::ball(1, 1.0, 0.5).unwrap();
        assert!((PdeGrid::new(&ball, spec(5.0, 0.03, 0.01)).unwrap().mass() - 1.0).abs() < 1e-6);
        // Mass leaking out of the domain is an error.
        let edge = BranchingRateMeasure::new(
            1,
            MeasureKind::Atoms(vec![crate::measures::Atom { location: [4.95, 0.0, 0.0], weight: 1.0 }]),
        )
        .unwrap();
        assert!(matches!(PdeGrid::new(&edge, spec(5.0, 0.01, 0.01)), Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn heat_kernel_without_branching() {
        let m = BranchingRateMeasure::zero(1).unwrap();
        let g = PdeGrid::new(&m, spec(20.0, 0.0125, 0.0125)).unwrap();
        let t = 4.0;
        let y = 1.3;
        let law = OffspringLaw::binary();
        let right = solve_fkpp_1d(&g, y, t, &law, Extreme::Rightmost).unwrap();
        let max = solve_fkpp_1d(&g, y, t, &law, Extreme::Max).unwrap();
        let mut err_r: f64 = 0.0;
        let mut err_m: f64 = 0.0;
        for i in 0..g.nodes() {
            let x = g.x(i);
            if x.abs() > 12.0 {
                continue;
            }
            err_r = err_r.max((right[i] - norm_cdf((y - x) / t.sqrt())).abs());
            let exact = norm_cdf((y - x) / t.sqrt()) - norm_cdf((-y - x) / t.sqrt());
            err_m = err_m.max((max[i] - exact).abs());
        }
        assert!(err_r < 1e-4 && err_m < 1e-4, "{err_r} {err_m}");
    }

    #[test]
    fn initial_data_at_time_zero() {
        let m = BranchingRateMeasure::dirac(1.0).unwrap();
        let g = PdeGrid::new(&m, spec(5.0, 0.1, 0.01)).unwrap();
        let u = solve_fkpp_1d(&g, 1.0, 0.0, &OffspringLaw::binary(), Extreme::Max).unwrap();
        for (i, v) in u.iter().enumerate() {
            let x = g.x(i);
            if (x.abs() - 1.0).abs() > 0.06 {
                assert_eq!(*v, if x.abs() < 1.0 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn huge_level_stays_one() {
        let m = BranchingRateMeasure::dirac(1.0).unwrap();
        let g = PdeGrid::new(&m, spec(10.0, 0.0125, 0.0125)).unwrap();
        let u = solve_fkpp_1d(&g, 1e3, 3.0, &OffspringLaw::binary(), Extreme::Rightmost).unwrap();
        let worst = u.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn monotone_in_level_and_coupling() {
        let law = OffspringLaw::binary();
        let t = 3.0;
        let weak = PdeGrid::new(&BranchingRateMeasure::dirac(0.5).unwrap(), spec(15.0, 0.0125, 0.0125)).unwrap();
        let strong = PdeGrid::new(&BranchingRateMeasure::dirac(1.0).unwrap(), spec(15.0, 0.0125, 0.0125)).unwrap();
        let ys = [0.5, 1.0, 2.0, 3.0];
        let mut prev = vec![0.0; strong.nodes()];
        for &y in &ys {
            let us = solve_fkpp_1d(&strong, y, t, &law, Extreme::Max).unwrap();
            let uw = solve_fkpp_1d(&weak, y, t, &law, Extreme::Max).unwrap();
            assert!(us.iter().zip(&prev).all(|(a, b)| *a >= b - 1e-12));
            assert!(us.iter().zip(&uw).all(|(s, w)| *s <= w + 1e-12));
            prev = us;
        }
    }

    #[test]
    fn grid_refinement_changes_little() {
        let m = BranchingRateMeasure::dirac(1.0).unwrap();
        let law = OffspringLaw::binary();
        let coarse = PdeGrid::new(&m, spec(15.0, 0.0125, 0.005)).unwrap();
        let fine = PdeGrid::new(&m, spec(15.0, 0.00625, 0.0025)).unwrap();
        let t = [2.0, 4.0];
        for &x in &[0.0, 0.5, 1.5, -2.0] {
            let a = solve_fkpp_at(&coarse, x, 1.5, &t, &law, Extreme::Max).unwrap();
            let b = solve_fkpp_at(&fine, x, 1.5, &t, &law, Extreme::Max).unwrap();
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 1e-3, "x = {x}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn diffusive_front_without_branching() {
        // Median of |B_T| is Φ⁻¹(¾)√T.
        let m = BranchingRateMeasure::zero(1).unwrap();
        let g = PdeGrid::new(&m, spec(30.0, 0.025, 0.05)).unwrap();
        let ys: Vec<f64> = (1..=40).map(|i| i as f64 * 0.2).collect();
        let curve = front_curve(&g, 0.0, &ys, &[4.0, 16.0], &OffspringLaw::binary(), Extreme::Max).unwrap();
        assert!(curve.monotone);
        for p in &curve.points {
            let y = p.y_half.unwrap();
            assert!((y / p.t.sqrt() - 0.674_49).abs() < 0.01, "{y} at {}", p.t);
        }
    }

    #[test]
    fn absent_front_is_reported() {
        let m = BranchingRateMeasure::zero(1).unwrap();
        let g = PdeGrid::new(&m, spec(10.0, 0.05, 0.05)).unwrap();
        let curve = front_curve(&g, 0.0, &[5.0, 6.0], &[1.0], &OffspringLaw::binary(), Extreme::Max).unwrap();
        assert_eq!(curve.points[0].y_half, None);
    }

    #[test]
    fn far_supercritical_tail_is_truncated() {
        let m = BranchingRateMeasure::dirac(1.0).unwrap();
        let g = PdeGrid::new(&m, spec(80.0, 0.025, 0.0125)).unwrap();
        let decay = tail_decay_check(&g, 0.0, 10.0, &[0.3, 5.0], &OffspringLaw::binary()).unwrap();
        assert_eq!(decay.truncated, vec![5.0]);
        assert!(decay.fit.is_none());
    }
}
