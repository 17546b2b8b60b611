use nalgebra::{DMatrix, SymmetricEigen};

use super::{Eigenfunction, SpectralMethod, SpectralResult};
use crate::measures::Atom;
use crate::{Error, Result};

/// `λ(c δ_0) = −c²/2` with ground state `√c e^{−c|x|}`.
pub fn lambda_single_dirac(c: f64) -> Result<SpectralResult> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter(format!("coupling {c} must be positive")));
    }
    Ok(SpectralResult::new(
        -0.5 * c * c,
        SpectralMethod::ClosedForm,
        Some(Eigenfunction::SingleDirac { c, location: 0.0 }),
    ))
}

/// Symmetrised kernel `W^{1/2} G_{s²/2} W^{1/2}` on the atoms.
fn kernel(locations: &[f64], weights: &[f64], s: f64) -> DMatrix<f64> {
    let n = locations.len();
    DMatrix::from_fn(n, n, |i, j| {
        (weights[i] * weights[j]).sqrt() * (-s * (locations[i] - locations[j]).abs()).exp() / s
    })
}

fn perron_pair(locations: &[f64], weights: &[f64], s: f64) -> (f64, Vec<f64>) {
    if locations.len() == 1 {
        return (weights[0] / s, vec![1.0]);
    }
    let eig = SymmetricEigen::new(kernel(locations, weights, s));
    let (idx, &rho) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let v = eig.eigenvectors.column(idx);
    let sign = if v.sum() < 0.0 { -1.0 } else { 1.0 };
    (rho, v.iter().map(|x| sign * x).collect())
}

/// Largest eigenvalue of `K(s)_{ij} = G_{s²/2}(x_i, x_j) w_j` on the line.
pub fn perron_root(atoms: &[Atom], s: f64) -> f64 {
    let (loc, w) = split(atoms);
    perron_pair(&loc, &w, s).0
}

fn split(atoms: &[Atom]) -> (Vec<f64>, Vec<f64>) {
    (atoms.iter().map(|a| a.location[0]).collect(), atoms.iter().map(|a| a.weight).collect())
}

/// Builds the normalised ground state from the Perron vector at `s`.
fn atomic_eigenfunction(locations: Vec<f64>, weights: Vec<f64>, s: f64) -> Eigenfunction {
    let (_, u) = perron_pair(&locations, &weights, s);
    // Undo the symmetrisation through the eigen-equation, h_i = Σ_j G_ij √w_j u_j,
    // rather than u_i / √w_i, which loses everything on tiny atoms.
    let n = locations.len();
    let mut values: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (-s * (locations[i] - locations[j]).abs()).exp() / s * weights[j].sqrt() * u[j])
                .sum()
        })
        .collect();
    // ∫ e^{−s|x−a|} e^{−s|x−b|} dx = (1 + s r) e^{−s r} / s.
    let mut norm2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let r = (locations[i] - locations[j]).abs();
            norm2 += weights[i] * weights[j] * values[i] * values[j] * (1.0 + s * r) * (-s * r).exp() / s.powi(3);
        }
    }
    let scale = norm2.sqrt().recip();
    values.iter_mut().for_each(|v| *v *= scale);
    Eigenfunction::Atomic { locations, weights, values, s }
}

/// Principal eigenvalue for finitely many atoms on the line: the unique
/// `s = √(−2λ)` at which the Perron root of the resolvent matrix on the
/// atoms equals 1, found by bisection.
pub fn lambda_atomic(atoms: &[Atom], dim: usize) -> Result<SpectralResult> {
    if dim != 1 {
        return Err(Error::SingularKernel(dim));
    }
    if atoms.is_empty() {
        return Err(Error::InvalidParameter("no atoms".into()));
    }
    if let Some(a) = atoms.iter().find(|a| !(a.weight > 0.0)) {
        return Err(Error::InvalidParameter(format!("atom weight {} must be positive", a.weight)));
    }
    let (loc, w) = split(atoms);
    // ρ(s) ≥ max w / s and ρ(s) ≤ Σ w / s, so the root lies in [max w, Σ w].
    let mut lo = w.iter().cloned().fold(0.0, f64::max);
    let mut hi: f64 = w.iter().sum();
    let mut trace = vec![(lo, perron_pair(&loc, &w, lo).0), (hi, perron_pair(&loc, &w, hi).0)];
    if trace[0].1 < 1.0 - 1e-12 || trace[1].1 > 1.0 + 1e-12 {
        return Err(Error::NoRoot(format!(
            "Perron root {} at s = {lo}, {} at s = {hi}",
            trace[0].1, trace[1].1
        )));
    }
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let rho = perron_pair(&loc, &w, mid).0;
        trace.push((mid, rho));
        if rho > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    trace.sort_by(|a, b| a.0.total_cmp(&b.0));
    for pair in trace.windows(2) {
        if pair[1].1 > pair[0].1 + 1e-13 {
            return Err(Error::NonMonotonePerron(pair[1].0));
        }
    }
    let s = 0.5 * (lo + hi);
    Ok(SpectralResult::new(
        -0.5 * s * s,
        SpectralMethod::AtomicPerron,
        Some(atomic_eigenfunction(loc, w, s)),
    ))
}

/// `c₁ δ_{−a} + c₂ δ_a` with `0 < c₁ ≤ c₂`: the root `s > c₂` of
/// `(c₁ − s)(c₂ − s) = c₁ c₂ e^{−4as}`.
pub fn lambda_two_diracs(c1: f64, c2: f64, a: f64) -> Result<SpectralResult> {
    if !(c1 > 0.0 && c2 >= c1 && a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < c1 ≤ c2 and a > 0, got c1 = {c1}, c2 = {c2}, a = {a}"
        )));
    }
    let f = |s: f64| (c1 - s) * (c2 - s) - c1 * c2 * (-4.0 * a * s).exp();
    let (mut lo, mut hi) = (c2, c1 + c2);
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::BracketFailure(format!("f({lo}) = {}, f({hi}) = {}", f(lo), f(hi))));
    }
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok(SpectralResult::new(
        -0.5 * s * s,
        SpectralMethod::Transcendental,
        Some(atomic_eigenfunction(vec![-a, a], vec![c1, c2], s)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::BranchingRateMeasure;

    fn atom(x: f64, w: f64) -> Atom {
        Atom { location: [x, 0.0, 0.0], weight: w }
    }

    fn residual(ef: &Eigenfunction) -> f64 {
        let Eigenfunction::Atomic { locations, values, .. } = ef else { panic!() };
        locations
            .iter()
            .zip(values)
            .map(|(&x, &h)| (ef.eval(&[x, 0.0, 0.0]) - h).abs())
            .fold(0.0, f64::max)
    }

    // Plain bisection on the printed two-atom equation.
    fn two_atom_oracle(c1: f64, c2: f64, a: f64) -> f64 {
        let f = |s: f64| (c1 - s) * (c2 - s) - c1 * c2 * (-4.0 * a * s).exp();
        let (mut lo, mut hi) = (c2, c1 + c2);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        -0.5 * lo * lo
    }

    #[test]
    fn single_dirac_values() {
        assert_eq!(lambda_single_dirac(1.0).unwrap().lambda, -0.5);
        assert_eq!(lambda_single_dirac(1.0).unwrap().speed, 0.5);
        assert_eq!(lambda_single_dirac(2.0).unwrap().lambda, -2.0);
        assert!(lambda_single_dirac(0.0).is_err());
    }

    #[test]
    fn perron_on_one_atom_matches_closed_form() {
        for c in [0.5, 1.0, 2.0] {
            let r = lambda_atomic(&[atom(0.0, c)], 1).unwrap();
            assert!((r.lambda + 0.5 * c * c).abs() < 1e-10);
        }
    }

    #[test]
    fn two_atoms_unit_weights() {
        let r = lambda_two_diracs(1.0, 1.0, 1.0).unwrap();
        let oracle = two_atom_oracle(1.0, 1.0, 1.0);
        assert!((r.lambda - oracle).abs() < 1e-12);
        let s = r.decay_rate();
        assert!((s - 1.109).abs() < 1e-3, "{s}");
        assert!((r.lambda + 0.615).abs() < 1e-3);
        let p = lambda_atomic(&[atom(-1.0, 1.0), atom(1.0, 1.0)], 1).unwrap();
        assert!((p.lambda - r.lambda).abs() < 1e-8);
    }

    #[test]
    fn merged_and_separated_limits() {
        let merged = lambda_two_diracs(0.7, 1.3, 1e-8).unwrap();
        assert!((merged.lambda + 2.0).abs() < 1e-6);
        let far = lambda_two_diracs(1.0, 1.0, 10.0).unwrap();
        assert!((far.lambda + 0.5).abs() < 1e-3);
        assert!(far.lambda < -0.5);
    }

    #[test]
    fn two_atom_solvers_agree_on_grid() {
        for &c1 in &[0.3, 1.0, 2.0] {
            for &c2 in &[1.0, 2.5] {
                if c1 > c2 {
                    continue;
                }
                for &a in &[0.05, 0.5, 2.0] {
                    let t = lambda_two_diracs(c1, c2, a).unwrap();
                    let p = lambda_atomic(&[atom(-a, c1), atom(a, c2)], 1).unwrap();
                    assert!((t.lambda - p.lambda).abs() < 1e-8, "{c1} {c2} {a}");
                    assert!(residual(p.eigenfunction.as_ref().unwrap()) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn lattice_self_consistency() {
        let m = BranchingRateMeasure::lattice(2.0).unwrap();
        let r = lambda_atomic(&m.atoms(), 1).unwrap();
        let ef = r.eigenfunction.as_ref().unwrap();
        assert!(residual(ef) < 1e-8);
        // Printed lattice equation at a few off-lattice points too.
        let s = r.decay_rate();
        let Eigenfunction::Atomic { locations, values, .. } = ef else { panic!() };
        for &x in &[0.3, -1.7, 4.2] {
            let rhs: f64 = locations
                .iter()
                .zip(values)
                .map(|(&n, &h)| h * (-n.abs().powi(2) - s * (x - n).abs()).exp() / s)
                .sum();
            assert!((ef.eval(&[x, 0.0, 0.0]) - rhs).abs() < 1e-12);
        }
        assert!(r.lambda < -0.5);
    }

    #[test]
    fn higher_dimensional_atoms_are_singular() {
        assert_eq!(lambda_atomic(&[atom(0.0, 1.0)], 3), Err(Error::SingularKernel(3)));
    }

    #[test]
    fn scaling_and_reflection() {
        let base = lambda_single_dirac(1.0).unwrap().lambda;
        for c in [0.5, 1.0, 2.0, 4.0] {
            let l = lambda_atomic(&[atom(0.0, c)], 1).unwrap().lambda;
            assert!((l - c * c * base).abs() < 1e-10 * c * c);
        }
        let atoms = [atom(-0.4, 0.3), atom(0.9, 1.1), atom(2.0, 0.6)];
        let mirrored: Vec<Atom> = atoms.iter().map(|a| atom(-a.location[0], a.weight)).collect();
        let l1 = lambda_atomic(&atoms, 1).unwrap().lambda;
        let l2 = lambda_atomic(&mirrored, 1).unwrap().lambda;
        assert!((l1 - l2).abs() < 1e-13);
    }

    #[test]
    fn perron_root_decreases() {
        let atoms = [atom(-1.0, 1.0), atom(0.5, 0.4), atom(1.5, 2.0)];
        let mut last = f64::INFINITY;
        for k in 1..200 {
            let rho = perron_root(&atoms, 0.02 * k as f64);
            assert!(rho < last);
            last = rho;
        }
    }

    #[test]
    fn atomic_profile_is_normalised() {
        use crate::quadrature::{integrate, Tolerance};
        let r = lambda_two_diracs(0.5, 1.5, 0.8).unwrap();
        let h = r.eigenfunction.unwrap();
        let mut sq = 0.0;
        for w in [-60.0, -0.8, 0.8, 60.0].windows(2) {
            sq += integrate(|x| h.eval(&[x, 0.0, 0.0]).powi(2), w[0], w[1], Tolerance::rel(1e-12)).value;
        }
        assert!((sq - 1.0).abs() < 1e-6);
        let mut int = 0.0;
        for w in [-80.0, -0.8, 0.8, 80.0].windows(2) {
            int += integrate(|x| h.eval(&[x, 0.0, 0.0]), w[0], w[1], Tolerance::rel(1e-12)).value;
        }
        assert!((int / h.integral() - 1.0).abs() < 1e-8);
    }
}
