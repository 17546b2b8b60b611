//! Branching-rate measures and the additive functionals they induce.
//!
//! A measure `μ` on `R^d` (d ≤ 3) is described by one of a handful of
//! analytic presets: finite sums of point masses, a one-dimensional lattice
//! of decaying atoms, the surface measure of a sphere, or an absolutely
//! continuous density. The presets are exactly the ones whose spectral
//! behaviour is known in closed or transcendental form.

mod classify;
mod local_time;
mod offspring;
mod pcaf;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::point::{self, Point};
use crate::{Error, Result};

pub use classify::{classify_measure, MeasureClassification};
pub use local_time::{bridge_local_time, sample_bm_localtime_joint, sample_hitting_time, sample_inverse_local_time};
pub use offspring::OffspringLaw;
pub use pcaf::{ClockRule, Pcaf, PcafAccumulator};

/// Atoms of a lattice preset are dropped beyond this radius by default;
/// `e^{-30^p}` is far below double precision for every admissible `p`.
pub const DEFAULT_LATTICE_TRUNCATION: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Point,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityPreset {
    /// `c · 1{|x| ≤ R}`.
    BallIndicator { radius: f64, coupling: f64 },
    /// `c · 1{0 < |x| ≤ R} |x|^{-p}`.
    PowerLawCompact { radius: f64, exponent: f64, coupling: f64 },
    /// `c · exp(-|x|^p)` with `p > 1`.
    ExpDecay { exponent: f64, coupling: f64 },
    /// Gaussian bump of total mass `mass` and standard deviation `width`
    /// per coordinate; the smooth stand-in for a point catalyst.
    GaussianBump { center: Point, width: f64, mass: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeasureKind {
    Atoms(Vec<Atom>),
    /// `Σ_{|n| ≤ N} e^{-|n|^p} δ_n` on the integer lattice of the line.
    LatticeAtoms { exponent: f64, truncation: u32 },
    /// `c` times the surface measure of the sphere of radius `R`.
    SphereSurface { radius: f64, coupling: f64 },
    Density(DensityPreset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingRateMeasure {
    dim: usize,
    kind: MeasureKind,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Surface area of the unit sphere in `R^d`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!("dimension checked at construction"),
    }
}

impl BranchingRateMeasure {
    pub fn new(dim: usize, kind: MeasureKind) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in 1..=3")));
        }
        match &kind {
            MeasureKind::Atoms(atoms) => {
                for a in atoms {
                    positive("atom weight", a.weight)?;
                    if a.location[dim..].iter().any(|&c| c != 0.0) {
                        return Err(Error::InvalidParameter(
                            "atom location has coordinates beyond the dimension".into(),
                        ));
                    }
                }
                for (i, a) in atoms.iter().enumerate() {
                    if atoms[..i].iter().any(|b| b.location == a.location) {
                        return Err(Error::InvalidParameter(format!(
                            "duplicate atom location {:?}",
                            &a.location[..dim]
                        )));
                    }
                }
            }
            MeasureKind::LatticeAtoms { exponent, truncation } => {
                if dim != 1 {
                    return Err(Error::InvalidParameter("lattice atoms live on the line".into()));
                }
                if !(exponent.is_finite() && *exponent > 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "lattice decay exponent must exceed 1, got {exponent}"
                    )));
                }
                if *truncation == 0 {
                    return Err(Error::InvalidParameter("lattice truncation must be ≥ 1".into()));
                }
            }
            MeasureKind::SphereSurface { radius, coupling } => {
                if dim < 2 {
                    return Err(Error::InvalidParameter(
                        "sphere surface measure needs dimension ≥ 2".into(),
                    ));
                }
                positive("radius", *radius)?;
                positive("coupling", *coupling)?;
            }
            MeasureKind::Density(preset) => match preset {
                DensityPreset::BallIndicator { radius, coupling } => {
                    positive("radius", *radius)?;
                    positive("coupling", *coupling)?;
                }
                DensityPreset::PowerLawCompact { radius, exponent, coupling } => {
                    positive("radius", *radius)?;
                    positive("coupling", *coupling)?;
                    let limit = if dim == 1 { 1.0 } else { 2.0 };
                    if !(exponent.is_finite() && *exponent < limit) {
                        return Err(Error::InvalidParameter(format!(
                            "|x|^-p density is Kato only for p < {limit} in dimension {dim}, got p = {exponent}"
                        )));
                    }
                }
                DensityPreset::ExpDecay { exponent, coupling } => {
                    positive("coupling", *coupling)?;
                    if !(exponent.is_finite() && *exponent > 1.0) {
                        return Err(Error::InvalidParameter(format!(
                            "exp(-|x|^p) density needs p > 1, got {exponent}"
                        )));
                    }
                }
                DensityPreset::GaussianBump { center, width, mass } => {
                    positive("width", *width)?;
                    positive("mass", *mass)?;
                    if center[dim..].iter().any(|&c| c != 0.0) {
                        return Err(Error::InvalidParameter(
                            "bump center has coordinates beyond the dimension".into(),
                        ));
                    }
                }
            },
        }
        Ok(Self { dim, kind })
    }

    /// `c δ_0` on the line.
    pub fn dirac(c: f64) -> Result<Self> {
        Self::new(1, MeasureKind::Atoms(vec![Atom { location: point::ORIGIN, weight: c }]))
    }

    /// `c₁ δ_{−a} + c₂ δ_a` on the line.
    pub fn two_diracs(c1: f64, c2: f64, a: f64) -> Result<Self> {
        positive("half distance", a)?;
        Self::new(
            1,
            MeasureKind::Atoms(vec![
                Atom { location: [-a, 0.0, 0.0], weight: c1 },
                Atom { location: [a, 0.0, 0.0], weight: c2 },
            ]),
        )
    }

    pub fn lattice(exponent: f64) -> Result<Self> {
        Self::new(
            1,
            MeasureKind::LatticeAtoms { exponent, truncation: DEFAULT_LATTICE_TRUNCATION },
        )
    }

    pub fn sphere(dim: usize, radius: f64, coupling: f64) -> Result<Self> {
        Self::new(dim, MeasureKind::SphereSurface { radius, coupling })
    }

    pub fn ball(dim: usize, radius: f64, coupling: f64) -> Result<Self> {
        Self::new(dim, MeasureKind::Density(DensityPreset::BallIndicator { radius, coupling }))
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::new(dim, MeasureKind::Atoms(Vec::new()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    /// Point masses, with lattice presets expanded up to their truncation.
    pub fn atoms(&self) -> Vec<Atom> {
        match &self.kind {
            MeasureKind::Atoms(a) => a.clone(),
            MeasureKind::LatticeAtoms { exponent, truncation } => {
                let n = *truncation as i64;
                (-n..=n)
                    .map(|k| Atom {
                        location: [k as f64, 0.0, 0.0],
                        weight: (-(k.unsigned_abs() as f64).powf(*exponent)).exp(),
                    })
                    .filter(|a| a.weight > 0.0)
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn is_singular(&self) -> bool {
        !matches!(self.kind, MeasureKind::Density(_))
    }

    /// The density `V(x)` for absolutely continuous presets, 0 otherwise.
    pub fn density(&self, x: &Point) -> f64 {
        let MeasureKind::Density(preset) = &self.kind else {
            return 0.0;
        };
        match preset {
            DensityPreset::BallIndicator { radius, coupling } => {
                if point::norm(x) <= *radius {
                    *coupling
                } else {
                    0.0
                }
            }
            DensityPreset::PowerLawCompact { radius, exponent, coupling } => {
                let r = point::norm(x);
                if r > 0.0 && r <= *radius {
                    coupling * r.powf(-exponent)
                } else {
                    0.0
                }
            }
            DensityPreset::ExpDecay { exponent, coupling } => {
                coupling * (-point::norm(x).powf(*exponent)).exp()
            }
            DensityPreset::GaussianBump { center, width, mass } => {
                let r2 = point::dist(x, center).powi(2);
                let norm = (2.0 * PI * width * width).powf(0.5 * self.dim as f64);
                mass * (-r2 / (2.0 * width * width)).exp() / norm
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        let d = self.dim as f64;
        let area = unit_sphere_area(self.dim);
        match &self.kind {
            MeasureKind::Atoms(_) | MeasureKind::LatticeAtoms { .. } => {
                self.atoms().iter().map(|a| a.weight).sum()
            }
            MeasureKind::SphereSurface { radius, coupling } => {
                coupling * area * radius.powi(self.dim as i32 - 1)
            }
            MeasureKind::Density(preset) => match preset {
                DensityPreset::BallIndicator { radius, coupling } => {
                    coupling * area * radius.powf(d) / d
                }
                DensityPreset::PowerLawCompact { radius, exponent, coupling } => {
                    coupling * area * radius.powf(d - exponent) / (d - exponent)
                }
                DensityPreset::ExpDecay { exponent, coupling } => {
                    coupling * area * gamma(d / exponent) / exponent
                }
                DensityPreset::GaussianBump { mass, .. } => *mass,
            },
        }
    }

    /// Radius of the smallest origin-centred ball holding the support, if
    /// the support is compact.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            MeasureKind::Atoms(a) => Some(a.iter().map(|a| point::norm(&a.location)).fold(0.0, f64::max)),
            MeasureKind::LatticeAtoms { truncation, .. } => Some(*truncation as f64),
            MeasureKind::SphereSurface { radius, .. } => Some(*radius),
            MeasureKind::Density(DensityPreset::BallIndicator { radius, .. })
            | MeasureKind::Density(DensityPreset::PowerLawCompact { radius, .. }) => Some(*radius),
            MeasureKind::Density(_) => None,
        }
    }

    /// Euclidean distance from `x` to the support (0 inside it, and 0 for
    /// presets without compact support).
    pub fn distance_to_support(&self, x: &Point) -> f64 {
        match &self.kind {
            MeasureKind::Atoms(a) => a
                .iter()
                .map(|a| point::dist(x, &a.location))
                .fold(f64::INFINITY, f64::min),
            MeasureKind::SphereSurface { radius, .. } => (point::norm(x) - radius).abs(),
            MeasureKind::Density(DensityPreset::BallIndicator { radius, .. })
            | MeasureKind::Density(DensityPreset::PowerLawCompact { radius, .. }) => {
                (point::norm(x) - radius).max(0.0)
            }
            _ => 0.0,
        }
    }

    /// The same measure multiplied by `factor > 0`, e.g. `ν = (Q − 1) μ`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        positive("scale factor", factor)?;
        let kind = match &self.kind {
            MeasureKind::Atoms(a) => MeasureKind::Atoms(
                a.iter().map(|a| Atom { location: a.location, weight: a.weight * factor }).collect(),
            ),
            MeasureKind::LatticeAtoms { exponent, truncation } => {
                // Lattice weights are fixed by the preset; materialise them.
                let atoms = Self::new(
                    1,
                    MeasureKind::LatticeAtoms { exponent: *exponent, truncation: *truncation },
                )?
                .atoms();
                MeasureKind::Atoms(
                    atoms.into_iter().map(|a| Atom { weight: a.weight * factor, ..a }).collect(),
                )
            }
            MeasureKind::SphereSurface { radius, coupling } => {
                MeasureKind::SphereSurface { radius: *radius, coupling: coupling * factor }
            }
            MeasureKind::Density(p) => MeasureKind::Density(match p.clone() {
                DensityPreset::BallIndicator { radius, coupling } => {
                    DensityPreset::BallIndicator { radius, coupling: coupling * factor }
                }
                DensityPreset::PowerLawCompact { radius, exponent, coupling } => {
                    DensityPreset::PowerLawCompact { radius, exponent, coupling: coupling * factor }
                }
                DensityPreset::ExpDecay { exponent, coupling } => {
                    DensityPreset::ExpDecay { exponent, coupling: coupling * factor }
                }
                DensityPreset::GaussianBump { center, width, mass } => {
                    DensityPreset::GaussianBump { center, width, mass: mass * factor }
                }
            }),
        };
        Self::new(self.dim, kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};

    #[test]
    fn rejects_bad_presets() {
        assert!(BranchingRateMeasure::lattice(1.0).is_err());
        assert!(BranchingRateMeasure::sphere(1, 1.0, 1.0).is_err());
        assert!(BranchingRateMeasure::ball(2, -1.0, 1.0).is_err());
        assert!(BranchingRateMeasure::dirac(0.0).is_err());
        let power = |d, p| {
            BranchingRateMeasure::new(
                d,
                MeasureKind::Density(DensityPreset::PowerLawCompact {
                    radius: 1.0,
                    exponent: p,
                    coupling: 1.0,
                }),
            )
        };
        assert!(power(2, 2.0).is_err());
        assert!(power(2, 1.9).is_ok());
        assert!(power(1, 1.0).is_err());
        assert!(power(1, 0.5).is_ok());
        let dup = MeasureKind::Atoms(vec![
            Atom { location: point::ORIGIN, weight: 1.0 },
            Atom { location: point::ORIGIN, weight: 2.0 },
        ]);
        assert!(BranchingRateMeasure::new(1, dup).is_err());
    }

    #[test]
    fn masses_match_radial_quadrature() {
        let cases = [
            BranchingRateMeasure::ball(3, 1.5, 2.0).unwrap(),
            BranchingRateMeasure::new(
                2,
                MeasureKind::Density(DensityPreset::PowerLawCompact {
                    radius: 2.0,
                    exponent: 1.5,
                    coupling: 0.7,
                }),
            )
            .unwrap(),
            BranchingRateMeasure::new(
                3,
                MeasureKind::Density(DensityPreset::ExpDecay { exponent: 2.0, coupling: 1.0 }),
            )
            .unwrap(),
            BranchingRateMeasure::new(
                2,
                MeasureKind::Density(DensityPreset::GaussianBump {
                    center: point::ORIGIN,
                    width: 0.3,
                    mass: 1.7,
                }),
            )
            .unwrap(),
        ];
        for m in &cases {
            let d = m.dim();
            let radial = |r: f64| unit_sphere_area(d) * r.powi(d as i32 - 1) * m.density(&[r, 0.0, 0.0]);
            let mut total = 0.0;
            // Split at the support edge so the integrand is smooth per piece.
            let edges = [0.0, 1.5, 2.0, 12.0];
            for w in edges.windows(2) {
                total += integrate(radial, w[0], w[1], Tolerance::rel(1e-12)).value;
            }
            assert!((total / m.total_mass() - 1.0).abs() < 1e-8, "{m:?}: {total}");
        }
    }

    #[test]
    fn lattice_expansion() {
        let m = BranchingRateMeasure::lattice(2.0).unwrap();
        let atoms = m.atoms();
        // e^{-n²} underflows beyond |n| = 27.
        assert_eq!(atoms.len(), 55);
        assert_eq!(atoms[27].weight, 1.0);
        assert!(atoms[0].weight > 0.0 && atoms[0].weight < 1e-300);
    }

    #[test]
    fn scaling_preserves_shape() {
        let m = BranchingRateMeasure::sphere(3, 1.0, 0.5).unwrap();
        let s = m.scaled(3.0).unwrap();
        assert!((s.total_mass() - 3.0 * m.total_mass()).abs() < 1e-12);
        let l = BranchingRateMeasure::lattice(1.5).unwrap().scaled(2.0).unwrap();
        assert!((l.total_mass() - 2.0 * BranchingRateMeasure::lattice(1.5).unwrap().total_mass()).abs() < 1e-12);
    }
}
