use serde::{Deserialize, Serialize};

use super::{BranchingRateMeasure, DensityPreset, MeasureKind, OffspringLaw};

/// Membership of a preset in the Kato class, the Green-tight class and
/// whether every exponential tilt `e^{β|x|} ν` stays Green tight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureClassification {
    pub is_kato: bool,
    pub is_green_tight: bool,
    pub nu_beta_green_tight_all_beta: bool,
    pub rationale: String,
}

impl MeasureClassification {
    fn new(kato: bool, tight: bool, tilted: bool, rationale: &str) -> Self {
        debug_assert!(!tilted || tight);
        debug_assert!(!tight || kato);
        Self {
            is_kato: kato,
            is_green_tight: tight,
            nu_beta_green_tight_all_beta: tilted,
            rationale: rationale.to_string(),
        }
    }
}

/// Classifies a preset analytically. The offspring law only enters through
/// `ν = (Q − 1) μ`, which has the same classification as `μ` when `Q > 1`
/// and is the zero measure when `Q = 1`.
pub fn classify_measure(m: &BranchingRateMeasure, offspring: &OffspringLaw) -> MeasureClassification {
    let trivial = offspring.mean() <= 1.0;
    let mut c = match m.kind() {
        MeasureKind::Atoms(atoms) if atoms.is_empty() => {
            MeasureClassification::new(true, true, true, "zero measure")
        }
        MeasureKind::Atoms(_) if m.dim() == 1 => MeasureClassification::new(
            true,
            true,
            true,
            "finite measure on the line: local mass bounded by total mass, and e^{β|x|}μ is again finite",
        ),
        MeasureKind::Atoms(_) => MeasureClassification::new(
            false,
            false,
            false,
            "point mass in d ≥ 2: the Green kernel singularity is not integrable against an atom",
        ),
        MeasureKind::LatticeAtoms { .. } => MeasureClassification::new(
            true,
            true,
            true,
            "lattice atoms e^{-|n|^p}, p > 1: e^{β|n|-|n|^p} is summable, so every tilt is a finite measure on the line",
        ),
        MeasureKind::SphereSurface { .. } => MeasureClassification::new(
            true,
            true,
            true,
            "sphere surface measure: Kato with compact support, hence Green tight; tilts stay compactly supported",
        ),
        MeasureKind::Density(preset) => match preset {
            DensityPreset::BallIndicator { .. } => MeasureClassification::new(
                true,
                true,
                true,
                "bounded density with compact support",
            ),
            DensityPreset::PowerLawCompact { .. } => MeasureClassification::new(
                true,
                true,
                true,
                "V ≤ c|x|^{-p} near 0 with p < 1 (d = 1) or p < 2 (d ≥ 2), compact support",
            ),
            DensityPreset::ExpDecay { .. } => MeasureClassification::new(
                true,
                true,
                true,
                "V ≤ e^{-|x|^p} with p > 1: e^{β|x|}V is bounded and integrable for every β",
            ),
            DensityPreset::GaussianBump { .. } => MeasureClassification::new(
                true,
                true,
                true,
                "bounded density with Gaussian tails: e^{β|x|}V decays faster than any power",
            ),
        },
    };
    if trivial {
        c.rationale.push_str("; Q = 1 so ν = (Q − 1)μ vanishes");
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Atom;

    #[test]
    fn single_atom_on_line() {
        let c = classify_measure(&BranchingRateMeasure::dirac(1.0).unwrap(), &OffspringLaw::binary());
        assert!(c.is_kato && c.is_green_tight && c.nu_beta_green_tight_all_beta);
    }

    #[test]
    fn exp_decay_in_three_dimensions() {
        let m = BranchingRateMeasure::new(
            3,
            MeasureKind::Density(DensityPreset::ExpDecay { exponent: 2.0, coupling: 1.0 }),
        )
        .unwrap();
        assert!(classify_measure(&m, &OffspringLaw::binary()).nu_beta_green_tight_all_beta);
    }

    #[test]
    fn planar_atom_is_not_kato() {
        let m = BranchingRateMeasure::new(
            2,
            MeasureKind::Atoms(vec![Atom { location: [0.0; 3], weight: 1.0 }]),
        )
        .unwrap();
        let c = classify_measure(&m, &OffspringLaw::binary());
        assert!(!c.is_kato && !c.is_green_tight);
    }

    #[test]
    fn pure_and_implications_hold() {
        let presets = vec![
            BranchingRateMeasure::dirac(2.0).unwrap(),
            BranchingRateMeasure::lattice(1.5).unwrap(),
            BranchingRateMeasure::sphere(3, 1.0, 0.3).unwrap(),
            BranchingRateMeasure::ball(3, 1.0, 2.0).unwrap(),
            BranchingRateMeasure::zero(2).unwrap(),
        ];
        let law = OffspringLaw::binary();
        for m in &presets {
            let a = classify_measure(m, &law);
            assert_eq!(a, classify_measure(m, &law));
            assert!(!a.nu_beta_green_tight_all_beta || a.is_green_tight);
            assert!(!a.is_green_tight || a.is_kato);
            assert!(!a.rationale.is_empty());
        }
    }
}
