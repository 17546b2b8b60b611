use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{local_time::bridge_local_time, Atom, BranchingRateMeasure, MeasureKind, OffspringLaw};
use crate::point::{self, Point};
use crate::{Error, Result};

/// How the singular part of a measure is turned into a clock along a
/// discretised path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClockRule {
    /// Occupation of the band of half-width `eps` around each atom (or
    /// around the sphere, radially), weighted `1/(2 eps)`; a step counts
    /// as inside when its midpoint is. Needs `dt ≪ eps²`.
    Band { eps: f64 },
    /// Exact local time of the Brownian bridge between the step endpoints,
    /// sampled per atom. Only for atoms on the line; atoms closer than a few
    /// `√dt` are treated independently.
    BridgeLocalTime,
}

/// Additive functional `A^μ` (or `A^ν` after scaling) along a discretised
/// Brownian path.
#[derive(Debug, Clone)]
pub struct Pcaf {
    measure: BranchingRateMeasure,
    rule: ClockRule,
    scale: f64,
    atoms: Vec<Atom>,
}

impl Pcaf {
    pub fn new(measure: &BranchingRateMeasure, rule: ClockRule) -> Result<Self> {
        Self::with_scale(measure, rule, 1.0)
    }

    /// The functional of `ν = (Q − 1) μ`.
    pub fn for_nu(measure: &BranchingRateMeasure, offspring: &OffspringLaw, rule: ClockRule) -> Result<Self> {
        Self::with_scale(measure, rule, offspring.mean() - 1.0)
    }

    pub fn with_scale(measure: &BranchingRateMeasure, rule: ClockRule, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidParameter(format!("functional scale {scale} must be ≥ 0")));
        }
        if let ClockRule::Band { eps } = rule {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::InvalidParameter(format!("band half-width {eps} must be positive")));
            }
        }
        let atoms = measure.atoms();
        if !atoms.is_empty() && measure.dim() != 1 {
            return Err(Error::Unsupported(
                "additive functional of point masses in dimension ≥ 2 (not Kato)".into(),
            ));
        }
        if rule == ClockRule::BridgeLocalTime && matches!(measure.kind(), MeasureKind::SphereSurface { .. }) {
            return Err(Error::Unsupported("bridge local time is only available for atoms on the line".into()));
        }
        Ok(Self { measure: measure.clone(), rule, scale, atoms })
    }

    pub fn measure(&self) -> &BranchingRateMeasure {
        &self.measure
    }

    pub fn rule(&self) -> ClockRule {
        self.rule
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Increment over one step from `prev` to `next` of length `dt` under
    /// the band rule (densities use the trapezoid rule).
    pub fn increment(&self, prev: &Point, next: &Point, dt: f64) -> f64 {
        let eps = match self.rule {
            ClockRule::Band { eps } => eps,
            ClockRule::BridgeLocalTime => {
                panic!("bridge local time is random; use sample_increment")
            }
        };
        self.scale * (self.density_part(prev, next, dt) + self.band_part(prev, next, dt, eps))
    }

    /// Increment over one step, drawing the bridge local time when the rule
    /// asks for it.
    pub fn sample_increment<R: Rng + ?Sized>(&self, prev: &Point, next: &Point, dt: f64, rng: &mut R) -> f64 {
        match self.rule {
            ClockRule::Band { .. } => self.increment(prev, next, dt),
            ClockRule::BridgeLocalTime => {
                let mut inc = self.density_part(prev, next, dt);
                for atom in &self.atoms {
                    inc += atom.weight * bridge_local_time(prev[0], next[0], atom.location[0], dt, rng);
                }
                self.scale * inc
            }
        }
    }

    /// Increment over one step, stopping at `budget`. When the budget is
    /// exhausted by the local time of an atom (bridge rule) the atom's
    /// location is returned with it: that is where the clock actually rang.
    pub fn sample_until<R: Rng + ?Sized>(
        &self,
        prev: &Point,
        next: &Point,
        dt: f64,
        budget: f64,
        rng: &mut R,
    ) -> (f64, Option<Point>) {
        match self.rule {
            ClockRule::Band { .. } => (self.increment(prev, next, dt), None),
            ClockRule::BridgeLocalTime => {
                let mut inc = self.scale * self.density_part(prev, next, dt);
                if inc >= budget {
                    return (inc, None);
                }
                for atom in &self.atoms {
                    inc += self.scale * atom.weight * bridge_local_time(prev[0], next[0], atom.location[0], dt, rng);
                    if inc >= budget {
                        return (inc, Some(atom.location));
                    }
                }
                (inc, None)
            }
        }
    }

    fn density_part(&self, prev: &Point, next: &Point, dt: f64) -> f64 {
        if let MeasureKind::Density(_) = self.measure.kind() {
            0.5 * dt * (self.measure.density(prev) + self.measure.density(next))
        } else {
            0.0
        }
    }

    fn band_part(&self, prev: &Point, next: &Point, dt: f64, eps: f64) -> f64 {
        let mid = point::midpoint(prev, next);
        let weight = dt / (2.0 * eps);
        match self.measure.kind() {
            MeasureKind::SphereSurface { radius, coupling } => {
                if (point::norm(&mid) - radius).abs() < eps {
                    coupling * weight
                } else {
                    0.0
                }
            }
            _ => self
                .atoms
                .iter()
                .filter(|a| (mid[0] - a.location[0]).abs() < eps)
                .map(|a| a.weight * weight)
                .sum(),
        }
    }
}

/// Running value of an additive functional along one path.
#[derive(Debug, Clone)]
pub struct PcafAccumulator<'a> {
    pcaf: &'a Pcaf,
    value: f64,
}

impl<'a> PcafAccumulator<'a> {
    pub fn new(pcaf: &'a Pcaf) -> Self {
        Self { pcaf, value: 0.0 }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn advance(&mut self, prev: &Point, next: &Point, dt: f64) -> f64 {
        let inc = self.pcaf.increment(prev, next, dt);
        self.value += inc;
        inc
    }

    pub fn advance_sampled<R: Rng + ?Sized>(&mut self, prev: &Point, next: &Point, dt: f64, rng: &mut R) -> f64 {
        let inc = self.pcaf.sample_increment(prev, next, dt, rng);
        self.value += inc;
        inc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(x: f64) -> Point {
        [x, 0.0, 0.0]
    }

    #[test]
    fn constant_density_increment() {
        let m = BranchingRateMeasure::ball(1, 1.0, 2.0).unwrap();
        let pcaf = Pcaf::new(&m, ClockRule::Band { eps: 5e-3 }).unwrap();
        let inc = pcaf.increment(&line(0.1), &line(-0.2), 0.01);
        assert!((inc - 0.02).abs() < 1e-15);
    }

    #[test]
    fn atom_outside_band_contributes_nothing() {
        let m = BranchingRateMeasure::dirac(1.0).unwrap();
        let pcaf = Pcaf::new(&m, ClockRule::Band { eps: 5e-3 }).unwrap();
        assert_eq!(pcaf.increment(&line(0.01), &line(0.02), 1e-4), 0.0);
        assert!((pcaf.increment(&line(0.001), &line(-0.002), 1e-4) - 1e-4 / 1e-2).abs() < 1e-15);
    }

    #[test]
    fn nu_scaling_uses_mean_minus_one() {
        let m = BranchingRateMeasure::ball(1, 1.0, 1.0).unwrap();
        let law = OffspringLaw::finite(&[(1, 0.5), (4, 0.5)]).unwrap();
        let pcaf = Pcaf::for_nu(&m, &law, ClockRule::Band { eps: 0.1 }).unwrap();
        assert!((pcaf.increment(&line(0.0), &line(0.0), 1.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn sphere_band_is_radial() {
        let m = BranchingRateMeasure::sphere(3, 1.0, 0.3).unwrap();
        let pcaf = Pcaf::new(&m, ClockRule::Band { eps: 0.1 }).unwrap();
        let inc = pcaf.increment(&[0.0, 0.7, 0.7], &[0.0, 0.71, 0.71], 1e-3);
        assert!((inc - 0.3 * 1e-3 / 0.2).abs() < 1e-15);
        assert_eq!(pcaf.increment(&[0.0, 0.5, 0.0], &[0.0, 0.5, 0.01], 1e-3), 0.0);
    }

    #[test]
    fn planar_atoms_rejected() {
        let m = BranchingRateMeasure::new(2, MeasureKind::Atoms(vec![Atom { location: [0.0; 3], weight: 1.0 }]))
            .unwrap();
        assert!(Pcaf::new(&m, ClockRule::Band { eps: 0.1 }).is_err());
    }

    #[test]
    fn bridge_clock_reports_the_ringing_atom() {
        use rand::SeedableRng;
        let m = BranchingRateMeasure::two_diracs(1.0, 1.0, 0.5).unwrap();
        let pcaf = Pcaf::new(&m, ClockRule::BridgeLocalTime).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        // A crossing of x = 0.5 only, with a tiny budget.
        let (inc, at) = pcaf.sample_until(&line(0.45), &line(0.55), 1e-4, 1e-9, &mut rng);
        assert!(inc >= 1e-9);
        assert_eq!(at, Some([0.5, 0.0, 0.0]));
        let (_, none) = pcaf.sample_until(&line(5.0), &line(5.01), 1e-4, 1e-9, &mut rng);
        assert_eq!(none, None);
    }

    proptest! {
        #[test]
        fn additive_and_monotone(steps in proptest::collection::vec(-0.05f64..0.05, 2..200), split in 1usize..199) {
            let m = BranchingRateMeasure::new(
                1,
                MeasureKind::Atoms(vec![
                    Atom { location: [0.0; 3], weight: 1.0 },
                    Atom { location: [0.1, 0.0, 0.0], weight: 0.5 },
                ]),
            ).unwrap();
            let pcaf = Pcaf::new(&m, ClockRule::Band { eps: 0.02 }).unwrap();
            let mut path = vec![line(0.0)];
            for s in &steps {
                let last = path.last().unwrap()[0];
                path.push(line(last + s));
            }
            let split = split.min(path.len() - 1);
            let dt = 1e-3;
            let mut whole = PcafAccumulator::new(&pcaf);
            let mut prev_value = 0.0;
            for w in path.windows(2) {
                whole.advance(&w[0], &w[1], dt);
                prop_assert!(whole.value() >= prev_value);
                prev_value = whole.value();
            }
            let mut first = PcafAccumulator::new(&pcaf);
            for w in path[..=split].windows(2) {
                first.advance(&w[0], &w[1], dt);
            }
            let mut second = PcafAccumulator::new(&pcaf);
            for w in path[split..].windows(2) {
                second.advance(&w[0], &w[1], dt);
            }
            // Same increments, same summation order.
            let mut check = first.value();
            let mut redo = PcafAccumulator::new(&pcaf);
            for w in path[split..].windows(2) {
                check += redo.advance(&w[0], &w[1], dt);
            }
            prop_assert_eq!(check, whole.value());
            prop_assert!((first.value() + second.value() - whole.value()).abs() <= 1e-12);
        }

        #[test]
        fn zero_scale_is_identically_zero(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let m = BranchingRateMeasure::dirac(3.0).unwrap();
            let pcaf = Pcaf::with_scale(&m, ClockRule::Band { eps: 0.5 }, 0.0).unwrap();
            prop_assert_eq!(pcaf.increment(&line(a), &line(b), 0.1), 0.0);
        }
    }
}
