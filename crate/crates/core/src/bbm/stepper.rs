use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Particle, Population};
use crate::measures::{BranchingRateMeasure, ClockRule, OffspringLaw, Pcaf};
use crate::point::Point;
use crate::{Error, Result};

/// Bridge bisections used to place a ring inside a step.
const RING_BISECTIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperSettings {
    pub dt: f64,
    pub clock: ClockRule,
    /// When set and the measure has compact support, particles far from the
    /// support are moved with steps up to this size; the step never exceeds
    /// `(distance / 6)²` so nobody jumps onto the support unnoticed.
    pub max_dt: Option<f64>,
}

/// Time-stepping engine: Gaussian increments, clock increments from the
/// additive functional of `μ`, branching inside the step.
#[derive(Debug, Clone)]
pub struct Simulator {
    measure: BranchingRateMeasure,
    offspring: OffspringLaw,
    pcaf: Pcaf,
    settings: StepperSettings,
    population_cap: usize,
}

impl Simulator {
    pub fn new(
        measure: &BranchingRateMeasure,
        offspring: &OffspringLaw,
        settings: StepperSettings,
        population_cap: usize,
    ) -> Result<Self> {
        if !(settings.dt.is_finite() && settings.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step {} must be positive", settings.dt)));
        }
        if let Some(max_dt) = settings.max_dt {
            if !(max_dt >= settings.dt) {
                return Err(Error::InvalidParameter(format!("max_dt {max_dt} below dt {}", settings.dt)));
            }
        }
        if population_cap == 0 {
            return Err(Error::InvalidParameter("population cap must be at least 1".into()));
        }
        // The clock runs on μ; the offspring law only sets the multiplicity.
        let pcaf = Pcaf::new(measure, settings.clock)?;
        Ok(Self { measure: measure.clone(), offspring: offspring.clone(), pcaf, settings, population_cap })
    }

    pub fn settings(&self) -> &StepperSettings {
        &self.settings
    }

    /// Step to use from the current configuration, at most `remaining`.
    pub fn step_size(&self, pop: &Population, remaining: f64) -> f64 {
        let dt = self.settings.dt;
        let adaptive = match self.settings.max_dt {
            Some(max_dt) if self.measure.support_radius().is_some() => {
                let margin = match self.settings.clock {
                    ClockRule::Band { eps } => eps,
                    ClockRule::BridgeLocalTime => 0.0,
                };
                let nearest = pop
                    .positions()
                    .map(|x| self.measure.distance_to_support(x) - margin)
                    .fold(f64::INFINITY, f64::min);
                (nearest.max(0.0) / 6.0).powi(2).clamp(dt, max_dt)
            }
            _ => dt,
        };
        adaptive.min(remaining)
    }

    /// Advances every particle by `dt`.
    ///
    /// When a clock rings inside the step the children live out the rest of
    /// it: for densities and band clocks the ring is placed on the Brownian
    /// bridge across the step (see `locate_ring`) and the children start
    /// there. Under the bridge local-time clock children
    /// start on the ringing atom at the end of the step.
    ///
    /// Errors with [`Error::PopulationCap`] when the population would exceed
    /// the cap; the population is then left at the end of the step.
    pub fn step<R: Rng + ?Sized>(&self, pop: &mut Population, dt: f64, rng: &mut R) -> Result<()> {
        let dim = self.measure.dim();
        let mut done = Vec::with_capacity(pop.len());
        let mut stack: Vec<(Particle, f64)> =
            std::mem::take(&mut pop.particles).into_iter().rev().map(|p| (p, dt)).collect();
        while let Some((mut p, left)) = stack.pop() {
            if left <= 0.0 {
                done.push(p);
                continue;
            }
            let prev = p.position;
            let mut next: Point = prev;
            let sd = left.sqrt();
            for x in next.iter_mut().take(dim) {
                *x += sd * rng.sample::<f64, _>(StandardNormal);
            }
            let budget = p.threshold - p.accumulated;
            let (inc, ring_at) = self.pcaf.sample_until(&prev, &next, left, budget, rng);
            if inc < budget {
                p.position = next;
                p.accumulated += inc;
                done.push(p);
                continue;
            }
            let (at, rest) = match ring_at {
                Some(atom) => (atom, 0.0),
                None => {
                    let (at, elapsed) = self.locate_ring(prev, next, left, inc, budget, rng);
                    (at, left - elapsed)
                }
            };
            pop.event_count += 1;
            for _ in 0..self.offspring.sample(rng) {
                let child = pop.spawn(Some(p.id), at, rng);
                stack.push((child, rest));
            }
        }
        pop.particles = done;
        pop.time += dt;
        if pop.len() > self.population_cap {
            return Err(Error::PopulationCap { cap: self.population_cap, time: pop.time });
        }
        Ok(())
    }

    /// Where and when inside a step of length `len` the clock reaches
    /// `budget`, given that the whole step adds `inc ≥ budget`.
    ///
    /// For densities the bridge is bisected and the increment shared between
    /// the halves in proportion to their trapezoid weights, so the ring lands
    /// where the rate is high rather than uniformly along the step. The total
    /// over the step is unchanged.
    fn locate_ring<R: Rng + ?Sized>(
        &self,
        mut a: Point,
        mut b: Point,
        mut len: f64,
        mut inc: f64,
        mut budget: f64,
        rng: &mut R,
    ) -> (Point, f64) {
        let dim = self.measure.dim();
        let mut offset = 0.0;
        if !self.measure.is_singular() {
            let (mut va, mut vb) = (self.measure.density(&a), self.measure.density(&b));
            for _ in 0..RING_BISECTIONS {
                let sd = (0.25 * len).sqrt();
                let mut mid = a;
                for (k, x) in mid.iter_mut().enumerate().take(dim) {
                    *x = 0.5 * (a[k] + b[k]) + sd * rng.sample::<f64, _>(StandardNormal);
                }
                let vm = self.measure.density(&mid);
                let (w1, w2) = (va + vm, vm + vb);
                let first = if w1 + w2 > 0.0 { inc * w1 / (w1 + w2) } else { 0.5 * inc };
                len *= 0.5;
                if budget <= first {
                    b = mid;
                    vb = vm;
                    inc = first;
                } else {
                    budget -= first;
                    inc -= first;
                    offset += len;
                    a = mid;
                    va = vm;
                }
            }
        }
        let phi = if inc > 0.0 { (budget / inc).clamp(0.0, 1.0) } else { 0.5 };
        let spread = (phi * (1.0 - phi) * len).sqrt();
        let mut at = a;
        for (k, x) in at.iter_mut().enumerate().take(dim) {
            *x += phi * (b[k] - a[k]) + spread * rng.sample::<f64, _>(StandardNormal);
        }
        (at, offset + phi * len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbm::init_population;
    use crate::measures::{DensityPreset, MeasureKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn settings(dt: f64, clock: ClockRule) -> StepperSettings {
        StepperSettings { dt, clock, max_dt: None }
    }

    #[test]
    fn zero_measure_never_branches() {
        let m = BranchingRateMeasure::zero(1).unwrap();
        let sim = Simulator::new(&m, &OffspringLaw::binary(), settings(0.01, ClockRule::BridgeLocalTime), 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pop = init_population([0.0; 3], &mut rng);
        for _ in 0..1000 {
            sim.step(&mut pop, 0.01, &mut rng).unwrap();
        }
        assert_eq!(pop.len(), 1);
        assert_eq!(pop.event_count, 0);
    }

    #[test]
    fn displacement_variance_per_unit_time() {
        let m = BranchingRateMeasure::zero(2).unwrap();
        let sim = Simulator::new(&m, &OffspringLaw::binary(), settings(0.05, ClockRule::Band { eps: 0.1 }), 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 4000;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let mut pop = init_population([0.0; 3], &mut rng);
            for _ in 0..20 {
                sim.step(&mut pop, 0.05, &mut rng).unwrap();
            }
            let x = pop.particles[0].position;
            sxx += x[0] * x[0];
            syy += x[1] * x[1];
            sxy += x[0] * x[1];
            assert_eq!(x[2], 0.0);
        }
        let tol = 4.0 * (2.0 / n as f64).sqrt();
        assert!((sxx / n as f64 - 1.0).abs() < tol && (syy / n as f64 - 1.0).abs() < tol);
        assert!((sxy / n as f64).abs() < tol);
    }

    #[test]
    fn constant_rate_clock_is_poisson() {
        // Density c on a huge ball: one lineage sees branch times at rate c.
        let c = 2.0;
        let m = BranchingRateMeasure::new(
            1,
            MeasureKind::Density(DensityPreset::BallIndicator { radius: 1e9, coupling: c }),
        )
        .unwrap();
        let law = OffspringLaw::finite(&[(1, 1.0)]).unwrap();
        let dt = 1e-3;
        let sim = Simulator::new(&m, &law, settings(dt, ClockRule::Band { eps: 0.1 }), 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pop = init_population([0.0; 3], &mut rng);
        let mut gaps = Vec::new();
        let mut last = 0.0;
        while gaps.len() < 10_000 {
            let before = pop.event_count;
            sim.step(&mut pop, dt, &mut rng).unwrap();
            if pop.event_count > before {
                gaps.push(pop.time - last);
                last = pop.time;
            }
        }
        // Kolmogorov–Smirnov against Exp(c), allowing for the dt grid.
        gaps.sort_by(f64::total_cmp);
        let n = gaps.len() as f64;
        let d = gaps
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let f = 1.0 - (-c * (g - 0.5 * dt)).exp();
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.63 / n.sqrt(), "KS distance {d}");
    }

    #[test]
    fn binary_conservation_and_cap() {
        // c = 3 makes a branch-free run to t = 20 (probability ~e^{−3ℓ}) negligible.
        let m = BranchingRateMeasure::dirac(3.0).unwrap();
        let sim = Simulator::new(&m, &OffspringLaw::binary(), settings(1e-3, ClockRule::BridgeLocalTime), 50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pop = init_population([0.0; 3], &mut rng);
        let mut capped = false;
        for _ in 0..20_000 {
            match sim.step(&mut pop, 1e-3, &mut rng) {
                Ok(()) => assert_eq!(pop.len() as u64, 1 + pop.event_count),
                Err(Error::PopulationCap { cap, .. }) => {
                    assert_eq!(cap, 50);
                    capped = true;
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(capped, "{} particles at t = {}", pop.len(), pop.time);
    }

    #[test]
    fn bridge_clock_branches_on_the_atom() {
        let m = BranchingRateMeasure::dirac(3.0).unwrap();
        let sim = Simulator::new(&m, &OffspringLaw::binary(), settings(1e-2, ClockRule::BridgeLocalTime), 1000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pop = init_population([0.0; 3], &mut rng);
        while pop.event_count == 0 {
            sim.step(&mut pop, 1e-2, &mut rng).unwrap();
        }
        assert!(pop.particles.iter().any(|p| p.position == [0.0; 3] && p.parent == Some(0)));
    }

    #[test]
    fn adaptive_step_grows_away_from_support() {
        let m = BranchingRateMeasure::sphere(3, 1.0, 0.3).unwrap();
        let s = StepperSettings { dt: 1e-3, clock: ClockRule::Band { eps: 0.1 }, max_dt: Some(1.0) };
        let sim = Simulator::new(&m, &OffspringLaw::binary(), s, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let near = init_population([1.05, 0.0, 0.0], &mut rng);
        assert_eq!(sim.step_size(&near, 10.0), 1e-3);
        let far = init_population([4.1, 0.0, 0.0], &mut rng);
        assert!((sim.step_size(&far, 10.0) - 0.25).abs() < 1e-12);
        let very_far = init_population([100.0, 0.0, 0.0], &mut rng);
        assert_eq!(sim.step_size(&very_far, 10.0), 1.0);
        assert_eq!(sim.step_size(&very_far, 0.3), 0.3);
    }
}
