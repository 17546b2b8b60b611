//! Exact simulation for a single atom `c δ_a` on the line.
//!
//! Away from the atom nothing happens but diffusion. A particle at `x` with
//! `b` units of local time left before its clock rings branches after the
//! hitting time of `a` plus the inverse local time at level `b`; both are
//! squared ratios of normals. Positions between events are drawn together
//! with the local time they carry, so no time step is involved.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Particle, Population};
use crate::measures::{bridge_local_time, sample_hitting_time, sample_inverse_local_time, OffspringLaw};
use crate::{Error, Result};

/// Branch times of one run, all located at the atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSkeleton {
    /// Strictly increasing.
    pub times: Vec<f64>,
    /// Offspring number at each event.
    pub offspring: Vec<u32>,
    pub horizon: f64,
}

impl EventSkeleton {
    /// `Z_t = 1 + Σ_{T_n ≤ t} (n_e − 1)`.
    pub fn count_at(&self, t: f64) -> u64 {
        let k = self.times.partition_point(|&s| s <= t);
        1 + self.offspring[..k].iter().map(|&n| n as u64 - 1).sum::<u64>()
    }
}

/// Branch times (only) of binary branching on `c δ_a`, started from `x0`,
/// up to `horizon`.
pub fn exact_event_skeleton_dirac1d<R: Rng + ?Sized>(
    c: f64,
    a: f64,
    x0: f64,
    horizon: f64,
    offspring: &OffspringLaw,
    rng: &mut R,
) -> Result<EventSkeleton> {
    if !(c > 0.0 && c.is_finite()) || !(horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!("need c > 0 and horizon ≥ 0, got c = {c}, T = {horizon}")));
    }
    let mut events: Vec<(f64, u32)> = Vec::new();
    // Pending births: (birth time, distance to the atom).
    let mut pending = vec![(0.0, (x0 - a).abs())];
    while let Some((born, distance)) = pending.pop() {
        let tau: f64 = rng.sample(rand_distr::Exp1);
        let t = born + sample_hitting_time(distance, rng) + sample_inverse_local_time(tau / c, rng);
        if t <= horizon {
            let n = offspring.sample(rng);
            events.push((t, n));
            pending.extend(std::iter::repeat_n((t, 0.0), n as usize));
        }
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(EventSkeleton {
        times: events.iter().map(|e| e.0).collect(),
        offspring: events.iter().map(|e| e.1).collect(),
        horizon,
    })
}

/// Exact engine for the population on `c δ_a`, advanced between record times.
#[derive(Debug, Clone)]
pub struct DiracEngine {
    pub c: f64,
    pub a: f64,
    pub offspring: OffspringLaw,
    pub population_cap: usize,
}

impl DiracEngine {
    /// Moves every particle forward by `span`, branching exactly. Returns
    /// the times of the branch events that occurred.
    pub fn advance<R: Rng + ?Sized>(&self, pop: &mut Population, span: f64, rng: &mut R) -> Result<Vec<f64>> {
        let start = pop.time;
        let mut out = Vec::with_capacity(pop.len());
        let mut events = Vec::new();
        // (particle, time already elapsed within the span)
        let mut stack: Vec<(Particle, f64)> = std::mem::take(&mut pop.particles).into_iter().rev().map(|p| (p, 0.0)).collect();
        while let Some((mut p, elapsed)) = stack.pop() {
            let rem = span - elapsed;
            let need = (p.threshold - p.accumulated) / self.c;
            let x = p.position[0];
            let hit = sample_hitting_time((x - self.a).abs(), rng);
            if hit < rem {
                let ring = hit + sample_inverse_local_time(need, rng);
                if ring <= rem {
                    let when = elapsed + ring;
                    events.push(start + when);
                    pop.event_count += 1;
                    let n = self.offspring.sample(rng);
                    for _ in 0..n {
                        let child = pop.spawn(Some(p.id), [self.a, 0.0, 0.0], rng);
                        stack.push((child, when));
                    }
                    continue;
                }
            }
            // No branch before the end of the span: draw the endpoint and its
            // local time given that the local time stays below `need`.
            let sd = rem.sqrt();
            loop {
                let y = x + sd * rng.sample::<f64, _>(StandardNormal);
                let ell = bridge_local_time(x, y, self.a, rem, rng);
                if ell < need {
                    p.position[0] = y;
                    p.accumulated += self.c * ell;
                    break;
                }
            }
            out.push(p);
            if out.len() + stack.len() > self.population_cap {
                pop.particles = out;
                pop.time = start + span;
                return Err(Error::PopulationCap { cap: self.population_cap, time: start + elapsed });
            }
        }
        pop.particles = out;
        pop.time = start + span;
        events.sort_by(f64::total_cmp);
        Ok(events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbm::init_population;
    use crate::special::norm_cdf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn no_branch_probability() {
        // P_0(Z > t) = E e^{−c ℓ_t} = 2 e^{c²t/2} Φ(−c√t).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let law = OffspringLaw::binary();
        let quiet = (0..n)
            .filter(|_| exact_event_skeleton_dirac1d(1.0, 0.0, 0.0, 1.0, &law, &mut rng).unwrap().times.is_empty())
            .count() as f64
            / n as f64;
        let p = 2.0 * 0.5f64.exp() * norm_cdf(-1.0);
        assert!((p - 0.5232).abs() < 1e-4);
        assert!((quiet - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{quiet} vs {p}");
    }

    #[test]
    fn far_start_waits_for_the_hit() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let law = OffspringLaw::binary();
        let n = 20_000;
        let mut near = 0;
        let mut far = 0;
        for _ in 0..n {
            if !exact_event_skeleton_dirac1d(1.0, 0.0, 0.0, 2.0, &law, &mut rng).unwrap().times.is_empty() {
                near += 1;
            }
            if !exact_event_skeleton_dirac1d(1.0, 0.0, 3.0, 2.0, &law, &mut rng).unwrap().times.is_empty() {
                far += 1;
            }
        }
        // P(first event ≤ 2) ≤ P(hit ≤ 2) = 2Φ(−3/√2).
        let hit = 2.0 * norm_cdf(-3.0 / 2f64.sqrt());
        assert!(far < near);
        assert!((far as f64 / n as f64) < hit + 3.0 * (hit / n as f64).sqrt());
    }

    #[test]
    fn skeleton_counts_match_expectation() {
        // E Z_t = E_0 e^{ℓ_t} = 2 e^{t/2} Φ(√t) for c = 1.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let law = OffspringLaw::binary();
        let t: f64 = 3.0;
        let n = 40_000;
        let counts: Vec<f64> = (0..n)
            .map(|_| exact_event_skeleton_dirac1d(1.0, 0.0, 0.0, t, &law, &mut rng).unwrap().count_at(t) as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let exact = 2.0 * (t / 2.0).exp() * norm_cdf(t.sqrt());
        assert!((mean - exact).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {exact}");
    }

    #[test]
    fn skeleton_is_ordered_and_conserves() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let sk = exact_event_skeleton_dirac1d(1.0, 0.0, 0.0, 8.0, &OffspringLaw::binary(), &mut rng).unwrap();
        assert!(sk.times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sk.count_at(8.0), 1 + sk.times.len() as u64);
        assert_eq!(sk.count_at(0.0), 1);
    }

    #[test]
    fn engine_matches_skeleton_in_mean() {
        let engine = DiracEngine { c: 1.0, a: 0.0, offspring: OffspringLaw::binary(), population_cap: 1_000_000 };
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let n = 20_000;
        let t: f64 = 3.0;
        let mut counts = Vec::with_capacity(n);
        for _ in 0..n {
            let mut pop = init_population([0.0; 3], &mut rng);
            for _ in 0..6 {
                engine.advance(&mut pop, 0.5, &mut rng).unwrap();
            }
            assert_eq!(pop.len() as u64, 1 + pop.event_count);
            assert!(pop.particles.iter().all(|p| p.accumulated < p.threshold));
            counts.push(pop.len() as f64);
        }
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let exact = 2.0 * (t / 2.0).exp() * norm_cdf(t.sqrt());
        assert!((mean - exact).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {exact}");
    }

    #[test]
    fn engine_positions_diffuse() {
        // Without the atom in reach (a far away) positions are N(x0, t).
        let engine = DiracEngine { c: 1.0, a: 1e6, offspring: OffspringLaw::binary(), population_cap: 10 };
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let n = 20_000;
        let mut s2 = 0.0;
        for _ in 0..n {
            let mut pop = init_population([0.0; 3], &mut rng);
            engine.advance(&mut pop, 2.0, &mut rng).unwrap();
            s2 += pop.particles[0].position[0].powi(2);
        }
        assert!((s2 / n as f64 / 2.0 - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }
}
