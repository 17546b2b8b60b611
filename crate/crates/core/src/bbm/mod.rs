//! The branching particle system.
//!
//! Each particle carries an `Exp(1)` threshold `τ` and the value of the
//! additive functional `A^μ` accumulated since its birth; it branches when
//! `A^μ` reaches `τ`. Two engines move the population forward: a
//! time-stepping [`Simulator`] for any supported measure, and an exact
//! event-driven engine for a single atom on the line.

mod ensemble;
mod exact;
mod rate;
mod stats;
mod stepper;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::point::Point;

pub use ensemble::{run_ensemble, run_replica, Engine, Ensemble, MeanPoint, ReplicaConfig};
pub use exact::{exact_event_skeleton_dirac1d, DiracEngine, EventSkeleton};
pub use rate::{estimate_rate, fit_linear, jackknife, RateFit};
pub use stats::{Observables, Record, TrajectoryStats};
pub use stepper::{Simulator, StepperSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: u64,
    pub parent: Option<u64>,
    pub position: Point,
    /// `Exp(1)` level at which the particle branches.
    pub threshold: f64,
    /// `A^μ` accumulated since birth, always below `threshold` while alive.
    pub accumulated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub time: f64,
    pub particles: Vec<Particle>,
    pub event_count: u64,
    next_id: u64,
}

impl Population {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = &Point> + '_ {
        self.particles.iter().map(|p| &p.position)
    }

    /// A fresh particle at `position` with a new threshold.
    pub(crate) fn spawn<R: Rng + ?Sized>(&mut self, parent: Option<u64>, position: Point, rng: &mut R) -> Particle {
        let id = self.next_id;
        self.next_id += 1;
        Particle { id, parent, position, threshold: rng.sample(Exp1), accumulated: 0.0 }
    }
}

/// One particle at `x0` at time 0.
pub fn init_population<R: Rng + ?Sized>(x0: Point, rng: &mut R) -> Population {
    let mut pop = Population { time: 0.0, particles: Vec::new(), event_count: 0, next_id: 0 };
    let root = pop.spawn(None, x0, rng);
    pop.particles.push(root);
    pop
}
