use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::DiracEngine;
use super::rate::{estimate_rate, fit_linear, jackknife, RateFit};
use super::stats::{Observables, Record, TrajectoryStats};
use super::stepper::{Simulator, StepperSettings};
use super::init_population;
use crate::measures::{BranchingRateMeasure, MeasureKind, OffspringLaw};
use crate::point::Point;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Engine {
    Stepper(StepperSettings),
    /// Event-driven exact engine; single atom on the line only.
    ExactDirac,
}

#[derive(Debug, Clone)]
pub struct ReplicaConfig {
    pub measure: BranchingRateMeasure,
    pub offspring: OffspringLaw,
    pub x0: Point,
    pub horizon: f64,
    pub record_every: f64,
    pub population_cap: usize,
    pub engine: Engine,
    pub observables: Observables,
}

impl ReplicaConfig {
    fn record_count(&self) -> Result<usize> {
        if !(self.horizon > 0.0 && self.record_every > 0.0) {
            return Err(Error::InvalidParameter("horizon and record spacing must be positive".into()));
        }
        let n = (self.horizon / self.record_every).round();
        if (n * self.record_every - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::InvalidParameter(format!(
                "horizon {} is not a multiple of the record spacing {}",
                self.horizon, self.record_every
            )));
        }
        Ok(n as usize)
    }

    pub fn record_times(&self) -> Result<Vec<f64>> {
        Ok((0..=self.record_count()?).map(|k| k as f64 * self.record_every).collect())
    }

    fn dirac_engine(&self) -> Result<DiracEngine> {
        match self.measure.kind() {
            MeasureKind::Atoms(a) if a.len() == 1 && self.measure.dim() == 1 => Ok(DiracEngine {
                c: a[0].weight,
                a: a[0].location[0],
                offspring: self.offspring.clone(),
                population_cap: self.population_cap,
            }),
            _ => Err(Error::Unsupported("the exact engine needs a single atom on the line".into())),
        }
    }
}

/// Runs one replica, recording at `0, Δ, 2Δ, …, horizon`. Hitting the
/// population cap ends the replica early and is flagged in
/// [`TrajectoryStats::terminated`].
pub fn run_replica<R: Rng + ?Sized>(cfg: &ReplicaConfig, rng: &mut R) -> Result<TrajectoryStats> {
    let n = cfg.record_count()?;
    let dim = cfg.measure.dim();
    let mut pop = init_population(cfg.x0, rng);
    let mut stats = TrajectoryStats {
        records: vec![Record::observe(0.0, dim, pop.positions(), &cfg.observables)],
        branch_events: 0,
        first_branch: None,
        last_branch: None,
        terminated: None,
    };
    let note = |stats: &mut TrajectoryStats, t: f64| {
        stats.first_branch.get_or_insert(t);
        stats.last_branch = Some(t);
    };
    match cfg.engine {
        Engine::Stepper(settings) => {
            let sim = Simulator::new(&cfg.measure, &cfg.offspring, settings, cfg.population_cap)?;
            'records: for k in 1..=n {
                let target = k as f64 * cfg.record_every;
                while pop.time < target - 1e-12 {
                    let dt = sim.step_size(&pop, target - pop.time);
                    let before = pop.event_count;
                    let outcome = sim.step(&mut pop, dt, rng);
                    if pop.event_count > before {
                        note(&mut stats, pop.time);
                    }
                    match outcome {
                        Ok(()) => {}
                        Err(Error::PopulationCap { time, .. }) => {
                            stats.terminated = Some(time);
                            break 'records;
                        }
                        Err(e) => return Err(e),
                    }
                }
                pop.time = target;
                stats.records.push(Record::observe(target, dim, pop.positions(), &cfg.observables));
            }
        }
        Engine::ExactDirac => {
            let engine = cfg.dirac_engine()?;
            for k in 1..=n {
                let target = k as f64 * cfg.record_every;
                let span = target - pop.time;
                match engine.advance(&mut pop, span, rng) {
                    Ok(events) => {
                        for t in events {
                            note(&mut stats, t);
                        }
                    }
                    Err(Error::PopulationCap { time, .. }) => {
                        stats.terminated = Some(time);
                        break;
                    }
                    Err(e) => return Err(e),
                }
                pop.time = target;
                stats.records.push(Record::observe(target, dim, pop.positions(), &cfg.observables));
            }
        }
    }
    stats.branch_events = pop.event_count;
    Ok(stats)
}

type Fitter = fn(&[f64], &[f64], (f64, f64)) -> Result<RateFit>;

/// Independent replicas with per-replica ChaCha streams derived from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub times: Vec<f64>,
    pub replicas: Vec<TrajectoryStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanPoint {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Runs `replicas` replicas in parallel. Replica `i` uses the ChaCha stream
/// `i` of `seed`, so results do not depend on scheduling.
pub fn run_ensemble(cfg: &ReplicaConfig, seed: u64, replicas: usize) -> Result<Ensemble> {
    if replicas == 0 {
        return Err(Error::InvalidParameter("at least one replica is needed".into()));
    }
    let times = cfg.record_times()?;
    let replicas = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            run_replica(cfg, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { times, replicas })
}

impl Ensemble {
    /// Replicas stopped by the population cap.
    pub fn capped(&self) -> usize {
        self.replicas.iter().filter(|r| r.terminated.is_some()).count()
    }

    fn complete(&self, keep: &dyn Fn(usize) -> bool) -> impl Iterator<Item = &TrajectoryStats> + '_ {
        let mask: Vec<bool> = (0..self.replicas.len()).map(keep).collect();
        self.replicas.iter().zip(mask).filter(|(r, k)| *k && r.terminated.is_none()).map(|(r, _)| r)
    }

    /// Mean of `f` over completed replicas at every record time.
    pub fn mean_series(&self, f: impl Fn(&Record) -> f64) -> Vec<MeanPoint> {
        self.mean_series_where(&|_| true, &f)
    }

    fn mean_series_where(&self, keep: &dyn Fn(usize) -> bool, f: &dyn Fn(&Record) -> f64) -> Vec<MeanPoint> {
        let n_t = self.times.len();
        let mut sum = vec![0.0; n_t];
        let mut sum2 = vec![0.0; n_t];
        let mut n = 0usize;
        for r in self.complete(keep) {
            n += 1;
            for (k, rec) in r.records.iter().enumerate() {
                let v = f(rec);
                sum[k] += v;
                sum2[k] += v * v;
            }
        }
        (0..n_t)
            .map(|k| {
                let mean = sum[k] / n as f64;
                let var = if n > 1 { (sum2[k] - n as f64 * mean * mean).max(0.0) / (n - 1) as f64 } else { 0.0 };
                MeanPoint { t: self.times[k], mean, stderr: (var / n as f64).sqrt(), n }
            })
            .collect()
    }

    /// Fraction of completed replicas satisfying `pred`.
    pub fn fraction(&self, pred: impl Fn(&TrajectoryStats) -> bool) -> f64 {
        let (mut hit, mut n) = (0usize, 0usize);
        for r in self.complete(&|_| true) {
            n += 1;
            hit += pred(r) as usize;
        }
        hit as f64 / n as f64
    }

    fn windowed_fit(
        &self,
        f: &dyn Fn(&Record) -> f64,
        window: (f64, f64),
        groups: usize,
        fit: Fitter,
    ) -> Result<RateFit> {
        let base = fit(&self.times, &self.mean_series(f).iter().map(|p| p.mean).collect::<Vec<_>>(), window)?;
        let (_, se) = jackknife(self.replicas.len(), groups, |keep| {
            let means: Vec<f64> = self.mean_series_where(keep, f).iter().map(|p| p.mean).collect();
            Ok(fit(&self.times, &means, window)?.slope)
        })?;
        Ok(RateFit { stderr: se, ..base })
    }

    /// Slope of `log E[f]` over `window`; the standard error comes from a
    /// grouped jackknife over replicas.
    pub fn log_rate(&self, f: impl Fn(&Record) -> f64, window: (f64, f64), groups: usize) -> Result<RateFit> {
        self.windowed_fit(&f, window, groups, estimate_rate)
    }

    /// Slope of `E[f]` over `window`, with jackknife standard error.
    pub fn linear_rate(&self, f: impl Fn(&Record) -> f64, window: (f64, f64), groups: usize) -> Result<RateFit> {
        self.windowed_fit(&f, window, groups, fit_linear)
    }
}
