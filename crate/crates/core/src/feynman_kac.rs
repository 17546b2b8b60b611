//! Feynman–Kac expectations `E_x[e^{A_t}; B_t ∈ E]` for the additive
//! functional of a branching-rate measure.
//!
//! By the many-to-one formula these are the expected particle counts of the
//! branching system when the functional is taken with `ν = (Q − 1) μ`.
//! Monte Carlo works for every supported measure. For a single atom `c δ_0`
//! on the line and a start on the atom there is a deterministic oracle: the
//! endpoint and the local time have the joint density
//! `(ℓ + |x|)/√(2πt³) exp(−(ℓ + |x|)²/2t)`, and the expectation is a double
//! integral against it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bbm::MeanPoint;
use crate::measures::{BranchingRateMeasure, ClockRule, MeasureKind, Pcaf};
use crate::point::{self, Point};
use crate::quadrature::{integrate, Tolerance};
use crate::special::norm_cdf;
use crate::{Error, Result};

/// Paths per independent random stream; fixed so estimates do not depend on
/// the number of worker threads.
const PATHS_PER_BATCH: usize = 256;

/// Tail cut of the quadrature in units of `√t` beyond the bulk.
const TAIL_SIGMAS: f64 = 12.0;

/// Where the endpoint `B_t` has to land.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FkEvent {
    All,
    /// `|B_t| ≥ level`.
    NormAtLeast(f64),
    /// `⟨B_t, direction⟩ ≥ level`.
    DirAtLeast { direction: Point, level: f64 },
}

impl FkEvent {
    /// `|B_t| ≥ δ t`.
    pub fn beyond(delta: f64, t: f64) -> Self {
        FkEvent::NormAtLeast(delta * t)
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self {
            FkEvent::All => true,
            FkEvent::NormAtLeast(level) => point::norm(x) >= *level,
            FkEvent::DirAtLeast { direction, level } => point::dot(x, direction) >= *level,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FkMethod {
    Mc,
    Quadrature,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkEstimate {
    pub value: f64,
    /// Zero for deterministic methods.
    pub stderr: f64,
    pub method: FkMethod,
    pub t: f64,
    pub x: Point,
    pub event: FkEvent,
}

/// Path simulation settings for [`fk_mc`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub n_paths: usize,
    pub dt: f64,
    pub clock: ClockRule,
    pub seed: u64,
}

/// Running sums of `w·1_E` and `w²·1_E` for `w = e^{a}`, kept relative to
/// the largest exponent seen so far.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    shift: f64,
    s1: f64,
    s2: f64,
}

impl LogSum {
    const EMPTY: LogSum = LogSum { shift: f64::NEG_INFINITY, s1: 0.0, s2: 0.0 };

    fn push(&mut self, a: f64) {
        if a > self.shift {
            let r = (self.shift - a).exp();
            self.s1 = self.s1 * r + 1.0;
            self.s2 = self.s2 * r * r + 1.0;
            self.shift = a;
        } else {
            let r = (a - self.shift).exp();
            self.s1 += r;
            self.s2 += r * r;
        }
    }

    fn merge(self, other: LogSum) -> LogSum {
        let (hi, lo) = if self.shift >= other.shift { (self, other) } else { (other, self) };
        if lo.s1 == 0.0 {
            return hi;
        }
        let r = (lo.shift - hi.shift).exp();
        LogSum { shift: hi.shift, s1: hi.s1 + lo.s1 * r, s2: hi.s2 + lo.s2 * r * r }
    }

    /// Sample mean and its standard error over `n` paths.
    fn mean_and_stderr(&self, n: usize) -> (f64, f64) {
        if self.s1 == 0.0 {
            return (0.0, 0.0);
        }
        let n = n as f64;
        let mean = (self.shift + (self.s1 / n).ln()).exp();
        let rel_var = (n * self.s2 / (self.s1 * self.s1) - 1.0).max(0.0);
        let stderr = if n > 1.0 { mean * (rel_var / (n - 1.0)).sqrt() } else { 0.0 };
        (mean, stderr)
    }
}

/// Pairwise reduction in index order, so the rounding does not depend on
/// how the batches were scheduled.
fn tree_merge(mut parts: Vec<Vec<LogSum>>) -> Vec<LogSum> {
    while parts.len() > 1 {
        parts = parts
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => a.iter().zip(b).map(|(x, y)| x.merge(*y)).collect(),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    parts.pop().unwrap_or_default()
}

/// Monte Carlo estimates of `E_x[e^{A_t}; B_t ∈ E]` for several events from
/// the same paths. `measure` is the measure whose functional weighs the
/// paths, i.e. `ν` when comparing with particle counts.
pub fn fk_mc_events(
    measure: &BranchingRateMeasure,
    x: Point,
    t: f64,
    events: &[FkEvent],
    settings: &McSettings,
) -> Result<Vec<FkEstimate>> {
    if settings.n_paths < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 paths, got {}", settings.n_paths)));
    }
    if !(t.is_finite() && t >= 0.0) || !(settings.dt.is_finite() && settings.dt > 0.0) {
        return Err(Error::InvalidParameter(format!("need t ≥ 0 and dt > 0, got t = {t}, dt = {}", settings.dt)));
    }
    let pcaf = Pcaf::new(measure, settings.clock)?;
    let dim = measure.dim();
    let steps = (t / settings.dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let sd = h.sqrt();
    let batches = settings.n_paths.div_ceil(PATHS_PER_BATCH);
    let parts: Vec<Vec<LogSum>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(b as u64);
            let n = PATHS_PER_BATCH.min(settings.n_paths - b * PATHS_PER_BATCH);
            let mut acc = vec![LogSum::EMPTY; events.len()];
            for _ in 0..n {
                let mut pos = x;
                let mut a = 0.0;
                if t > 0.0 {
                    for _ in 0..steps {
                        let prev = pos;
                        for c in pos.iter_mut().take(dim) {
                            *c += sd * rng.sample::<f64, _>(StandardNormal);
                        }
                        a += pcaf.sample_increment(&prev, &pos, h, &mut rng);
                    }
                }
                for (e, s) in events.iter().zip(acc.iter_mut()) {
                    if e.contains(&pos) {
                        s.push(a);
                    }
                }
            }
            acc
        })
        .collect();
    let sums = tree_merge(parts);
    Ok(events
        .iter()
        .zip(sums)
        .map(|(event, s)| {
            let (value, stderr) = s.mean_and_stderr(settings.n_paths);
            FkEstimate { value, stderr, method: FkMethod::Mc, t, x, event: *event }
        })
        .collect())
}

/// Monte Carlo estimate of `E_x[e^{A_t}; B_t ∈ E]`.
pub fn fk_mc(
    measure: &BranchingRateMeasure,
    x: Point,
    t: f64,
    event: FkEvent,
    settings: &McSettings,
) -> Result<FkEstimate> {
    Ok(fk_mc_events(measure, x, t, &[event], settings)?.remove(0))
}

/// `E_0 e^{c ℓ_t} = 2 e^{c²t/2} Φ(c√t)`.
pub fn fk_closed_form_dirac1d(c: f64, t: f64) -> FkEstimate {
    let value = 2.0 * (0.5 * c * c * t).exp() * norm_cdf(c * t.sqrt());
    FkEstimate { value, stderr: 0.0, method: FkMethod::ClosedForm, t, x: point::ORIGIN, event: FkEvent::All }
}

/// `E_0[e^{c ℓ_t}; B_t ∈ E]` on the line by nested adaptive quadrature.
pub fn fk_quadrature_dirac1d(c: f64, t: f64, event: FkEvent) -> Result<FkEstimate> {
    if !(c.is_finite() && c >= 0.0) || !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParameter(format!("need c ≥ 0 and t > 0, got c = {c}, t = {t}")));
    }
    // Half-lines of the endpoint, as [lo, hi] before truncation.
    let (lo, hi, mirrored) = match event {
        FkEvent::All => (0.0, f64::INFINITY, true),
        FkEvent::NormAtLeast(level) => (level.max(0.0), f64::INFINITY, true),
        FkEvent::DirAtLeast { direction, level } => {
            let r = direction[0];
            if direction[1] != 0.0 || direction[2] != 0.0 || (r.abs() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter("direction must be ±1 on the line".into()));
            }
            // ⟨x, r⟩ ≥ level; the density is even in x, so flip to r = 1.
            (level, f64::INFINITY, false)
        }
    };
    let reach = (c * t).max(lo.abs()) + TAIL_SIGMAS * t.sqrt();
    let hi = hi.min(reach);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * t.powi(3)).sqrt();
    // ∫_0^{reach−|x|} e^{cℓ} p(ℓ + |x|) dℓ.
    let inner = |x: f64| {
        let u = x.abs();
        if u >= reach {
            return 0.0;
        }
        integrate(
            |l| {
                let m = l + u;
                m * norm * (c * l - m * m / (2.0 * t)).exp()
            },
            0.0,
            reach - u,
            Tolerance::rel(1e-12),
        )
        .value
    };
    let outer = |a: f64, b: f64| integrate(inner, a, b, Tolerance::rel(1e-11)).value;
    let value = if lo >= hi {
        0.0
    } else if mirrored {
        2.0 * outer(lo, hi)
    } else if lo < 0.0 {
        outer(lo.max(-reach), 0.0) + outer(0.0, hi)
    } else {
        outer(lo, hi)
    };
    let x = point::ORIGIN;
    Ok(FkEstimate { value, stderr: 0.0, method: FkMethod::Quadrature, t, x, event })
}

/// `Q_x^{(t)}(|B_t| ≥ δt)` under the path measure tilted by `e^{A_t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltedProbability {
    pub numerator: FkEstimate,
    pub denominator: FkEstimate,
    pub ratio: f64,
}

/// The single atom at the origin on the line, if that is what `measure` is.
fn origin_dirac(measure: &BranchingRateMeasure) -> Option<f64> {
    match measure.kind() {
        MeasureKind::Atoms(atoms) if measure.dim() == 1 && atoms.len() == 1 && atoms[0].location == point::ORIGIN => {
            Some(atoms[0].weight)
        }
        _ => None,
    }
}

/// Ratio of `E_x[e^{A_t}; |B_t| ≥ δt]` to `E_x[e^{A_t}]`. A single atom at
/// the origin started on the atom uses quadrature for both; anything else
/// uses Monte Carlo on shared paths.
pub fn tilted_prob(
    measure: &BranchingRateMeasure,
    x: Point,
    t: f64,
    delta: f64,
    mc: &McSettings,
) -> Result<TiltedProbability> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("speed {delta} must be ≥ 0")));
    }
    let event = if delta == 0.0 { FkEvent::All } else { FkEvent::beyond(delta, t) };
    let (numerator, denominator) = match origin_dirac(measure) {
        Some(c) if x == point::ORIGIN => {
            let den = fk_quadrature_dirac1d(c, t, FkEvent::All)?;
            let num = if delta == 0.0 { den } else { fk_quadrature_dirac1d(c, t, event)? };
            (num, den)
        }
        _ => {
            let est = fk_mc_events(measure, x, t, &[event, FkEvent::All], mc)?;
            (est[0], est[1])
        }
    };
    // Subset integral over the whole: only rounding can push it past 1.
    let ratio = (numerator.value / denominator.value).min(1.0);
    Ok(TiltedProbability { numerator, denominator, ratio })
}

/// One line of the many-to-one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityRow {
    pub t: f64,
    pub event: FkEvent,
    pub simulated: f64,
    pub simulated_stderr: f64,
    pub fk: f64,
    pub fk_stderr: f64,
    pub joint_sigma: f64,
    pub pass: bool,
}

/// Compares an ensemble mean of `Z_t(f)` with the Feynman–Kac value; passes
/// when they differ by at most three joint standard errors.
pub fn duality_check(simulated: &MeanPoint, fk: &FkEstimate) -> DualityRow {
    let joint_sigma = simulated.stderr.hypot(fk.stderr);
    let pass = (simulated.mean - fk.value).abs() <= 3.0 * joint_sigma;
    DualityRow {
        t: simulated.t,
        event: fk.event,
        simulated: simulated.mean,
        simulated_stderr: simulated.stderr,
        fk: fk.value,
        fk_stderr: fk.stderr,
        joint_sigma,
        pass,
    }
}
