//! Checks that tie separate parts of the crate to each other or to closed
//! forms written out here.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bbm_core::bbm::{run_ensemble, Engine, Observables, ReplicaConfig, StepperSettings};
use bbm_core::feynman_kac::{fk_mc_events, fk_quadrature_dirac1d, FkEvent, McSettings};
use bbm_core::fkpp::{solve_fkpp_at, Extreme, PdeGrid, PdeSpec};
use bbm_core::measures::{sample_bm_localtime_joint, BranchingRateMeasure, ClockRule, OffspringLaw};
use bbm_core::point::ORIGIN;
use bbm_core::spectral::{lambda_atomic, lambda_grid, lambda_two_diracs, GridMode, GridSpec};
use statrs::distribution::{ContinuousCDF, Normal};

fn phi(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

#[test]
fn grid_agrees_with_atoms_on_the_line() {
    for (c1, c2, a) in [(1.0, 1.0, 0.5), (0.4, 1.6, 1.0), (0.8, 0.9, 2.0)] {
        let m = BranchingRateMeasure::two_diracs(c1, c2, a).unwrap();
        let perron = lambda_atomic(&m.atoms(), 1).unwrap().lambda;
        let root = lambda_two_diracs(c1, c2, a).unwrap().lambda;
        let grid = lambda_grid(&m, GridMode::Line1d, GridSpec::new(30.0, 12001)).unwrap().lambda;
        assert!((perron - root).abs() < 1e-9, "{perron} vs {root}");
        assert!((grid / root - 1.0).abs() < 5e-3, "grid {grid} vs {root}");
    }
}

#[test]
fn exact_engine_mean_population() {
    // E Z_t = E₀ e^{ℓ_t} = 2 e^{t/2} Φ(√t) for c = 1.
    let cfg = ReplicaConfig {
        measure: BranchingRateMeasure::dirac(1.0).unwrap(),
        offspring: OffspringLaw::binary(),
        x0: ORIGIN,
        horizon: 3.0,
        record_every: 1.0,
        population_cap: 100_000,
        engine: Engine::ExactDirac,
        observables: Observables::default(),
    };
    let ens = run_ensemble(&cfg, 21, 4000).unwrap();
    for p in ens.mean_series(|r| r.z as f64).iter().skip(1) {
        let theory = 2.0 * (p.t / 2.0).exp() * phi(p.t.sqrt());
        assert!((p.mean - theory).abs() < 4.0 * p.stderr, "t = {}: {} ± {} vs {theory}", p.t, p.mean, p.stderr);
    }
}

#[test]
fn stepper_and_exact_engine_agree() {
    let base = |engine| ReplicaConfig {
        measure: BranchingRateMeasure::dirac(1.0).unwrap(),
        offspring: OffspringLaw::binary(),
        x0: [0.5, 0.0, 0.0],
        horizon: 2.0,
        record_every: 1.0,
        population_cap: 100_000,
        engine,
        observables: Observables { deltas: vec![0.5], ..Observables::default() },
    };
    let stepper = Engine::Stepper(StepperSettings { dt: 1e-3, clock: ClockRule::BridgeLocalTime, max_dt: None });
    let a = run_ensemble(&base(stepper), 22, 1500).unwrap();
    let b = run_ensemble(&base(Engine::ExactDirac), 23, 1500).unwrap();
    for f in [|r: &bbm_core::bbm::Record| r.z as f64, |r: &bbm_core::bbm::Record| r.zd[0] as f64] {
        let (sa, sb) = (a.mean_series(f), b.mean_series(f));
        let (pa, pb) = (sa.last().unwrap(), sb.last().unwrap());
        assert!((pa.mean - pb.mean).abs() < 4.0 * pa.stderr.hypot(pb.stderr), "{pa:?} vs {pb:?}");
    }
}

#[test]
fn monte_carlo_matches_quadrature() {
    let m = BranchingRateMeasure::dirac(1.0).unwrap();
    let t = 2.0;
    let events = [FkEvent::All, FkEvent::NormAtLeast(1.0)];
    let mc = McSettings { n_paths: 20_000, dt: 2e-3, clock: ClockRule::BridgeLocalTime, seed: 24 };
    let est = fk_mc_events(&m, ORIGIN, t, &events, &mc).unwrap();
    for (e, event) in est.iter().zip(events) {
        let q = fk_quadrature_dirac1d(1.0, t, event).unwrap().value;
        assert!((e.value - q).abs() < 4.0 * e.stderr, "{event:?}: {} ± {} vs {q}", e.value, e.stderr);
    }
}

#[test]
fn local_time_sampler_moments() {
    // E ℓ_t = E|B_t| = √(2t/π); E ℓ_t² = t.
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let n = 200_000;
    let t = 2.0;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let (_, l) = sample_bm_localtime_joint(t, &mut rng);
        s1 += l;
        s2 += l * l;
    }
    let (m1, m2) = (s1 / n as f64, s2 / n as f64);
    assert!((m1 / (2.0 * t / PI).sqrt() - 1.0).abs() < 0.01, "{m1}");
    assert!((m2 / t - 1.0).abs() < 0.02, "{m2}");
}

#[test]
fn fkpp_without_branching_is_the_heat_kernel() {
    // No branching: L_T = |B_T|, so u(T, 0, y) = 2Φ(y/√T) − 1.
    let m = BranchingRateMeasure::zero(1).unwrap();
    let grid = PdeGrid::new(&m, PdeSpec { half_width: 20.0, spacing: 0.01, dt: 0.005, mollifier_width: 0.05 }).unwrap();
    let times = [1.0, 4.0];
    for y in [0.5, 1.0, 2.5] {
        let u = solve_fkpp_at(&grid, 0.0, y, &times, &OffspringLaw::binary(), Extreme::Max).unwrap();
        for (t, v) in times.iter().zip(u) {
            let exact = 2.0 * phi(y / t.sqrt()) - 1.0;
            assert!((v - exact).abs() < 2e-3, "T = {t}, y = {y}: {v} vs {exact}");
        }
    }
}
