//! Runs a configured scenario and collects every check into a report.

use anyhow::Result;

use bbm_core::bbm::{run_ensemble, Engine, Ensemble, Observables, RateFit, Record, ReplicaConfig, StepperSettings};
use bbm_core::feynman_kac::{
    duality_check, fk_closed_form_dirac1d, fk_mc_events, fk_quadrature_dirac1d, FkEstimate, FkEvent, FkMethod,
    McSettings,
};
use bbm_core::fkpp::{front_from_table, level_table, tail_decay_check, Extreme, PdeGrid, PdeSpec};
use bbm_core::measures::{ClockRule, MeasureKind};
use bbm_core::point::{self, Point};

use crate::config::{ClockChoice, EngineChoice, SimConfig};
use crate::report::{Check, Env, FkRow, PdeBlock, RateRow, Report, Rule, SimBlock, TailRow};
use crate::scenario::{big_lambda_formula, Scenario};

/// Tolerance on fitted growth and spread rates.
pub const RATE_TOL: f64 = 0.08;
/// Tolerance on fitted front speeds.
pub const SPEED_TOL: f64 = 0.07;
/// Tolerance on the decay rate of hit probabilities.
pub const HIT_TOL: f64 = 0.05;
/// Tolerance on argmax positions divided by time.
pub const ARGMAX_TOL: f64 = 0.1;
/// Bound on the fitted speed when there is no bound state.
pub const NULL_SPEED_TOL: f64 = 0.05;
/// Jackknife groups for rate standard errors.
pub const JACKKNIFE_GROUPS: usize = 20;

/// Which blocks of a report to compute; the spectral block always is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub sim: bool,
    pub fk: bool,
    pub pde: bool,
}

impl Stages {
    pub const ALL: Stages = Stages { sim: true, fk: true, pde: true };
    pub const SPECTRAL: Stages = Stages { sim: false, fk: false, pde: false };
}

pub struct Outcome {
    pub report: Report,
    pub ensemble: Option<Ensemble>,
}

pub fn clock_rule(cfg: &SimConfig) -> ClockRule {
    match cfg.clock() {
        ClockChoice::Bridge => ClockRule::BridgeLocalTime,
        ClockChoice::Band => ClockRule::Band { eps: cfg.sim.eps },
    }
}

pub fn replica_config(sc: &Scenario) -> ReplicaConfig {
    let cfg = &sc.config;
    let engine = match cfg.sim.engine {
        EngineChoice::Exact => Engine::ExactDirac,
        EngineChoice::Stepper => {
            Engine::Stepper(StepperSettings { dt: cfg.dt(), clock: clock_rule(cfg), max_dt: cfg.sim.max_dt })
        }
    };
    let ground_state = sc.ground_state.eigenfunction.clone().map(|h| (sc.ground_state.lambda, h));
    ReplicaConfig {
        measure: sc.measure.clone(),
        offspring: sc.offspring.clone(),
        x0: cfg.start(),
        horizon: cfg.sim.horizon,
        record_every: cfg.sim.record_every,
        population_cap: cfg.sim.population_cap,
        engine,
        observables: Observables {
            deltas: cfg.deltas.clone(),
            directions: cfg.directions.iter().map(|r| point::from_slice(r)).collect(),
            ground_state,
        },
    }
}

/// Runs every stage asked for. A failing stage turns into failed checks and
/// does not stop the others.
pub fn run_scenario(cfg: &SimConfig, stages: Stages) -> Result<Outcome> {
    let sc = Scenario::new(cfg)?;
    let mut checks = Vec::new();
    let mut ensemble = None;
    let sim = if stages.sim {
        match simulate(&sc, &mut checks) {
            Ok((block, ens)) => {
                ensemble = Some(ens);
                Some(block)
            }
            Err(e) => {
                checks.push(Check::failed("simulation", 0.0, "", e));
                None
            }
        }
    } else {
        None
    };
    let mut sim = sim;
    let fk = if stages.fk && cfg.fk.is_some() {
        match feynman_kac(&sc, ensemble.as_ref(), sim.as_mut(), &mut checks) {
            Ok(rows) => Some(rows),
            Err(e) => {
                checks.push(Check::failed("feynman_kac", 0.0, "", e));
                None
            }
        }
    } else {
        None
    };
    let pde = if stages.pde && cfg.pde.is_some() {
        match pde(&sc, &mut checks) {
            Ok(block) => Some(block),
            Err(e) => {
                checks.push(Check::failed("pde", 0.0, "", e));
                None
            }
        }
    } else {
        None
    };
    let report = Report {
        scenario: cfg.scenario.name().to_string(),
        dimension: cfg.dim(),
        speed: sc.spectral.speed,
        lambda: sc.spectral.clone(),
        sim,
        fk,
        pde,
        criteria: checks,
        env: Env { seed: cfg.sim.seed, version: env!("CARGO_PKG_VERSION").to_string() },
    };
    Ok(Outcome { report, ensemble })
}

fn attempt(checks: &mut Vec<Check>, id: String, theory: f64, formula: &str, f: impl FnOnce() -> Result<Check>) {
    checks.push(f().unwrap_or_else(|e| Check::failed(id, theory, formula, e)));
}

/// Record times among `wanted`, or the last record time if none match.
fn pick_times(times: &[f64], wanted: &[f64]) -> Vec<f64> {
    let hits: Vec<f64> = wanted.iter().copied().filter(|w| times.iter().any(|t| (t - w).abs() < 1e-9)).collect();
    if hits.is_empty() {
        times.last().copied().into_iter().collect()
    } else {
        hits
    }
}

fn simulate(sc: &Scenario, checks: &mut Vec<Check>) -> Result<(SimBlock, Ensemble)> {
    let cfg = &sc.config;
    let rc = replica_config(sc);
    let full = run_ensemble(&rc, cfg.sim.seed, cfg.sim.replicas)?;
    let total = full.replicas.len();
    let lambda = sc.ground_state.lambda;
    // Rates are fitted on the conditioned replicas; the martingale and the
    // duality comparison need all of them.
    let surrogate = cfg.dim() == 3 && lambda < 0.0;
    let conditioned = surrogate.then(|| {
        let mut e = full.clone();
        e.replicas.retain(|r| r.first_branch.is_some_and(|t| t <= cfg.sim.burn_in));
        e
    });
    let ens = conditioned.as_ref().unwrap_or(&full);
    let discarded = total - ens.replicas.len();
    let capped = full.capped();
    let mut block = SimBlock {
        engine: format!("{:?}", rc.engine),
        replicas: total,
        capped,
        discarded,
        surrogate_conditioned: surrogate,
        rates: Vec::new(),
        martingale: Vec::new(),
        duality: Vec::new(),
    };
    if ens.replicas.len() - ens.capped() < 2 {
        anyhow::bail!("fewer than two usable replicas ({total} run, {discarded} discarded, {capped} capped)");
    }
    let window = cfg.fit_window();
    let horizon = cfg.sim.horizon;
    let groups = JACKKNIFE_GROUPS.min(ens.replicas.len());
    let tag = |id: String| if surrogate { format!("{id} [surrogate-conditioned]") } else { id };

    if lambda < 0.0 {
        let speed = sc.spectral.speed;
        let mut fits = Fits { ens, window, groups, surrogate, checks, rates: &mut block.rates };
        let row = |quantity: &str, delta: Option<f64>, direction: Option<usize>, theory: f64| RateRow {
            quantity: quantity.into(),
            delta,
            direction,
            slope: f64::NAN,
            stderr: f64::NAN,
            theory,
        };
        fits.rate("growth_rate".into(), row("Z", None, None, -lambda), RATE_TOL, "−λ", true, &|r| r.z as f64);
        for (j, &delta) in cfg.deltas.iter().enumerate() {
            let big = sc.ground_state.big_lambda(delta);
            let formula = format!("−Λ_δ, Λ_δ = {}", big_lambda_formula(lambda, delta));
            if big < 0.0 {
                fits.rate(format!("spread_rate[δ={delta}]"), row("Zd", Some(delta), None, -big), RATE_TOL, &formula, true, &|r| {
                    r.zd[j] as f64
                });
                let per_dir: Vec<_> = (0..cfg.directions.len())
                    .map(|i| {
                        fits.rate(
                            format!("directional_rate[δ={delta},r={i}]"),
                            row("Zdr", Some(delta), Some(i), -big),
                            RATE_TOL,
                            &formula,
                            true,
                            &|r| r.zdr[i][j] as f64,
                        )
                    })
                    .collect();
                for a in 0..per_dir.len() {
                    for b in a + 1..per_dir.len() {
                        if let (Some(fa), Some(fb)) = (per_dir[a], per_dir[b]) {
                            let check = Check::new(
                                tag(format!("direction_pair[δ={delta},{a},{b}]")),
                                0.0,
                                fa.slope - fb.slope,
                                3.0 * fa.stderr.hypot(fb.stderr),
                                Rule::Abs,
                                "uniform in direction: difference 0 within 3 joint σ",
                            );
                            fits.checks.push(check);
                        }
                    }
                }
            } else if big > 0.0 {
                fits.rate(
                    format!("hit_probability_rate[δ={delta}]"),
                    row("P(Zd>=1)", Some(delta), None, -big),
                    HIT_TOL,
                    &formula,
                    true,
                    &|r| (r.zd[j] >= 1) as u8 as f64,
                );
            }
        }
        let sf = "√(−λ/2)";
        fits.rate("spread_speed_L".into(), row("L", None, None, speed), SPEED_TOL, sf, false, &|r| r.l);
        if cfg.dim() == 1 {
            fits.rate("spread_speed_R".into(), row("R", None, None, speed), SPEED_TOL, sf, false, &|r| {
                r.r.unwrap_or(f64::NAN)
            });
        }
        for i in 0..cfg.directions.len() {
            fits.rate(format!("spread_speed_Lr[r={i}]"), row("Lr", None, Some(i), speed), SPEED_TOL, sf, false, &|r| r.lr[i]);
        }
        argmax_checks(ens, cfg, speed, horizon, checks, &tag);
        if let Some(h) = &sc.ground_state.eigenfunction {
            let target = h.eval(&cfg.start());
            let series = full.mean_series(|r| r.m.unwrap_or(f64::NAN));
            for t in pick_times(&full.times, &[2.0, 5.0, 10.0]) {
                if let Some(p) = series.iter().find(|p| (p.t - t).abs() < 1e-9) {
                    checks.push(Check::new(format!("martingale[t={t}]"), target, p.mean, 3.0 * p.stderr, Rule::Abs, "h(x0), tol 3σ"));
                    block.martingale.push(*p);
                }
            }
        }
    } else {
        null_suite(ens, cfg, checks);
    }
    Ok((block, full))
}

/// Windowed rate fits that record a check and a table row each.
struct Fits<'a> {
    ens: &'a Ensemble,
    window: (f64, f64),
    groups: usize,
    surrogate: bool,
    checks: &'a mut Vec<Check>,
    rates: &'a mut Vec<RateRow>,
}

impl Fits<'_> {
    #[allow(clippy::too_many_arguments)]
    fn rate(
        &mut self,
        id: String,
        mut row: RateRow,
        tol: f64,
        formula: &str,
        log: bool,
        f: &dyn Fn(&Record) -> f64,
    ) -> Option<RateFit> {
        let id = if self.surrogate { format!("{id} [surrogate-conditioned]") } else { id };
        let fit = if log { self.ens.log_rate(f, self.window, self.groups) } else { self.ens.linear_rate(f, self.window, self.groups) };
        match fit {
            Ok(fit) => {
                row.slope = fit.slope;
                row.stderr = fit.stderr;
                self.checks.push(
                    Check::new(id, row.theory, fit.slope, tol, Rule::Abs, formula)
                        .with_note(format!("jackknife stderr {:.4}", fit.stderr)),
                );
                self.rates.push(row);
                Some(fit)
            }
            Err(e) => {
                self.checks.push(Check::failed(id, row.theory, formula, e));
                None
            }
        }
    }
}

fn argmax_checks(ens: &Ensemble, cfg: &SimConfig, speed: f64, horizon: f64, checks: &mut Vec<Check>, tag: &dyn Fn(String) -> String) {
    let dim = cfg.dim();
    for (i, r) in cfg.directions.iter().enumerate() {
        let r = point::from_slice(r);
        let mut mean: Point = [0.0; 3];
        let mut n = 0usize;
        for rep in ens.replicas.iter().filter(|rep| rep.terminated.is_none()) {
            if let Some(rec) = rep.records.last() {
                for (m, x) in mean.iter_mut().zip(rec.argmax[i]).take(dim) {
                    *m += x / horizon;
                }
                n += 1;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let along = point::dot(&mean, &r);
        let mut orth = mean;
        orth.iter_mut().zip(r).for_each(|(o, ri)| *o -= along * ri);
        checks.push(Check::new(tag(format!("argmax_along[r={i}]")), speed, along, ARGMAX_TOL, Rule::Abs, "√(−λ/2)"));
        if dim > 1 {
            checks.push(Check::new(tag(format!("argmax_orthogonal[r={i}]")), 0.0, point::norm(&orth), ARGMAX_TOL, Rule::AtMost, "0"));
        }
    }
}

/// No bound state: branching stops eventually and the spread is sublinear.
fn null_suite(ens: &Ensemble, cfg: &SimConfig, checks: &mut Vec<Check>) {
    let horizon = cfg.sim.horizon;
    let quiet: Vec<(f64, f64)> = [5.0, 10.0, 20.0]
        .into_iter()
        .filter(|&t| t < horizon)
        .map(|t| (t, ens.fraction(|r| r.quiet_after(t))))
        .collect();
    if quiet.len() >= 2 {
        let increasing = quiet.windows(2).all(|w| w[1].1 > w[0].1);
        let listing: Vec<String> = quiet.iter().map(|(t, f)| format!("{t}: {f:.3}")).collect();
        checks.push(
            Check::holds("quiet_fraction_increasing", increasing, "λ = 0: finitely many branchings")
                .with_note(listing.join(", ")),
        );
    }
    let groups = JACKKNIFE_GROUPS.min(ens.replicas.len());
    let id = "null_speed_L";
    match ens.linear_rate(|r| r.l, cfg.fit_window(), groups) {
        Ok(fit) => checks.push(
            Check::new(id, 0.0, fit.slope, NULL_SPEED_TOL, Rule::Abs, "λ = 0: L_t/t → 0")
                .with_note(format!("jackknife stderr {:.4}", fit.stderr)),
        ),
        Err(e) => checks.push(Check::failed(id, 0.0, "λ = 0: L_t/t → 0", e)),
    }
}

/// The single atom at the origin, started on it: quadrature applies.
fn origin_atom(sc: &Scenario) -> Option<f64> {
    match sc.nu.kind() {
        MeasureKind::Atoms(a) if a.len() == 1 && a[0].location == point::ORIGIN && sc.config.start() == point::ORIGIN => {
            Some(a[0].weight)
        }
        _ => None,
    }
}

fn feynman_kac(
    sc: &Scenario,
    ensemble: Option<&Ensemble>,
    sim: Option<&mut SimBlock>,
    checks: &mut Vec<Check>,
) -> Result<Vec<FkRow>> {
    let cfg = &sc.config;
    let fk = cfg.fk.as_ref().expect("fk section");
    let x0 = cfg.start();
    let mut rows = Vec::new();
    let mut estimates: Vec<(f64, Option<usize>, FkEstimate)> = Vec::new();
    for (k, &t) in fk.times.iter().enumerate() {
        let mut events = vec![FkEvent::All];
        events.extend(cfg.deltas.iter().map(|&d| FkEvent::beyond(d, t)));
        let est = match origin_atom(sc) {
            Some(c) => {
                let all = fk_quadrature_dirac1d(c, t, FkEvent::All)?;
                let closed = fk_closed_form_dirac1d(c, t);
                checks.push(Check::new(
                    format!("fk_closed_form[t={t}]"),
                    closed.value,
                    all.value,
                    1e-6,
                    Rule::Rel,
                    "2e^{c²t/2}Φ(c√t)",
                ));
                let mut v = vec![all];
                for e in &events[1..] {
                    v.push(fk_quadrature_dirac1d(c, t, *e)?);
                }
                v
            }
            None => {
                let mc = McSettings { n_paths: fk.n_paths, dt: cfg.dt(), clock: clock_rule(cfg), seed: cfg.sim.seed.wrapping_add(k as u64) };
                fk_mc_events(&sc.nu, x0, t, &events, &mc)?
            }
        };
        for (j, e) in est.into_iter().enumerate() {
            let delta = j.checked_sub(1).map(|j| cfg.deltas[j]);
            rows.push(FkRow {
                t,
                delta,
                method: match e.method {
                    FkMethod::Mc => "mc",
                    FkMethod::Quadrature => "quadrature",
                    FkMethod::ClosedForm => "closed_form",
                }
                .into(),
                value: e.value,
                stderr: e.stderr,
            });
            estimates.push((t, j.checked_sub(1), e));
        }
    }
    if let (Some(ens), Some(sim)) = (ensemble, sim) {
        for (t, j, est) in &estimates {
            let series = match j {
                None => ens.mean_series(|r| r.z as f64),
                Some(j) => ens.mean_series(|r| r.zd[*j] as f64),
            };
            if let Some(p) = series.iter().find(|p| (p.t - t).abs() < 1e-9) {
                let row = duality_check(p, est);
                let id = match j {
                    None => format!("duality[t={t},f=1]"),
                    Some(j) => format!("duality[t={t},δ={}]", cfg.deltas[*j]),
                };
                checks.push(Check::new(
                    id,
                    est.value,
                    p.mean,
                    3.0 * row.joint_sigma,
                    Rule::Abs,
                    "E_x[e^{A_t^ν} f(B_t)], tol 3 joint σ",
                ));
                sim.duality.push(row);
            }
        }
    }
    Ok(rows)
}

fn pde(sc: &Scenario, checks: &mut Vec<Check>) -> Result<PdeBlock> {
    let cfg = &sc.config;
    let p = cfg.pde.as_ref().expect("pde section");
    let t_max = p.times.iter().copied().fold(0.0, f64::max);
    let y_max = p.y_max.unwrap_or(t_max);
    let spec = PdeSpec {
        half_width: y_max + 6.0 * t_max.sqrt(),
        spacing: p.spacing,
        dt: p.dt,
        mollifier_width: p.mollifier_width,
    };
    let grid = PdeGrid::new(&sc.measure, spec)?;
    let x0 = cfg.start()[0];
    let levels: Vec<f64> = (0..p.y_points).map(|k| y_max * k as f64 / (p.y_points - 1) as f64).collect();
    let table = level_table(&grid, x0, &levels, &p.times, &sc.offspring, Extreme::Max)?;
    let solution = p.times.iter().enumerate().map(|(k, &t)| (t, table.iter().map(|row| row[k]).collect())).collect();
    let curve = front_from_table(&levels, &p.times, &table)?;
    checks.push(Check::holds("pde_monotone_in_y", curve.monotone, "u(T, x, ·) nondecreasing"));
    let speed = sc.spectral.speed;
    if let Some(last) = curve.points.last() {
        let id = format!("front_speed[T={}]", last.t);
        match last.y_half {
            Some(y) => checks.push(Check::new(id, speed, y / last.t, 0.05, Rule::Abs, "√(−λ/2)")),
            None => checks.push(Check::failed(id, speed, "√(−λ/2)", "u(T, x0, ·) never crosses ½ on the level grid")),
        }
    }
    let mut tails = Vec::new();
    for &delta in &p.tail_deltas {
        let bound = sc.ground_state.big_lambda(delta);
        let id = format!("tail_decay[δ={delta}]");
        let formula = "slope ≤ −((λ + √(−2λ)δ) ∧ δ²/2) + 0.05";
        attempt(checks, id.clone(), -bound, formula, || {
            let tail = tail_decay_check(&grid, x0, delta, &p.times, &sc.offspring)?;
            let slope = tail.fit.map(|f| f.slope);
            tails.push(TailRow { delta, points: tail.points.clone(), truncated: tail.truncated.clone(), slope, bound });
            match slope {
                Some(s) => Ok(Check::new(id.clone(), -bound, s, 0.05, Rule::AtMost, formula)),
                None => anyhow::bail!("fewer than two tail values above the underflow floor"),
            }
        });
    }
    Ok(PdeBlock { levels, solution, front: curve.points, monotone: curve.monotone, tails })
}
