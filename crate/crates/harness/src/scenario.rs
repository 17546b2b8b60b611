//! Scenario presets: the measure, the offspring law and the spectral data
//! every theory value in a report is computed from.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use bbm_core::measures::{
    classify_measure, Atom, BranchingRateMeasure, DensityPreset, MeasureClassification, MeasureKind, OffspringLaw,
};
use bbm_core::spectral::{
    ball_printed_form_root, ball_threshold, big_lambda, lambda_atomic, lambda_ball_d3, lambda_delta_shell_d3,
    lambda_grid, lambda_single_dirac, lambda_two_diracs, shell_printed_form_root, shell_threshold, GridMode,
    GridSpec, SpectralResult,
};

use crate::config::{ScenarioId, SimConfig};

/// Relative disagreement above which the grid overrides a matching root.
pub const ARBITER_TOL: f64 = 5e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEntry {
    pub method: String,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub critical_coupling: f64,
    pub coupling: f64,
    pub formula: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigLambdaRow {
    pub delta: f64,
    pub value: f64,
    pub formula: String,
}

/// Eigenvalue data for `ν = (Q − 1) μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBlock {
    pub values: Vec<LambdaEntry>,
    pub selected: String,
    pub lambda: f64,
    /// `√(−λ/2)`.
    pub speed: f64,
    /// `√(−2λ)`.
    pub decay_rate: f64,
    pub threshold: Option<Threshold>,
    pub big_lambda: Vec<BigLambdaRow>,
    pub classification: MeasureClassification,
}

pub fn big_lambda_formula(lambda: f64, delta: f64) -> &'static str {
    if delta <= (-2.0 * lambda).sqrt() {
        "λ + √(−2λ)δ"
    } else {
        "δ²/2"
    }
}

/// A configuration turned into model objects.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SimConfig,
    /// The branching rate `μ`; the clock runs on it.
    pub measure: BranchingRateMeasure,
    /// `ν = (Q − 1) μ`, the potential of the operator.
    pub nu: BranchingRateMeasure,
    pub offspring: OffspringLaw,
    pub ground_state: SpectralResult,
    pub spectral: SpectralBlock,
}

fn grid_mode(dim: usize) -> (GridMode, GridSpec) {
    match dim {
        1 => (GridMode::Line1d, GridSpec::default()),
        2 => (GridMode::RadialD2, GridSpec::new(60.0, 6000)),
        _ => (GridMode::RadialD3, GridSpec::new(40.0, 8000)),
    }
}

pub fn build_measure(cfg: &SimConfig) -> Result<BranchingRateMeasure> {
    let p = |k: &str| cfg.param(k);
    let dim = cfg.dim();
    let m = match cfg.scenario {
        ScenarioId::Dirac1d => BranchingRateMeasure::new(
            1,
            MeasureKind::Atoms(vec![Atom { location: [p("a"), 0.0, 0.0], weight: p("c") }]),
        ),
        ScenarioId::TwoDiracs => BranchingRateMeasure::two_diracs(p("c1"), p("c2"), p("a")),
        ScenarioId::Lattice => {
            let n = p("truncation");
            anyhow::ensure!(n >= 1.0 && n.fract() == 0.0, "params.truncation: must be a positive integer");
            BranchingRateMeasure::new(1, MeasureKind::LatticeAtoms { exponent: p("p"), truncation: n as u32 })
        }
        ScenarioId::Sphere => BranchingRateMeasure::sphere(dim, p("R"), p("c")),
        ScenarioId::Ball => BranchingRateMeasure::ball(dim, p("R"), p("c")),
        ScenarioId::PowerLaw => BranchingRateMeasure::new(
            dim,
            MeasureKind::Density(DensityPreset::PowerLawCompact { radius: p("R"), exponent: p("p"), coupling: p("c") }),
        ),
        ScenarioId::ExpDecay => BranchingRateMeasure::new(
            dim,
            MeasureKind::Density(DensityPreset::ExpDecay { exponent: p("p"), coupling: p("c") }),
        ),
        ScenarioId::GaussianBump => BranchingRateMeasure::new(
            dim,
            MeasureKind::Density(DensityPreset::GaussianBump { center: [0.0; 3], width: p("width"), mass: p("mass") }),
        ),
    };
    m.with_context(|| format!("params of scenario {}", cfg.scenario.name()))
}

impl Scenario {
    pub fn new(config: &SimConfig) -> Result<Self> {
        let measure = build_measure(config)?;
        let offspring = config.offspring.law()?;
        let excess = offspring.mean() - 1.0;
        let nu = if excess > 0.0 { measure.scaled(excess)? } else { BranchingRateMeasure::zero(measure.dim())? };
        let (values, selected, ground_state, threshold) = solve(config, &nu, excess)?;
        let lambda = ground_state.lambda;
        let spectral = SpectralBlock {
            values,
            selected,
            lambda,
            speed: ground_state.speed,
            decay_rate: ground_state.decay_rate(),
            threshold,
            big_lambda: config
                .deltas
                .iter()
                .map(|&delta| BigLambdaRow {
                    delta,
                    value: big_lambda(lambda, delta),
                    formula: big_lambda_formula(lambda, delta).to_string(),
                })
                .collect(),
            classification: classify_measure(&measure, &offspring),
        };
        Ok(Self { config: config.clone(), measure, nu, offspring, ground_state, spectral })
    }
}

type Solved = (Vec<LambdaEntry>, String, SpectralResult, Option<Threshold>);

fn entry(method: &str, lambda: f64) -> LambdaEntry {
    LambdaEntry { method: method.to_string(), lambda }
}

fn solve(cfg: &SimConfig, nu: &BranchingRateMeasure, excess: f64) -> Result<Solved> {
    let dim = nu.dim();
    if nu.atoms().is_empty() && matches!(nu.kind(), MeasureKind::Atoms(_)) {
        return Ok((vec![entry("zero", 0.0)], "zero".into(), SpectralResult::no_bound_state(
            bbm_core::spectral::SpectralMethod::ClosedForm,
        ), None));
    }
    let (mode, spec) = grid_mode(dim);
    let grid = || lambda_grid(nu, mode, spec).context("grid eigen-solver");
    let scaled = |k: &str| cfg.param(k) * excess;
    let mut values = Vec::new();
    let mut threshold = None;
    let (selected, result) = match cfg.scenario {
        ScenarioId::Dirac1d => {
            let closed = lambda_single_dirac(scaled("c"))?;
            values.push(entry("closed_form", closed.lambda));
            let atomic = lambda_atomic(&nu.atoms(), 1)?;
            values.push(entry("atomic_perron", atomic.lambda));
            if cfg.param("a") == 0.0 {
                ("closed_form", closed)
            } else {
                ("atomic_perron", atomic)
            }
        }
        ScenarioId::TwoDiracs => {
            let atomic = lambda_atomic(&nu.atoms(), 1)?;
            values.push(entry("atomic_perron", atomic.lambda));
            let (c1, c2) = (scaled("c1"), scaled("c2"));
            let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            values.push(entry("transcendental", lambda_two_diracs(lo, hi, cfg.param("a"))?.lambda));
            ("atomic_perron", atomic)
        }
        ScenarioId::Lattice => {
            let atomic = lambda_atomic(&nu.atoms(), 1)?;
            values.push(entry("atomic_perron", atomic.lambda));
            ("atomic_perron", atomic)
        }
        ScenarioId::Sphere | ScenarioId::Ball if dim == 3 => {
            let (c, r) = (scaled("c"), cfg.param("R"));
            let (matched, printed, critical, formula) = if cfg.scenario == ScenarioId::Sphere {
                (lambda_delta_shell_d3(c, r)?, shell_printed_form_root(c, r), shell_threshold(r), "1/(2R)")
            } else {
                (lambda_ball_d3(c, r)?, ball_printed_form_root(c, r), ball_threshold(r), "π²/(8R²)")
            };
            threshold = Some(Threshold { critical_coupling: critical, coupling: c, formula: formula.into() });
            values.push(entry("transcendental", matched.lambda));
            if let Some(l) = printed {
                values.push(entry("printed_form", l));
            }
            let g = grid()?;
            values.push(entry("grid_radial", g.lambda));
            let agree = if g.lambda == 0.0 || matched.lambda == 0.0 {
                g.lambda == matched.lambda
            } else {
                (matched.lambda / g.lambda - 1.0).abs() <= ARBITER_TOL
            };
            if agree {
                ("transcendental", matched)
            } else {
                ("grid_radial", g)
            }
        }
        _ => {
            let g = grid()?;
            let name = if dim == 1 { "grid_1d" } else { "grid_radial" };
            values.push(entry(name, g.lambda));
            (name, g)
        }
    };
    Ok((values, selected.to_string(), result, threshold))
}
