//! The JSON run configuration: parsing, defaults and validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use bbm_core::measures::OffspringLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    /// `c δ_a` on the line.
    Dirac1d,
    /// `c₁ δ_{−a} + c₂ δ_a` on the line.
    TwoDiracs,
    /// `Σ e^{−|n|^p} δ_n` on the integers.
    Lattice,
    /// `c` times the surface measure of the sphere of radius `R`.
    Sphere,
    /// `c 1{|x| ≤ R}`.
    Ball,
    /// `c 1{|x| ≤ R} |x|^{−p}`.
    PowerLaw,
    /// `c e^{−|x|^p}`.
    ExpDecay,
    /// Gaussian bump of given mass and width at the origin.
    GaussianBump,
}

impl ScenarioId {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dirac1d => "dirac1d",
            Self::TwoDiracs => "two_diracs",
            Self::Lattice => "lattice",
            Self::Sphere => "sphere",
            Self::Ball => "ball",
            Self::PowerLaw => "power_law",
            Self::ExpDecay => "exp_decay",
            Self::GaussianBump => "gaussian_bump",
        }
    }

    /// Accepted parameters with their defaults; `None` marks a required one.
    pub fn params(self) -> &'static [(&'static str, Option<f64>)] {
        match self {
            Self::Dirac1d => &[("c", None), ("a", Some(0.0))],
            Self::TwoDiracs => &[("c1", None), ("c2", None), ("a", None)],
            Self::Lattice => &[("p", None), ("truncation", Some(30.0))],
            Self::Sphere | Self::Ball => &[("c", None), ("R", Some(1.0))],
            Self::PowerLaw => &[("c", None), ("R", Some(1.0)), ("p", None)],
            Self::ExpDecay => &[("c", None), ("p", None)],
            Self::GaussianBump => &[("mass", None), ("width", Some(0.5))],
        }
    }

    pub fn default_dimension(self) -> usize {
        match self {
            Self::Dirac1d | Self::TwoDiracs | Self::Lattice | Self::PowerLaw | Self::ExpDecay => 1,
            Self::Sphere | Self::Ball => 3,
            Self::GaussianBump => 2,
        }
    }

    pub fn dimensions(self) -> &'static [usize] {
        match self {
            Self::Dirac1d | Self::TwoDiracs | Self::Lattice => &[1],
            Self::Sphere => &[2, 3],
            _ => &[1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffspringSpec {
    #[default]
    Binary,
    /// `[[n, p_n], …]`.
    Probabilities(Vec<(u32, f64)>),
    /// `p_n = (1 − q) q^{n−1}`.
    Geometric(f64),
}

impl OffspringSpec {
    pub fn law(&self) -> Result<OffspringLaw> {
        Ok(match self {
            Self::Binary => OffspringLaw::binary(),
            Self::Probabilities(p) => OffspringLaw::finite(p)?,
            Self::Geometric(q) => OffspringLaw::geometric(*q)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    #[default]
    Stepper,
    /// Event-driven and exact; single atom on the line only.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockChoice {
    /// Bridge local time at atoms on the line.
    Bridge,
    /// Band occupation of half-width `eps`.
    Band,
}

fn default_eps() -> f64 {
    5e-3
}
fn default_horizon() -> f64 {
    10.0
}
fn default_replicas() -> usize {
    200
}
fn default_cap() -> usize {
    200_000
}
fn default_record_every() -> f64 {
    0.5
}
fn default_burn_in() -> f64 {
    2.0
}
fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Defaults to `10⁻³`, or `ε²/10` under the band clock.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_cap")]
    pub population_cap: usize,
    #[serde(default = "default_record_every")]
    pub record_every: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub engine: EngineChoice,
    /// Defaults to the bridge clock for atoms on the line, the band clock
    /// otherwise.
    #[serde(default)]
    pub clock: Option<ClockChoice>,
    #[serde(default)]
    pub max_dt: Option<f64>,
    /// Rate-fit window; defaults to the second half of the horizon.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
}

impl Default for SimSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

fn default_fk_times() -> Vec<f64> {
    vec![2.0, 5.0, 10.0]
}
fn default_fk_paths() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkSection {
    #[serde(default = "default_fk_times")]
    pub times: Vec<f64>,
    /// Monte Carlo paths when no quadrature applies.
    #[serde(default = "default_fk_paths")]
    pub n_paths: usize,
}

fn default_pde_times() -> Vec<f64> {
    vec![10.0, 20.0, 30.0, 40.0]
}
fn default_y_points() -> usize {
    41
}
fn default_mollifier() -> f64 {
    0.05
}
fn default_spacing() -> f64 {
    0.0125
}
fn default_pde_dt() -> f64 {
    0.005
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    #[serde(default = "default_pde_times")]
    pub times: Vec<f64>,
    /// Levels `y` run over `[0, y_max]`; defaults to the largest time.
    #[serde(default)]
    pub y_max: Option<f64>,
    #[serde(default = "default_y_points")]
    pub y_points: usize,
    #[serde(default = "default_mollifier")]
    pub mollifier_width: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_pde_dt")]
    pub dt: f64,
    /// Speeds for the one-sided tail check, each above the front speed.
    #[serde(default)]
    pub tail_deltas: Vec<f64>,
}

/// A validated run configuration. Loading fills every default, so
/// serialising and reloading gives back the same value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: ScenarioId,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub offspring: OffspringSpec,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub directions: Vec<Vec<f64>>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub fk: Option<FkSection>,
    #[serde(default)]
    pub pde: Option<PdeSection>,
}

impl SimConfig {
    /// Parses, fills defaults and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        // serde names the offending key, and the line and column, on failure.
        let raw: SimConfig = serde_json::from_str(text).map_err(|e| anyhow::anyhow!("schema: {e}"))?;
        raw.resolve()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn dim(&self) -> usize {
        self.dimension.expect("resolved config has a dimension")
    }

    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }

    pub fn dt(&self) -> f64 {
        self.sim.dt.expect("resolved config has a time step")
    }

    pub fn clock(&self) -> ClockChoice {
        self.sim.clock.expect("resolved config has a clock")
    }

    pub fn fit_window(&self) -> (f64, f64) {
        self.sim.fit_window.expect("resolved config has a fit window")
    }

    pub fn start(&self) -> [f64; 3] {
        let mut p = [0.0; 3];
        if let Some(x0) = &self.x0 {
            p[..x0.len()].copy_from_slice(x0);
        }
        p
    }

    fn resolve(mut self) -> Result<Self> {
        let id = self.scenario;
        for key in self.params.keys() {
            if !id.params().iter().any(|(k, _)| k == key) {
                bail!("params.{key}: unknown parameter for scenario {}", id.name());
            }
        }
        for (key, default) in id.params() {
            match (self.params.get(*key), default) {
                (Some(v), _) if !v.is_finite() => bail!("params.{key}: must be finite"),
                (Some(_), _) => {}
                (None, Some(v)) => {
                    self.params.insert(key.to_string(), *v);
                }
                (None, None) => bail!("params.{key}: required for scenario {}", id.name()),
            }
        }
        let dim = *self.dimension.get_or_insert(id.default_dimension());
        if !id.dimensions().contains(&dim) {
            bail!("dimension: scenario {} does not support d = {dim}", id.name());
        }
        self.offspring.law().context("offspring")?;

        let line_atoms = matches!(id, ScenarioId::Dirac1d | ScenarioId::TwoDiracs | ScenarioId::Lattice);
        let singular = line_atoms || id == ScenarioId::Sphere;
        let s = &mut self.sim;
        positive("sim.eps", s.eps)?;
        positive("sim.horizon", s.horizon)?;
        positive("sim.record_every", s.record_every)?;
        if !(s.burn_in >= 0.0) {
            bail!("sim.burn_in: must be ≥ 0");
        }
        if s.replicas == 0 {
            bail!("sim.replicas: at least one replica is needed");
        }
        if s.population_cap == 0 {
            bail!("sim.population_cap: must be at least 1");
        }
        let clock = *s.clock.get_or_insert(if line_atoms { ClockChoice::Bridge } else { ClockChoice::Band });
        if clock == ClockChoice::Bridge && singular && !line_atoms {
            bail!("sim.clock: the bridge clock needs atoms on the line");
        }
        let dt = *s.dt.get_or_insert(if clock == ClockChoice::Band && singular {
            (s.eps * s.eps / 10.0).min(1e-3)
        } else {
            1e-3
        });
        positive("sim.dt", dt)?;
        if clock == ClockChoice::Band && singular && dt > s.eps * s.eps / 10.0 * (1.0 + 1e-12) {
            bail!("sim.dt: {dt} exceeds eps²/10 = {} for the band clock", s.eps * s.eps / 10.0);
        }
        if let Some(m) = s.max_dt {
            if !(m >= dt) {
                bail!("sim.max_dt: {m} is below dt = {dt}");
            }
        }
        if s.engine == EngineChoice::Exact && id != ScenarioId::Dirac1d {
            bail!("sim.engine: the exact engine only runs the dirac1d scenario");
        }
        let n = (s.horizon / s.record_every).round();
        if (n * s.record_every - s.horizon).abs() > 1e-9 * s.horizon {
            bail!("sim.record_every: {} does not divide the horizon {}", s.record_every, s.horizon);
        }
        let window = *s.fit_window.get_or_insert((0.5 * s.horizon, s.horizon));
        if !(window.0 >= 0.0 && window.0 < window.1 && window.1 <= s.horizon + 1e-9) {
            bail!("sim.fit_window: [{}, {}] must lie inside [0, {}]", window.0, window.1, s.horizon);
        }

        for (j, d) in self.deltas.iter().enumerate() {
            positive(&format!("deltas[{j}]"), *d)?;
        }
        for (i, r) in self.directions.iter().enumerate() {
            if r.len() != dim {
                bail!("directions[{i}]: has {} components, expected {dim}", r.len());
            }
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                bail!("directions[{i}]: not a unit vector (norm {norm})");
            }
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != dim || x0.iter().any(|x| !x.is_finite()) {
                bail!("x0: expected {dim} finite components");
            }
        }
        if let Some(fk) = &self.fk {
            if fk.n_paths < 100 {
                bail!("fk.n_paths: at least 100 paths are needed");
            }
            for (k, t) in fk.times.iter().enumerate() {
                positive(&format!("fk.times[{k}]"), *t)?;
            }
        }
        if let Some(pde) = &self.pde {
            if dim != 1 {
                bail!("pde: the front equation is solved on the line only");
            }
            if pde.times.is_empty() || pde.y_points < 2 {
                bail!("pde: need at least one time and two levels");
            }
            for (k, t) in pde.times.iter().enumerate() {
                positive(&format!("pde.times[{k}]"), *t)?;
            }
            positive("pde.mollifier_width", pde.mollifier_width)?;
            positive("pde.spacing", pde.spacing)?;
            positive("pde.dt", pde.dt)?;
        }
        Ok(self)
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        bail!("{path}: must be positive, got {v}")
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SimConfig::from_json(&text).with_context(|| format!("in {}", path.display()))
}
