//! Report structure and its JSON, CSV and gnuplot emitters.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use bbm_core::bbm::{Ensemble, MeanPoint};
use bbm_core::feynman_kac::DualityRow;
use bbm_core::fkpp::FrontPoint;

use crate::scenario::SpectralBlock;

/// How `measured` is compared with `theory`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `|measured − theory| ≤ tol`.
    Abs,
    /// `|measured / theory − 1| ≤ tol`.
    Rel,
    /// `measured ≤ theory + tol`.
    AtMost,
    /// `measured ≥ theory − tol`.
    AtLeast,
}

impl Rule {
    pub fn holds(self, theory: f64, measured: f64, tol: f64) -> bool {
        match self {
            Rule::Abs => (measured - theory).abs() <= tol,
            Rule::Rel => (measured / theory - 1.0).abs() <= tol,
            Rule::AtMost => measured <= theory + tol,
            Rule::AtLeast => measured >= theory - tol,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Rule::Abs => "±",
            Rule::Rel => "±rel",
            Rule::AtMost => "≤",
            Rule::AtLeast => "≥",
        }
    }
}

/// One comparison of a measurement with its theory value. `pass` is a
/// function of the stored numbers only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub theory: f64,
    /// Absent when the computation failed.
    pub measured: Option<f64>,
    pub tol: f64,
    pub rule: Rule,
    /// Where `theory` comes from.
    pub formula: String,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn new(id: impl Into<String>, theory: f64, measured: f64, tol: f64, rule: Rule, formula: impl Into<String>) -> Self {
        let mut c = Self {
            id: id.into(),
            theory,
            measured: Some(measured),
            tol,
            rule,
            formula: formula.into(),
            pass: false,
            note: None,
        };
        c.pass = c.recompute();
        c
    }

    /// A check that could not be evaluated.
    pub fn failed(id: impl Into<String>, theory: f64, formula: impl Into<String>, error: impl std::fmt::Display) -> Self {
        Self {
            id: id.into(),
            theory,
            measured: None,
            tol: 0.0,
            rule: Rule::Abs,
            formula: formula.into(),
            pass: false,
            note: Some(error.to_string()),
        }
    }

    /// A yes/no property, stored as `1` against the target `1`.
    pub fn holds(id: impl Into<String>, ok: bool, formula: impl Into<String>) -> Self {
        Self::new(id, 1.0, if ok { 1.0 } else { 0.0 }, 0.0, Rule::Abs, formula)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn recompute(&self) -> bool {
        self.measured.is_some_and(|m| m.is_finite() && self.rule.holds(self.theory, m, self.tol))
    }

    /// `id: measured (theory ± tol)`.
    pub fn summary(&self) -> String {
        match self.measured {
            Some(m) => format!("{} {:.4} ({} {:.4} {})", self.id, m, self.rule.symbol(), self.theory, fmt_tol(self.tol)),
            None => format!("{} error: {}", self.id, self.note.as_deref().unwrap_or("")),
        }
    }
}

fn fmt_tol(tol: f64) -> String {
    if tol == 0.0 {
        String::new()
    } else if tol < 1e-3 {
        format!("tol {tol:.0e}")
    } else {
        format!("tol {tol:.3}")
    }
}

/// A fitted rate next to its theory value, for the rate tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub quantity: String,
    pub delta: Option<f64>,
    pub direction: Option<usize>,
    pub slope: f64,
    pub stderr: f64,
    pub theory: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimBlock {
    pub engine: String,
    pub replicas: usize,
    /// Replicas stopped by the population cap; excluded from statistics.
    pub capped: usize,
    /// Replicas dropped by the burn-in rule (d = 3 only).
    pub discarded: usize,
    /// Conditioning on survival of the martingale replaced by the burn-in
    /// rule.
    pub surrogate_conditioned: bool,
    pub rates: Vec<RateRow>,
    pub martingale: Vec<MeanPoint>,
    pub duality: Vec<DualityRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkRow {
    pub t: f64,
    pub delta: Option<f64>,
    pub method: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub delta: f64,
    pub points: Vec<(f64, f64)>,
    pub truncated: Vec<f64>,
    pub slope: Option<f64>,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeBlock {
    pub levels: Vec<f64>,
    /// `u(T, x0, y)` for each time, in the order of `levels`.
    pub solution: Vec<(f64, Vec<f64>)>,
    pub front: Vec<FrontPoint>,
    pub monotone: bool,
    pub tails: Vec<TailRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Env {
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub dimension: usize,
    pub lambda: SpectralBlock,
    pub speed: f64,
    pub sim: Option<SimBlock>,
    pub fk: Option<Vec<FkRow>>,
    pub pde: Option<PdeBlock>,
    pub criteria: Vec<Check>,
    pub env: Env,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    /// Stored flags agree with flags recomputed from the stored numbers.
    pub fn consistent(&self) -> bool {
        self.criteria.iter().all(|c| c.pass == c.recompute())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Columns `replicate,t,Z,L,R,Lr_<i>…,Zd_<j>…,Zdr_<i>_<j>…,M`; values that
/// were not recorded are left empty.
pub fn write_timeseries<W: Write>(ens: &Ensemble, directions: usize, deltas: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["replicate", "t", "Z", "L", "R"].iter().map(|s| s.to_string()).collect();
    header.extend((0..directions).map(|i| format!("Lr_{i}")));
    header.extend((0..deltas).map(|j| format!("Zd_{j}")));
    for i in 0..directions {
        header.extend((0..deltas).map(|j| format!("Zdr_{i}_{j}")));
    }
    header.push("M".into());
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (k, rep) in ens.replicas.iter().enumerate() {
        for rec in &rep.records {
            let mut row = vec![k.to_string(), rec.t.to_string(), rec.z.to_string(), rec.l.to_string(), opt(rec.r)];
            row.extend(rec.lr.iter().map(|v| v.to_string()));
            row.extend(rec.zd.iter().map(|v| v.to_string()));
            for per_dir in &rec.zdr {
                row.extend(per_dir.iter().map(|v| v.to_string()));
            }
            row.push(opt(rec.m));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated rate table for gnuplot.
pub fn rate_table(rates: &[RateRow]) -> String {
    let mut s = String::from("# quantity delta direction slope stderr theory\n");
    for r in rates {
        let delta = r.delta.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
        let dir = r.direction.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
        writeln!(s, "{} {} {} {} {} {}", r.quantity, delta, dir, r.slope, r.stderr, r.theory).expect("string write");
    }
    s
}

fn write_file(path: PathBuf, contents: &[u8]) -> Result<PathBuf> {
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Writes `report.json` and, when present, `timeseries.csv`, `rates.dat`,
/// `fk.json`, `pde_u.csv` and `pde_front.csv` into `dir`. Returns the paths.
pub fn emit_report(report: &Report, ensemble: Option<(&Ensemble, usize, usize)>, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = vec![write_file(dir.join("report.json"), report.to_json().as_bytes())?];
    if let Some((ens, dirs, deltas)) = ensemble {
        let mut buf = Vec::new();
        write_timeseries(ens, dirs, deltas, &mut buf)?;
        written.push(write_file(dir.join("timeseries.csv"), &buf)?);
    }
    if let Some(sim) = &report.sim {
        written.push(write_file(dir.join("rates.dat"), rate_table(&sim.rates).as_bytes())?);
    }
    if let Some(fk) = &report.fk {
        let json = serde_json::to_string_pretty(fk)?;
        written.push(write_file(dir.join("fk.json"), json.as_bytes())?);
    }
    if let Some(pde) = &report.pde {
        let mut u = csv::Writer::from_writer(Vec::new());
        u.write_record(["T", "y", "u"])?;
        for (t, col) in &pde.solution {
            for (y, v) in pde.levels.iter().zip(col) {
                u.write_record([t.to_string(), y.to_string(), v.to_string()])?;
            }
        }
        written.push(write_file(dir.join("pde_u.csv"), &u.into_inner()?)?);
        let mut f = csv::Writer::from_writer(Vec::new());
        f.write_record(["T", "y_half"])?;
        for p in &pde.front {
            f.write_record([p.t.to_string(), p.y_half.map(|y| y.to_string()).unwrap_or_default()])?;
        }
        written.push(write_file(dir.join("pde_front.csv"), &f.into_inner()?)?);
    }
    Ok(written)
}
