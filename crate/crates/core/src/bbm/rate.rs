use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Least-squares slope over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub theory: Option<f64>,
}

impl RateFit {
    pub fn with_theory(mut self, theory: f64) -> Self {
        self.theory = Some(theory);
        self
    }

    /// `|slope − theory| ≤ tol`; false without a theory value.
    pub fn within(&self, tol: f64) -> bool {
        self.theory.is_some_and(|th| (self.slope - th).abs() <= tol)
    }
}

fn window_points(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    assert_eq!(times.len(), values.len(), "times and values differ in length");
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 - 1e-9 && **t <= window.1 + 1e-9)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::EmptyWindow(window.0, window.1));
    }
    Ok(pts)
}

fn ols(pts: &[(f64, f64)], window: (f64, f64)) -> RateFit {
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let stderr = if pts.len() > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (rss / (n - 2.0) / stt).sqrt()
    } else {
        0.0
    };
    RateFit { slope, intercept, stderr, window, theory: None }
}

/// Slope of `log(values)` against `times` over `window`.
pub fn estimate_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<RateFit> {
    let pts = window_points(times, values, window)?;
    if let Some(&(time, value)) = pts.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::NonPositiveSeries { time, value });
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(t, v)| (t, v.ln())).collect();
    Ok(ols(&logs, window))
}

/// Slope of `values` against `times` over `window`.
pub fn fit_linear(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<RateFit> {
    Ok(ols(&window_points(times, values, window)?, window))
}

/// Delete-a-group jackknife: `estimate` is evaluated on all replicas but
/// those with `index % groups == g`, for each `g`. Returns the full-sample
/// estimate and its standard error.
pub fn jackknife<F>(n: usize, groups: usize, mut estimate: F) -> Result<(f64, f64)>
where
    F: FnMut(&dyn Fn(usize) -> bool) -> Result<f64>,
{
    let groups = groups.min(n);
    if groups < 2 {
        return Err(Error::InvalidParameter(format!("jackknife needs 2 groups, have {groups}")));
    }
    let full = estimate(&|_| true)?;
    let mut leave_out = Vec::with_capacity(groups);
    for g in 0..groups {
        leave_out.push(estimate(&move |i| i % groups != g)?);
    }
    let mean = leave_out.iter().sum::<f64>() / groups as f64;
    let var = leave_out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (groups as f64 - 1.0) / groups as f64;
    Ok((full, var.sqrt()))
}
