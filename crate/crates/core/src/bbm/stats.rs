use serde::{Deserialize, Serialize};

use crate::point::{self, Point};
use crate::spectral::Eigenfunction;

/// What to measure at each record time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    /// Speeds `δ` for the counts `Z_t^{δt}` beyond `|x| ≥ δt`.
    pub deltas: Vec<f64>,
    /// Unit directions `r` for `L_t^r` and the half-space counts.
    pub directions: Vec<Point>,
    /// `(λ, h)` for the martingale `M_t = e^{λt} Σ_k h(B_t^k)`.
    pub ground_state: Option<(f64, Eigenfunction)>,
}

/// Population statistics at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    /// `Z_t`.
    pub z: u64,
    /// `L_t = max_k |B_t^k|`.
    pub l: f64,
    /// Rightmost particle, on the line only.
    pub r: Option<f64>,
    /// `L_t^r = max_k ⟨B_t^k, r⟩` per direction.
    pub lr: Vec<f64>,
    /// Position of the particle attaining `L_t^r`.
    pub argmax: Vec<Point>,
    /// `Z_t^{δt}` per `δ`.
    pub zd: Vec<u64>,
    /// `#{k : ⟨B_t^k, r⟩ ≥ δt}`, indexed `[direction][delta]`.
    pub zdr: Vec<Vec<u64>>,
    pub m: Option<f64>,
}

impl Record {
    pub fn observe<'a>(t: f64, dim: usize, positions: impl IntoIterator<Item = &'a Point>, obs: &Observables) -> Self {
        let nd = obs.directions.len();
        let mut rec = Record {
            t,
            z: 0,
            l: 0.0,
            r: (dim == 1).then_some(f64::NEG_INFINITY),
            lr: vec![f64::NEG_INFINITY; nd],
            argmax: vec![point::ORIGIN; nd],
            zd: vec![0; obs.deltas.len()],
            zdr: vec![vec![0; obs.deltas.len()]; nd],
            m: None,
        };
        let mut h_sum = 0.0;
        for x in positions {
            rec.z += 1;
            let norm = point::norm(x);
            rec.l = rec.l.max(norm);
            if let Some(r) = rec.r.as_mut() {
                *r = r.max(x[0]);
            }
            for (j, d) in obs.deltas.iter().enumerate() {
                if norm >= d * t {
                    rec.zd[j] += 1;
                }
            }
            for (i, dir) in obs.directions.iter().enumerate() {
                let proj = point::dot(x, dir);
                if proj > rec.lr[i] {
                    rec.lr[i] = proj;
                    rec.argmax[i] = *x;
                }
                for (j, d) in obs.deltas.iter().enumerate() {
                    if proj >= d * t {
                        rec.zdr[i][j] += 1;
                    }
                }
            }
            if let Some((_, h)) = &obs.ground_state {
                h_sum += h.eval(x);
            }
        }
        if let Some((lambda, _)) = &obs.ground_state {
            rec.m = Some((lambda * t).exp() * h_sum);
        }
        rec
    }
}

/// Everything recorded along one replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub records: Vec<Record>,
    pub branch_events: u64,
    pub first_branch: Option<f64>,
    pub last_branch: Option<f64>,
    /// Time at which the population cap stopped the replica.
    pub terminated: Option<f64>,
}

impl TrajectoryStats {
    pub fn at(&self, t: f64) -> Option<&Record> {
        self.records.iter().find(|r| (r.t - t).abs() < 1e-9)
    }

    /// No branch event after `t` up to the end of the run.
    pub fn quiet_after(&self, t: f64) -> bool {
        self.last_branch.is_none_or(|last| last <= t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observe_counts_and_extremes() {
        let obs = Observables {
            deltas: vec![0.5, 1.0],
            directions: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            ground_state: None,
        };
        let pts = [[1.0, 0.0, 0.0], [-3.0, 0.5, 0.0], [0.2, 2.0, 0.0]];
        let rec = Record::observe(2.0, 2, &pts, &obs);
        assert_eq!(rec.z, 3);
        assert!((rec.l - (9.25f64).sqrt()).abs() < 1e-15);
        assert_eq!(rec.r, None);
        assert_eq!(rec.zd, vec![3, 2]);
        assert_eq!(rec.lr, vec![1.0, 2.0]);
        assert_eq!(rec.argmax[1], [0.2, 2.0, 0.0]);
        assert_eq!(rec.zdr, vec![vec![1, 0], vec![1, 1]]);
        for (i, dir) in obs.directions.iter().enumerate() {
            assert!(rec.l >= point::dot(&rec.argmax[i], dir).abs());
        }
    }

    #[test]
    fn martingale_term() {
        let obs = Observables {
            ground_state: Some((-0.5, Eigenfunction::SingleDirac { c: 1.0, location: 0.0 })),
            ..Default::default()
        };
        let rec = Record::observe(2.0, 1, &[[0.0; 3], [1.0, 0.0, 0.0]], &obs);
        assert!((rec.m.unwrap() - (-1.0f64).exp() * (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(rec.r, Some(1.0));
    }
}
