use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Support {
    /// Finitely many support points `n ≥ 1` with their cumulative weights.
    Finite { sizes: Vec<u32>, probs: Vec<f64>, cumulative: Vec<f64> },
    /// `p_n = (1 − q) q^{n−1}` for `n ≥ 1`.
    Geometric { ratio: f64 },
}

/// Spatially constant offspring distribution `{p_n}_{n ≥ 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffspringLaw {
    support: Support,
    mean: f64,
    llogl: bool,
}

impl OffspringLaw {
    pub fn binary() -> Self {
        Self::finite(&[(2, 1.0)]).expect("valid")
    }

    /// Builds a law from `(n, p_n)` pairs. Every `n` must be at least 1 and
    /// the probabilities must sum to 1 within 1e−12.
    pub fn finite(pairs: &[(u32, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidOffspring("empty support".into()));
        }
        let mut pairs = pairs.to_vec();
        pairs.sort_by_key(|p| p.0);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidOffspring(format!("offspring size {} listed twice", w[0].0)));
            }
        }
        for &(n, p) in &pairs {
            if n == 0 {
                return Err(Error::InvalidOffspring(
                    "p_0 must vanish: every particle leaves at least one child".into(),
                ));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidOffspring(format!("p_{n} = {p} is not a probability")));
            }
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidOffspring(format!("probabilities sum to {total}")));
        }
        let mean = pairs.iter().map(|&(n, p)| n as f64 * p).sum();
        let mut acc = 0.0;
        let cumulative = pairs
            .iter()
            .map(|p| {
                acc += p.1;
                acc
            })
            .collect();
        Ok(Self {
            support: Support::Finite {
                sizes: pairs.iter().map(|p| p.0).collect(),
                probs: pairs.iter().map(|p| p.1).collect(),
                cumulative,
            },
            mean,
            llogl: true,
        })
    }

    /// `p_n = (1 − q) q^{n−1}`; `q = 1/2` gives `p_n = 2^{−n}`.
    pub fn geometric(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidOffspring(format!("geometric ratio {ratio} not in (0, 1)")));
        }
        // Σ n log n q^{n−1} converges for every q < 1 (ratio test).
        Ok(Self { support: Support::Geometric { ratio }, mean: 1.0 / (1.0 - ratio), llogl: true })
    }

    /// Expected number of children `Q = Σ n p_n`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Whether `Σ (n log n) p_n < ∞`.
    pub fn llogl_finite(&self) -> bool {
        self.llogl
    }

    pub fn is_binary(&self) -> bool {
        matches!(&self.support, Support::Finite { sizes, .. } if sizes == &[2])
    }

    pub fn prob(&self, n: u32) -> f64 {
        match &self.support {
            Support::Finite { sizes, probs, .. } => {
                sizes.iter().position(|&s| s == n).map_or(0.0, |i| probs[i])
            }
            Support::Geometric { ratio } => {
                if n == 0 {
                    0.0
                } else {
                    (1.0 - ratio) * ratio.powi(n as i32 - 1)
                }
            }
        }
    }

    /// Probability generating function `Σ p_n u^n` on `[0, 1]`.
    pub fn generating_function(&self, u: f64) -> f64 {
        match &self.support {
            Support::Finite { sizes, probs, .. } => {
                sizes.iter().zip(probs).map(|(&n, &p)| p * u.powi(n as i32)).sum()
            }
            Support::Geometric { ratio } => (1.0 - ratio) * u / (1.0 - ratio * u),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match &self.support {
            Support::Finite { sizes, cumulative, .. } => {
                if sizes.len() == 1 {
                    return sizes[0];
                }
                let u: f64 = rng.random();
                let idx = cumulative.partition_point(|&c| c <= u);
                sizes[idx.min(sizes.len() - 1)]
            }
            Support::Geometric { ratio } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                1 + (u.ln() / ratio.ln()).floor() as u32
            }
        }
    }
}
