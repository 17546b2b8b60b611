//! Exact samplers for one-dimensional Brownian local time.
//!
//! Local time is normalised as the occupation density
//! `ℓ_t(a) = lim_{ε→0} (1/2ε) ∫_0^t 1{|B_s − a| < ε} ds`, so `E_0 ℓ_t(0) = E|B_t|`.

use rand::Rng;
use rand_distr::StandardNormal;

/// Draws `(B_t, ℓ_t(0))` for a Brownian motion started at 0.
///
/// The pair has density `(ℓ+|x|)/√(2πt³) exp(−(ℓ+|x|)²/2t)`. Writing
/// `m = ℓ + |x|`, `m` is `√t` times a chi variate with three degrees of
/// freedom and, given `m`, the point `(ℓ, x)` is uniform on the two segments
/// `ℓ + |x| = m`, so `ℓ = U m` and `x = ±(1 − U) m`.
pub fn sample_bm_localtime_joint<R: Rng + ?Sized>(t: f64, rng: &mut R) -> (f64, f64) {
    assert!(t > 0.0);
    let g: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
    let m = t.sqrt() * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    let u: f64 = rng.random();
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    (sign * (1.0 - u) * m, u * m)
}

/// Local time at `level` accumulated by a Brownian bridge from `a` to `b`
/// over a time span `dt`.
///
/// Uses `P(ℓ > y | B_0 = a, B_dt = b) = exp(−[(|a−level| + |b−level| + y)² − (b−a)²] / 2dt)`
/// for `y ≥ 0`, inverted in closed form. The atom at zero (the bridge never
/// touches the level) comes out as a clipped value. When the bridge reaches
/// the level with probability below `e^{−50}` no variate is drawn.
pub fn bridge_local_time<R: Rng + ?Sized>(a: f64, b: f64, level: f64, dt: f64, rng: &mut R) -> f64 {
    let da = (a - level).abs();
    let db = (b - level).abs();
    if (da + db).powi(2) - (b - a).powi(2) > 100.0 * dt {
        return 0.0;
    }
    let e = -(1.0 - rng.random::<f64>()).ln();
    let reach = ((b - a) * (b - a) + 2.0 * dt * e).sqrt();
    (reach - da - db).max(0.0)
}

/// First hitting time of a level at distance `distance` from the start:
/// `(distance / N)²` for a standard normal `N`.
pub fn sample_hitting_time<R: Rng + ?Sized>(distance: f64, rng: &mut R) -> f64 {
    if distance == 0.0 {
        return 0.0;
    }
    let n: f64 = rng.sample(StandardNormal);
    (distance / n).powi(2)
}

/// Inverse local time at level `y` for a motion started on the level. By
/// Lévy's identity local time is a running maximum, so this is the hitting
/// time of `y`.
pub fn sample_inverse_local_time<R: Rng + ?Sized>(y: f64, rng: &mut R) -> f64 {
    sample_hitting_time(y, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bridge_crossing_forces_local_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            assert!(bridge_local_time(-0.1, 0.2, 0.0, 0.01, &mut rng) > 0.0);
        }
    }

    #[test]
    fn bridge_touch_probability() {
        // Same-side endpoints touch the level with probability e^{-2 a b / dt}.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (a, b, dt) = (0.05, 0.08, 0.01);
        let n = 200_000;
        let hits = (0..n).filter(|_| bridge_local_time(a, b, 0.0, dt, &mut rng) > 0.0).count();
        let p = (-2.0 * a * b / dt).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(((hits as f64 / n as f64) - p).abs() < 4.0 * se);
    }

    #[test]
    fn joint_sampler_local_time_is_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!((0..10_000).all(|_| sample_bm_localtime_joint(1.0, &mut rng).1 > 0.0));
    }
}
