//! Deterministic samplers shared by the unit tests. Kept free of external
//! RNG crates so the fixtures are stable by construction.

use crate::bracket::FMState;
use crate::curve::{compute_invariants, CurveState};
use crate::flow::FlowCoefficients;

/// splitmix64 stream mapped to [-1, 1].
pub struct TestRng {
    state: u64,
}

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng {
            state: seed.wrapping_add(0x9e3779b97f4a7c15),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1].
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    /// Uniform in [lo, hi].
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (self.unit() + 1.0) / 2.0 * (hi - lo)
    }
}

/// A well-conditioned random curve: coordinates in [-1, 1], resampled until
/// every |g_k|, |u_k| and |g_{k-1} + g_k| exceeds 0.05.
pub fn random_curve(n: usize, seed: u64) -> CurveState {
    let mut rng = TestRng::new(seed);
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.unit()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.unit()).collect();
        let c = CurveState::new(x, y).unwrap();
        let inv = compute_invariants(&c);
        let ok = inv.g.iter().all(|g| g.abs() > 0.05)
            && inv.u.iter().all(|u| u.abs() > 0.05)
            && (0..n).all(|k| (inv.g_at(k as isize - 1) + inv.g[k]).abs() > 0.05);
        if ok {
            return c;
        }
    }
}

/// A randomly perturbed regular N-gon: radii and angles jittered by up to
/// `amplitude`. Keeps g, u, a, b at O(1), which is what integration-error
/// bounds care about; the fully uniform sampler above is for algebraic
/// identities where conditioning does not matter.
pub fn perturbed_polygon(n: usize, seed: u64, amplitude: f64) -> CurveState {
    let mut rng = TestRng::new(seed);
    loop {
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for k in 0..n {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64
                + amplitude * rng.unit() / n as f64;
            let r = 1.0 + amplitude * rng.unit();
            x.push(r * theta.cos());
            y.push(r * theta.sin());
        }
        let c = CurveState::new(x, y).unwrap();
        let inv = compute_invariants(&c);
        let ok = inv.g.iter().all(|g| g.abs() > 0.1) && inv.u.iter().all(|u| u.abs() > 0.1);
        if ok {
            return c;
        }
    }
}

/// Random flow coefficients in [-1, 1].
pub fn random_flow(n: usize, seed: u64) -> FlowCoefficients {
    let mut rng = TestRng::new(seed);
    let alpha = (0..n).map(|_| rng.unit()).collect();
    let beta = (0..n).map(|_| rng.unit()).collect();
    FlowCoefficients::new(alpha, beta).unwrap()
}

/// Random FM state with a ∈ [0.5, 2] and b ∈ [-1, 1].
pub fn random_fm_state(n: usize, lambda: f64, seed: u64) -> FMState {
    let mut rng = TestRng::new(seed);
    let a = (0..n).map(|_| rng.range(0.5, 2.0)).collect();
    let b = (0..n).map(|_| rng.unit()).collect();
    FMState::new(a, b, lambda).unwrap()
}
