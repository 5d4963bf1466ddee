//! Seeded sampling of domain points.
//!
//! Every random stream is a ChaCha8 generator keyed by the run seed and a
//! stream id, so a single seed fans out into independent reproducible streams.
//! Points are snapped to a dyadic lattice of spacing 2⁻²⁰: short sums and
//! differences of lattice points are then exact in `f64`, which keeps the
//! residuals of exactly associative operations at zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::interval::Interval;

/// Default half-width of the compact sampling window for unbounded domains.
pub const DEFAULT_WINDOW: f64 = 10.0;

const LATTICE: f64 = 1_048_576.0; // 2^20

pub type SampleRng = ChaCha8Rng;

pub fn stream(seed: u64, stream_id: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Draws points from `domain ∩ [-window, window]`.
#[derive(Debug, Clone, Copy)]
pub struct PointSampler {
    lo: f64,
    hi: f64,
    domain: Interval,
}

impl PointSampler {
    pub fn new(domain: &Interval, window: f64) -> Self {
        let w = domain.window(window);
        PointSampler {
            lo: w.lo_f64(),
            hi: w.hi_f64(),
            domain: *domain,
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn sample(&self, rng: &mut SampleRng) -> f64 {
        for _ in 0..64 {
            let u: f64 = rng.gen();
            let raw = self.lo + (self.hi - self.lo) * u;
            let snapped = (raw * LATTICE).round() / LATTICE;
            if self.domain.contains(snapped) && snapped >= self.lo && snapped <= self.hi {
                return snapped;
            }
            if self.domain.contains(raw) {
                return raw;
            }
        }
        // Windows narrower than the lattice spacing: fall back to the midpoint.
        0.5 * (self.lo + self.hi)
    }

    pub fn sample_tuple(&self, rng: &mut SampleRng, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.sample(rng)).collect()
    }

    /// `count` increasing points strictly inside the window.
    pub fn line_grid(&self, count: usize) -> Vec<f64> {
        let span = self.hi - self.lo;
        (1..=count)
            .map(|i| self.lo + span * i as f64 / (count + 1) as f64)
            .collect()
    }
}

/// A uniformly random permutation of `0..n` other than the identity (`n ≥ 2`).
pub fn non_identity_permutation(rng: &mut SampleRng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..n).collect();
    if n < 2 {
        return perm;
    }
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().any(|(i, &p)| i != p) {
            return perm;
        }
    }
}

/// Relative tolerance scale used by every residual check: `tol·(1+|a|+|b|)`.
pub fn relative_tolerance(tol: f64, a: f64, b: f64) -> f64 {
    tol * (1.0 + a.abs() + b.abs())
}

/// Residual that treats non-finite evaluations as infinitely bad.
pub fn residual(a: f64, b: f64) -> f64 {
    let r = (a - b).abs();
    if r.is_nan() {
        f64::INFINITY
    } else {
        r
    }
}
