//! Sampling-based falsification of the defining axioms.
//!
//! None of these checks can certify an axiom; a passing report only says no
//! counterexample was found among the seeded samples. A failing report always
//! carries a replayable [`Witness`].

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::extension::ExtendedOp;
use crate::op::NaryOp;
use crate::sampling::{self, non_identity_permutation, relative_tolerance, residual, PointSampler};

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Relative step a section must clear to count as strictly monotone.
pub const STRICTNESS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomKind {
    Associativity,
    Symmetry,
    Cancellativity,
    Identity,
}

impl fmt::Display for AxiomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AxiomKind::Associativity => "associativity",
            AxiomKind::Symmetry => "symmetry",
            AxiomKind::Cancellativity => "cancellativity",
            AxiomKind::Identity => "identity",
        };
        f.write_str(s)
    }
}

/// What a witness's inputs mean, enough to re-evaluate both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessDetail {
    /// Equation `i` of the associativity system: the inner application
    /// starting at position `i` versus the one starting at `i+1` (1-based).
    Associativity { equation_index: usize },
    /// `f(x)` versus `f(x∘σ)`.
    Symmetry { permutation: Vec<usize> },
    /// Section through `inputs` along `coordinate`, sampled at `lower < upper`.
    Cancellativity {
        coordinate: usize,
        lower: f64,
        upper: f64,
        direction: f64,
        threshold: f64,
    },
    /// `g(x g(y) z)` versus `g(x y z)` with `x = inputs[..prefix_len]`,
    /// `y = inputs[prefix_len..prefix_len + inner_len]`.
    Nested { prefix_len: usize, inner_len: usize },
    /// `g(g(b₁)…g(bₙ))` versus `g(b₁…bₙ)`.
    Split { block_lens: Vec<usize> },
    /// `f(x₁…xₙ)` versus the left fold of a binary operation.
    Reduction,
    /// `φ̂(f(x))` versus `Σ φ̂(xᵢ)`.
    Additivity,
    /// `φ̂⁻¹(Σ φ̂(xᵢ))` versus `f(x)`.
    Roundtrip,
    /// A computed value versus an independently known one.
    Reference,
    /// `f'(e…x…e)` versus `x` with `x` at `position`.
    Neutrality { position: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub inputs: Vec<f64>,
    pub detail: WitnessDetail,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

impl Witness {
    /// Re-evaluates the witness against `op`. Returns `None` for kinds that
    /// need more than the operation (reductions, generator checks, neutrality).
    pub fn replay(&self, op: &NaryOp) -> Option<f64> {
        let n = op.arity();
        match &self.detail {
            WitnessDetail::Associativity { equation_index } => {
                let i = *equation_index;
                if i == 0 || i >= n || self.inputs.len() != 2 * n - 1 {
                    return None;
                }
                Some(residual(nested_at(op, &self.inputs, i - 1), nested_at(op, &self.inputs, i)))
            }
            WitnessDetail::Symmetry { permutation } => {
                let permuted: Vec<f64> = permutation.iter().map(|&j| self.inputs[j]).collect();
                Some(residual(op.eval(&self.inputs), op.eval(&permuted)))
            }
            WitnessDetail::Cancellativity {
                coordinate,
                lower,
                upper,
                direction,
                threshold,
            } => {
                let mut xs = self.inputs.clone();
                xs[*coordinate] = *lower;
                let a = op.eval(&xs);
                xs[*coordinate] = *upper;
                let b = op.eval(&xs);
                Some(threshold - direction * (b - a))
            }
            WitnessDetail::Nested { prefix_len, inner_len } => {
                let g = ExtendedOp::new(op.clone());
                let (x, rest) = self.inputs.split_at(*prefix_len);
                let (y, z) = rest.split_at(*inner_len);
                g.check_nested_identity(x, y, z, 0.0).ok().map(|r| r.max_residual)
            }
            WitnessDetail::Split { block_lens } => {
                let g = ExtendedOp::new(op.clone());
                let mut blocks = Vec::with_capacity(block_lens.len());
                let mut at = 0;
                for &len in block_lens {
                    blocks.push(self.inputs.get(at..at + len)?.to_vec());
                    at += len;
                }
                g.check_split_identity(&blocks, 0.0).ok().map(|r| r.max_residual)
            }
            WitnessDetail::Reduction
            | WitnessDetail::Additivity
            | WitnessDetail::Roundtrip
            | WitnessDetail::Reference
            | WitnessDetail::Neutrality { .. } => None,
        }
    }
}

/// Outcome of one axiom or identity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub axiom: AxiomKind,
    pub check: String,
    pub pass: bool,
    pub max_residual: f64,
    pub tolerance: f64,
    pub witness: Option<Witness>,
    pub samples_used: usize,
    pub seed: u64,
}

/// Per-sample verdict feeding [`Collector`].
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub residual: f64,
    pub allowed: f64,
    pub witness: Witness,
}

/// Folds per-sample outcomes into a report; ties resolve to the earliest sample.
pub struct Collector {
    max_residual: f64,
    worst: Option<(f64, Witness)>,
    samples: usize,
}

impl Default for Collector {
    fn default() -> Self {
        Self::new()
    }
}

impl Collector {
    pub fn new() -> Self {
        Collector {
            max_residual: 0.0,
            worst: None,
            samples: 0,
        }
    }

    pub fn push(&mut self, outcome: SampleOutcome) {
        self.samples += 1;
        let r = if outcome.residual.is_nan() { f64::INFINITY } else { outcome.residual };
        if r > self.max_residual {
            self.max_residual = r;
        }
        if r > outcome.allowed {
            let excess = if outcome.allowed > 0.0 { r / outcome.allowed } else { f64::INFINITY };
            let replace = match &self.worst {
                None => true,
                Some((best, _)) => excess > *best,
            };
            if replace {
                let mut w = outcome.witness;
                w.residual = clamp_finite(w.residual);
                w.lhs = clamp_finite(w.lhs);
                w.rhs = clamp_finite(w.rhs);
                self.worst = Some((excess, w));
            }
        }
    }

    pub fn finish(self, axiom: AxiomKind, check: impl Into<String>, tolerance: f64, seed: u64) -> AxiomReport {
        AxiomReport {
            axiom,
            check: check.into(),
            pass: self.worst.is_none(),
            max_residual: clamp_finite(self.max_residual),
            tolerance,
            witness: self.worst.map(|(_, w)| w),
            samples_used: self.samples,
            seed,
        }
    }
}

/// JSON has no infinities; overflowing residuals are reported as `f64::MAX`.
pub fn clamp_finite(x: f64) -> f64 {
    if x.is_nan() || x.is_infinite() {
        if x < 0.0 {
            f64::MIN
        } else {
            f64::MAX
        }
    } else {
        x
    }
}

/// Knobs shared by the sampling checks.
#[derive(Debug, Clone, Copy)]
pub struct CheckConfig {
    pub samples: usize,
    pub seed: u64,
    pub window: f64,
    pub tol: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            samples: 500,
            seed: 0,
            window: sampling::DEFAULT_WINDOW,
            tol: DEFAULT_TOL,
        }
    }
}

/// `f(x₁…x_{s}, f(x_{s+1}…x_{s+n}), …, x_{2n−1})`, 0-based start `s`.
fn nested_at(op: &NaryOp, xs: &[f64], start: usize) -> f64 {
    let n = op.arity();
    let inner = op.eval(&xs[start..start + n]);
    let mut outer = Vec::with_capacity(n);
    outer.extend_from_slice(&xs[..start]);
    outer.push(inner);
    outer.extend_from_slice(&xs[start + n..]);
    op.eval(&outer)
}

fn associativity_outcomes(op: &NaryOp, tuple: &[f64], tol: f64) -> SampleOutcome {
    let n = op.arity();
    let values: Vec<f64> = (0..n).map(|s| nested_at(op, tuple, s)).collect();
    let mut worst: Option<SampleOutcome> = None;
    for i in 0..n - 1 {
        let (lhs, rhs) = (values[i], values[i + 1]);
        let r = residual(lhs, rhs);
        let allowed = relative_tolerance(tol, lhs, rhs);
        let ratio = |o: &SampleOutcome| if o.allowed > 0.0 { o.residual / o.allowed } else { f64::INFINITY };
        let candidate = SampleOutcome {
            residual: r,
            allowed,
            witness: Witness {
                inputs: tuple.to_vec(),
                detail: WitnessDetail::Associativity { equation_index: i + 1 },
                lhs,
                rhs,
                residual: r,
            },
        };
        if worst.as_ref().is_none_or(|w| ratio(&candidate) > ratio(w)) {
            worst = Some(candidate);
        }
    }
    worst.expect("n >= 2")
}

/// Associativity on explicit `(2n−1)`-tuples.
pub fn check_associativity_on(op: &NaryOp, tuples: &[Vec<f64>], tol: f64, seed: u64) -> AxiomReport {
    let n = op.arity();
    let outcomes: Vec<SampleOutcome> = tuples
        .par_iter()
        .map(|t| {
            assert_eq!(t.len(), 2 * n - 1, "associativity samples have 2n-1 points");
            associativity_outcomes(op, t, tol)
        })
        .collect();
    let mut c = Collector::new();
    outcomes.into_iter().for_each(|o| c.push(o));
    c.finish(AxiomKind::Associativity, "associativity", tol, seed)
}

pub fn check_associativity_with(op: &NaryOp, cfg: &CheckConfig) -> AxiomReport {
    let sampler = PointSampler::new(op.domain(), cfg.window);
    let mut rng = sampling::stream(cfg.seed, 1);
    let tuples: Vec<Vec<f64>> = (0..cfg.samples.max(1))
        .map(|_| sampler.sample_tuple(&mut rng, 2 * op.arity() - 1))
        .collect();
    check_associativity_on(op, &tuples, cfg.tol, cfg.seed)
}

/// The `n − 1` associativity equations on `samples` random `(2n−1)`-tuples.
pub fn check_associativity(op: &NaryOp, samples: usize, seed: u64) -> AxiomReport {
    check_associativity_with(
        op,
        &CheckConfig {
            samples,
            seed,
            ..CheckConfig::default()
        },
    )
}

/// Symmetry on explicit `(tuple, permutation)` pairs.
pub fn check_symmetry_on(op: &NaryOp, cases: &[(Vec<f64>, Vec<usize>)], tol: f64, seed: u64) -> AxiomReport {
    let outcomes: Vec<SampleOutcome> = cases
        .par_iter()
        .map(|(xs, perm)| {
            let permuted: Vec<f64> = perm.iter().map(|&j| xs[j]).collect();
            let (lhs, rhs) = (op.eval(xs), op.eval(&permuted));
            let r = residual(lhs, rhs);
            SampleOutcome {
                residual: r,
                allowed: relative_tolerance(tol, lhs, rhs),
                witness: Witness {
                    inputs: xs.clone(),
                    detail: WitnessDetail::Symmetry {
                        permutation: perm.clone(),
                    },
                    lhs,
                    rhs,
                    residual: r,
                },
            }
        })
        .collect();
    let mut c = Collector::new();
    outcomes.into_iter().for_each(|o| c.push(o));
    c.finish(AxiomKind::Symmetry, "symmetry", tol, seed)
}

pub fn check_symmetry_with(op: &NaryOp, cfg: &CheckConfig) -> AxiomReport {
    let n = op.arity();
    let sampler = PointSampler::new(op.domain(), cfg.window);
    let mut rng = sampling::stream(cfg.seed, 2);
    let cases: Vec<(Vec<f64>, Vec<usize>)> = (0..cfg.samples.max(1))
        .map(|_| {
            let xs = sampler.sample_tuple(&mut rng, n);
            let perm = non_identity_permutation(&mut rng, n);
            (xs, perm)
        })
        .collect();
    check_symmetry_on(op, &cases, cfg.tol, cfg.seed)
}

/// `|f(x) − f(x∘σ)|` over random tuples and random non-identity permutations.
pub fn check_symmetry(op: &NaryOp, samples: usize, seed: u64) -> AxiomReport {
    check_symmetry_with(
        op,
        &CheckConfig {
            samples,
            seed,
            ..CheckConfig::default()
        },
    )
}

fn section_outcome(op: &NaryOp, base: &[f64], coordinate: usize, grid: &[f64]) -> SampleOutcome {
    let mut xs = base.to_vec();
    let values: Vec<f64> = grid
        .iter()
        .map(|&t| {
            xs[coordinate] = t;
            op.eval(&xs)
        })
        .collect();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = STRICTNESS * (1.0 + scale);
    let first = values[0];
    let last = values[values.len() - 1];
    let direction = if last >= first { 1.0 } else { -1.0 };
    let mut worst: Option<SampleOutcome> = None;
    for j in 0..grid.len() - 1 {
        let (lhs, rhs) = (values[j], values[j + 1]);
        let step = direction * (rhs - lhs);
        let deficit = if step.is_nan() { f64::INFINITY } else { (threshold - step).max(0.0) };
        if worst.as_ref().is_none_or(|w| deficit > w.residual) {
            worst = Some(SampleOutcome {
                residual: deficit,
                allowed: 0.0,
                witness: Witness {
                    inputs: base.to_vec(),
                    detail: WitnessDetail::Cancellativity {
                        coordinate,
                        lower: grid[j],
                        upper: grid[j + 1],
                        direction,
                        threshold,
                    },
                    lhs,
                    rhs,
                    residual: threshold - step,
                },
            });
        }
    }
    worst.expect("grid has at least two points")
}

/// Strict monotonicity of every coordinate section through each base tuple.
///
/// `grid` must be increasing and hold at least three points.
pub fn check_sections(op: &NaryOp, bases: &[Vec<f64>], grid: &[f64], seed: u64) -> AxiomReport {
    assert!(grid.len() >= 3, "need at least three points per line");
    let n = op.arity();
    let jobs: Vec<(usize, usize)> = (0..bases.len()).flat_map(|b| (0..n).map(move |k| (b, k))).collect();
    let outcomes: Vec<SampleOutcome> = jobs
        .par_iter()
        .map(|&(b, k)| section_outcome(op, &bases[b], k, grid))
        .collect();
    let mut c = Collector::new();
    outcomes.into_iter().for_each(|o| c.push(o));
    c.finish(AxiomKind::Cancellativity, "cancellativity", STRICTNESS, seed)
}

pub fn check_cancellativity_with(op: &NaryOp, lines: usize, points_per_line: usize, cfg: &CheckConfig) -> AxiomReport {
    let sampler = PointSampler::new(op.domain(), cfg.window);
    let mut rng = sampling::stream(cfg.seed, 3);
    let bases: Vec<Vec<f64>> = (0..lines.max(1))
        .map(|_| sampler.sample_tuple(&mut rng, op.arity()))
        .collect();
    let grid = sampler.line_grid(points_per_line.max(3));
    check_sections(op, &bases, &grid, cfg.seed)
}

/// Falsifies cancellativity through strict monotonicity of sampled sections.
pub fn check_cancellativity(op: &NaryOp, lines: usize, points_per_line: usize, seed: u64) -> AxiomReport {
    check_cancellativity_with(
        op,
        lines,
        points_per_line,
        &CheckConfig {
            seed,
            ..CheckConfig::default()
        },
    )
}

/// Result of an idempotent scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum IdempotentScan {
    Points { points: Vec<f64> },
    AllSampledIdempotent,
}

/// Roots of `h(x) = f(xⁿ) − x`: grid points where `|h| ≤ refine_tol` plus
/// sign changes between consecutive grid points, refined by bisection.
pub fn find_idempotents(op: &NaryOp, grid: &[f64], refine_tol: f64) -> IdempotentScan {
    let h = |x: f64| op.diagonal(x) - x;
    let values: Vec<f64> = grid.iter().map(|&x| h(x)).collect();
    if !values.is_empty() && values.iter().all(|v| v.abs() <= refine_tol) {
        return IdempotentScan::AllSampledIdempotent;
    }
    let is_zero = |v: f64| v.abs() <= refine_tol;
    let mut roots: Vec<f64> = Vec::new();
    for (i, (&x, &v)) in grid.iter().zip(&values).enumerate() {
        if is_zero(v) {
            roots.push(x);
            continue;
        }
        let Some((&x1, &v1)) = grid.get(i + 1).zip(values.get(i + 1)) else {
            continue;
        };
        if is_zero(v1) || v.is_nan() || v1.is_nan() || v.signum() == v1.signum() {
            continue;
        }
        let (mut a, mut b, mut fa) = (x, x1, v);
        while b - a > refine_tol {
            let m = a + 0.5 * (b - a);
            if m <= a || m >= b {
                break;
            }
            let fm = h(m);
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        roots.push(a + 0.5 * (b - a));
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= 10.0 * refine_tol);
    IdempotentScan::Points { points: roots }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Interval;
    use crate::registry::lookup_op;

    fn cubic_fixture() -> NaryOp {
        NaryOp::new(3, Interval::real_line(), "x+y+z^2", |xs| xs[0] + xs[1] + xs[2] * xs[2])
    }

    #[test]
    fn associativity_examples() {
        let sum = lookup_op("sum", 3).unwrap();
        let r = check_associativity(&sum, 200, 1);
        assert!(r.pass);
        assert_eq!(r.max_residual, 0.0);
        assert_eq!(r.samples_used, 200);

        let alt = lookup_op("alternating", 3).unwrap();
        let r = check_associativity(&alt, 200, 1);
        assert!(r.pass, "{r:?}");

        let bad = cubic_fixture();
        let r = check_associativity_on(&bad, &[vec![0.0, 0.0, 2.0, 0.0, 0.0]], DEFAULT_TOL, 0);
        assert!(!r.pass);
        let w = r.witness.unwrap();
        assert_eq!(w.detail, WitnessDetail::Associativity { equation_index: 1 });
        assert_eq!((w.lhs, w.rhs, w.residual), (4.0, 2.0, 2.0));
        assert_eq!(w.replay(&bad), Some(2.0));

        let r = check_associativity(&bad, 100, 3);
        assert!(!r.pass);
        let w = r.witness.unwrap();
        assert_eq!(w.replay(&bad), Some(w.residual));
    }

    #[test]
    fn symmetry_examples() {
        assert!(check_symmetry(&lookup_op("product", 3).unwrap(), 300, 2).pass);
        assert!(check_symmetry(&lookup_op("sum", 2).unwrap(), 300, 2).pass);

        let alt = lookup_op("alternating", 3).unwrap();
        let r = check_symmetry_on(&alt, &[(vec![1.0, 2.0, 3.0], vec![1, 0, 2])], DEFAULT_TOL, 0);
        assert!(!r.pass);
        let w = r.witness.unwrap();
        assert_eq!((w.lhs, w.rhs, w.residual), (2.0, 4.0, 2.0));

        let r = check_symmetry(&alt, 500, 7);
        assert!(!r.pass);
        let w = r.witness.unwrap();
        assert_eq!(w.replay(&alt), Some(w.residual));
    }

    #[test]
    fn cancellativity_examples() {
        let r = check_cancellativity(&lookup_op("sum", 2).unwrap(), 50, 9, 4);
        assert!(r.pass);
        assert_eq!(r.max_residual, 0.0);
        assert_eq!(r.samples_used, 100);

        let alt = lookup_op("alternating", 3).unwrap();
        let r = check_cancellativity(&alt, 100, 9, 4);
        assert!(r.pass);
        assert_eq!(r.max_residual, 0.0);

        let mul = NaryOp::new(2, Interval::real_line(), "x*y", |xs| xs[0] * xs[1]);
        let grid: Vec<f64> = (-4..=4).map(f64::from).collect();
        let r = check_sections(&mul, &[vec![1.0, 0.0]], &grid, 0);
        assert!(!r.pass);
        let w = r.witness.unwrap();
        assert!(matches!(w.detail, WitnessDetail::Cancellativity { coordinate: 0, .. }));
        assert_eq!(w.replay(&mul), Some(w.residual));
    }

    #[test]
    fn idempotent_examples() {
        let grid: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.25).collect();
        let sum = lookup_op("sum", 2).unwrap();
        assert_eq!(find_idempotents(&sum, &grid, 1e-12), IdempotentScan::Points { points: vec![0.0] });

        let alt = lookup_op("alternating", 3).unwrap();
        assert_eq!(find_idempotents(&alt, &grid, 1e-12), IdempotentScan::AllSampledIdempotent);

        let product = lookup_op("product", 2).unwrap();
        let pos_grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.13).collect();
        let IdempotentScan::Points { points } = find_idempotents(&product, &pos_grid, 1e-12) else {
            panic!("product is not idempotent everywhere");
        };
        assert_eq!(points.len(), 1);
        assert!((points[0] - 1.0).abs() <= 1e-12);

        let shifted = lookup_op("translated_sum", 3).unwrap();
        let off_grid: Vec<f64> = (0..30).map(|i| -3.0 + i as f64 * 0.21).collect();
        let IdempotentScan::Points { points } = find_idempotents(&shifted, &off_grid, 1e-12) else {
            panic!();
        };
        assert_eq!(points.len(), 1);
        assert!((points[0] + 0.5).abs() <= 1e-12);
    }

    #[test]
    fn reports_are_deterministic() {
        let product = lookup_op("product", 3).unwrap();
        assert_eq!(check_associativity(&product, 300, 11), check_associativity(&product, 300, 11));
        let alt = lookup_op("alternating", 5).unwrap();
        assert_eq!(check_symmetry(&alt, 300, 11), check_symmetry(&alt, 300, 11));
    }

    #[test]
    fn witness_serialization_replays() {
        let bad = cubic_fixture();
        let r = check_associativity(&bad, 50, 5);
        let json = serde_json::to_string(&r).unwrap();
        let back: AxiomReport = serde_json::from_str(&json).unwrap();
        let w = back.witness.unwrap();
        assert_eq!(w.replay(&bad), Some(w.residual));
    }
}
