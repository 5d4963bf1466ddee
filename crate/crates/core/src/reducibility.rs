//! The binary semigroup beneath an Aczélian operation, and its neutral element.
//!
//! `x ◇ y = φ⁻¹(φ(x) + φ(y))` folds to `f`. When `0 ∈ J`, `e = φ⁻¹(0)` is an
//! n-ary neutral element in `I`; otherwise a fresh point with `φ′(e) = 0`
//! is adjoined.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::axioms::{check_associativity, AxiomKind, AxiomReport, Collector, SampleOutcome, Witness, WitnessDetail};
use crate::generator::{build_aczelian, validate_codomain, GeneratorError, GeneratorSpec};
use crate::interval::{ExtendedReal, Interval};
use crate::op::NaryOp;
use crate::sampling::{self, relative_tolerance, residual, PointSampler, DEFAULT_WINDOW};

/// Relative tolerance of [`verify_reduction`].
pub const REDUCTION_TOL: f64 = 1e-8;
/// Absolute tolerance of the neutrality check.
pub const NEUTRALITY_TOL: f64 = 1e-9;

/// `x ◇ y = φ⁻¹(φ(x)+φ(y))`. Fails when `J` is not closed under pairwise sums.
pub fn derive_binary(spec: &GeneratorSpec) -> Result<NaryOp, GeneratorError> {
    Ok(build_aczelian(spec, 2)?.with_label(format!("diamond[{}]", spec.label())))
}

/// Left fold `(…((x₁ ◇ x₂) ◇ x₃) …) ◇ xₘ`.
pub fn fold_left(diamond: &NaryOp, xs: &[f64]) -> f64 {
    let mut it = xs.iter().copied();
    let first = it.next().unwrap_or(f64::NAN);
    it.fold(first, |acc, x| diamond.eval(&[acc, x]))
}

/// Compares `f(x₁…xₙ)` with the left fold of `diamond` on random tuples.
pub fn verify_reduction(f: &NaryOp, diamond: &NaryOp, samples: usize, seed: u64) -> AxiomReport {
    let sampler = PointSampler::new(f.domain(), DEFAULT_WINDOW);
    let mut rng = sampling::stream(seed, 30);
    let mut c = Collector::new();
    for _ in 0..samples {
        let xs = sampler.sample_tuple(&mut rng, f.arity());
        let lhs = f.eval(&xs);
        let rhs = fold_left(diamond, &xs);
        let r = residual(lhs, rhs);
        c.push(SampleOutcome {
            residual: r,
            allowed: relative_tolerance(REDUCTION_TOL, lhs, rhs),
            witness: Witness {
                inputs: xs,
                detail: WitnessDetail::Reduction,
                lhs,
                rhs,
                residual: r,
            },
        });
    }
    c.finish(AxiomKind::Associativity, "reduction", REDUCTION_TOL, seed)
}

/// Associativity of a candidate `◇`. A left fold can match `f` without it
/// (`y − x` folds to `x₁ − x₂ + x₃`), so a reduction needs both checks.
pub fn check_diamond_associativity(diamond: &NaryOp, samples: usize, seed: u64) -> AxiomReport {
    let mut r = check_associativity(diamond, samples, seed);
    r.check = "binary associativity".into();
    r
}

/// A point of `I ∪ {e}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Point {
    Real(f64),
    Adjoined,
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Real(x) => write!(f, "{x}"),
            Point::Adjoined => f.write_str("e"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Neutral {
    /// `φ⁻¹(0)`, a point of the domain.
    Interior { value: f64 },
    /// A point outside `I`; `natural_value` is the domain end where `φ` tends to 0, if finite.
    Adjoined { natural_value: Option<f64> },
}

#[derive(Debug, Clone)]
pub struct AdjoinedStructure {
    pub base_interval: Interval,
    pub neutral: Neutral,
    pub arity: usize,
    spec: GeneratorSpec,
    /// Largest `|f′(e…x…e) − x|` over sampled `x` and every position.
    pub neutrality_residual: f64,
}

impl AdjoinedStructure {
    pub fn neutral_point(&self) -> Point {
        match self.neutral {
            Neutral::Interior { value } => Point::Real(value),
            Neutral::Adjoined { .. } => Point::Adjoined,
        }
    }

    /// `φ′`: `φ` on `I` and `0` at the adjoined point.
    pub fn extended_phi(&self, p: Point) -> f64 {
        match p {
            Point::Real(x) => self.spec.phi(x),
            Point::Adjoined => 0.0,
        }
    }

    /// `f′(p₁…pₙ) = φ′⁻¹(Σ φ′(pᵢ))`; a zero sum maps to the neutral element.
    pub fn eval(&self, ps: &[Point]) -> Point {
        let s: f64 = ps.iter().map(|&p| self.extended_phi(p)).sum();
        if s == 0.0 {
            return self.neutral_point();
        }
        Point::Real(self.spec.inverse(s).unwrap_or(f64::NAN))
    }

    pub fn neutrality_holds(&self) -> bool {
        self.neutrality_residual <= NEUTRALITY_TOL
    }
}

fn natural_neutral(spec: &GeneratorSpec) -> Option<f64> {
    let j = spec.codomain();
    let i = spec.domain();
    let zero = ExtendedReal::Finite(0.0);
    // φ tends to 0 at the end of I that maps onto the zero end of J.
    let at_high_end = if j.hi() == zero {
        spec.is_increasing()
    } else if j.lo() == zero {
        !spec.is_increasing()
    } else {
        return None;
    };
    if at_high_end { i.hi() } else { i.lo() }.finite()
}

/// Neutral element `φ⁻¹(0)` when `0 ∈ J`, otherwise a freshly adjoined one.
/// Neutrality is measured on a fixed grid with `x` in every position.
pub fn adjoin_neutral(spec: &GeneratorSpec, n: usize) -> Result<AdjoinedStructure, GeneratorError> {
    validate_codomain(spec.codomain(), n)?;
    let neutral = if spec.codomain().contains(0.0) {
        Neutral::Interior {
            value: spec.inverse(0.0)?,
        }
    } else {
        Neutral::Adjoined {
            natural_value: natural_neutral(spec),
        }
    };
    let mut s = AdjoinedStructure {
        base_interval: *spec.domain(),
        neutral,
        arity: n,
        spec: spec.clone(),
        neutrality_residual: 0.0,
    };
    let e = s.neutral_point();
    let grid = PointSampler::new(spec.domain(), DEFAULT_WINDOW).line_grid(25);
    let mut worst: f64 = 0.0;
    for &x in &grid {
        for pos in 0..n {
            let mut ps = vec![e; n];
            ps[pos] = Point::Real(x);
            let r = match s.eval(&ps) {
                Point::Real(y) => residual(y, x),
                Point::Adjoined => f64::INFINITY,
            };
            worst = worst.max(r);
        }
    }
    s.neutrality_residual = worst;
    Ok(s)
}
