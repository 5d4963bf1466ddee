//! The n-associative extension `g` of an n-ary operation `f`.
//!
//! `g` is defined on strings whose length lies in `A_n = {m : m ≡ 1 mod n−1}`
//! by left-nested substitution,
//! `g(x₁…x_m) = f(g(x₁…x_{m−n+1}), x_{m−n+2}, …, x_m)`, with `g₁ = id` and
//! `g_n = f`. For `n = 2` this is the usual left fold of a binary operation.

use std::collections::HashMap;
use std::sync::RwLock;

use rand::Rng;
use thiserror::Error;

use crate::axioms::{AxiomKind, AxiomReport, CheckConfig, Collector, SampleOutcome, Witness, WitnessDetail};
use crate::op::{ArityClass, NaryOp};
use crate::sampling::{self, relative_tolerance, residual, PointSampler, SampleRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtendError {
    #[error("string length {len} is not in A_{n} (need len = 1 mod {})", n - 1)]
    ArityClass { len: usize, n: usize },
    #[error("input {value} is outside the domain")]
    InputOutsideDomain { value: f64 },
    #[error("intermediate value {value} left the domain after {step} applications")]
    Escape { value: f64, step: usize },
    #[error("expected {n} blocks, got {got}")]
    BlockCount { n: usize, got: usize },
}

/// `g: I^(n) → I` built from `f` with the identity as unary rule.
///
/// Powers `g(cᵖ)` are memoised per base point: entry `j` of the table for
/// `c` holds `g(c^{1+j(n−1)})`, grown only by the increment rule
/// `g(c^{p+n−1}) = f(g(cᵖ), c, …, c)`. The table sits behind a lock; two
/// threads racing to grow it compute identical values.
pub struct ExtendedOp {
    base: NaryOp,
    class: ArityClass,
    powers: RwLock<HashMap<u64, Vec<f64>>>,
}

impl std::fmt::Debug for ExtendedOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExtendedOp").field("base", &self.base).finish_non_exhaustive()
    }
}

impl ExtendedOp {
    pub fn new(base: NaryOp) -> Self {
        let class = ArityClass::new(base.arity()).expect("NaryOp arity is at least 2");
        ExtendedOp {
            base,
            class,
            powers: RwLock::new(HashMap::new()),
        }
    }

    pub fn base(&self) -> &NaryOp {
        &self.base
    }

    pub fn arity(&self) -> usize {
        self.base.arity()
    }

    pub fn class(&self) -> ArityClass {
        self.class
    }

    fn check_value(&self, value: f64, step: usize) -> Result<f64, ExtendError> {
        if self.base.domain().contains(value) {
            Ok(value)
        } else {
            Err(ExtendError::Escape { value, step })
        }
    }

    /// `f(y, c, …, c)`: one more block of `n − 1` copies of `c` appended.
    #[inline]
    pub fn append_block(&self, y: f64, c: f64) -> f64 {
        let mut args = vec![c; self.arity()];
        args[0] = y;
        self.base.eval(&args)
    }

    /// Evaluates `g` on a string by the left-nested fold.
    pub fn eval(&self, xs: &[f64]) -> Result<f64, ExtendError> {
        let n = self.arity();
        if !self.class.contains(xs.len()) {
            return Err(ExtendError::ArityClass { len: xs.len(), n });
        }
        if let Some(&value) = xs.iter().find(|&&x| !self.base.domain().contains(x)) {
            return Err(ExtendError::InputOutsideDomain { value });
        }
        let mut acc = xs[0];
        let mut args = vec![0.0; n];
        for (step, chunk) in xs[1..].chunks(n - 1).enumerate() {
            args[0] = acc;
            args[1..].copy_from_slice(chunk);
            acc = self.check_value(self.base.eval(&args), step + 1)?;
        }
        Ok(acc)
    }

    /// `g(c^{1+j(n−1)})` from the memo table, growing it if needed.
    pub fn power_blocks(&self, c: f64, j: usize) -> Result<f64, ExtendError> {
        let key = c.to_bits();
        {
            let table = self.powers.read().expect("power cache poisoned");
            if let Some(v) = table.get(&key).and_then(|t| t.get(j)) {
                return Ok(*v);
            }
        }
        if !self.base.domain().contains(c) {
            return Err(ExtendError::InputOutsideDomain { value: c });
        }
        let mut table = self.powers.write().expect("power cache poisoned");
        let entry = table.entry(key).or_insert_with(|| vec![c]);
        while entry.len() <= j {
            let last = *entry.last().expect("seeded with c");
            let next = self.append_block(last, c);
            let next = self.check_value(next, entry.len())?;
            entry.push(next);
        }
        Ok(entry[j])
    }

    /// `g(cᵖ)` for `p ∈ A_n`.
    pub fn power(&self, c: f64, p: usize) -> Result<f64, ExtendError> {
        let j = self
            .class
            .depth(p)
            .ok_or(ExtendError::ArityClass { len: p, n: self.arity() })?;
        self.power_blocks(c, j)
    }

    /// Snapshot of the cached powers of `c` (entry `j` is `g(c^{1+j(n−1)})`).
    pub fn cached_powers(&self, c: f64) -> Vec<f64> {
        self.powers
            .read()
            .expect("power cache poisoned")
            .get(&c.to_bits())
            .cloned()
            .unwrap_or_default()
    }

    /// `|g(x g(y) z) − g(x y z)|` for one decomposition.
    pub fn check_nested_identity(&self, x: &[f64], y: &[f64], z: &[f64], tol: f64) -> Result<AxiomReport, ExtendError> {
        let outcome = self.nested_outcome(x, y, z, tol)?;
        let mut c = Collector::new();
        c.push(outcome);
        Ok(c.finish(AxiomKind::Identity, "nested identity", tol, 0))
    }

    fn nested_outcome(&self, x: &[f64], y: &[f64], z: &[f64], tol: f64) -> Result<SampleOutcome, ExtendError> {
        let n = self.arity();
        if !self.class.contains(y.len()) {
            return Err(ExtendError::ArityClass { len: y.len(), n });
        }
        let inner = self.eval(y)?;
        let mut substituted = Vec::with_capacity(x.len() + 1 + z.len());
        substituted.extend_from_slice(x);
        substituted.push(inner);
        substituted.extend_from_slice(z);
        let lhs = self.eval(&substituted)?;
        let flat: Vec<f64> = x.iter().chain(y).chain(z).copied().collect();
        let rhs = self.eval(&flat)?;
        let r = residual(lhs, rhs);
        Ok(SampleOutcome {
            residual: r,
            allowed: relative_tolerance(tol, lhs, rhs),
            witness: Witness {
                inputs: flat,
                detail: WitnessDetail::Nested {
                    prefix_len: x.len(),
                    inner_len: y.len(),
                },
                lhs,
                rhs,
                residual: r,
            },
        })
    }

    /// `|g(g(b₁)…g(bₙ)) − g(b₁…bₙ)|` for `n` blocks with lengths in `A_n`.
    pub fn check_split_identity(&self, blocks: &[Vec<f64>], tol: f64) -> Result<AxiomReport, ExtendError> {
        let outcome = self.split_outcome(blocks, tol)?;
        let mut c = Collector::new();
        c.push(outcome);
        Ok(c.finish(AxiomKind::Identity, "split identity", tol, 0))
    }

    fn split_outcome(&self, blocks: &[Vec<f64>], tol: f64) -> Result<SampleOutcome, ExtendError> {
        let n = self.arity();
        if blocks.len() != n {
            return Err(ExtendError::BlockCount { n, got: blocks.len() });
        }
        let reduced: Vec<f64> = blocks.iter().map(|b| self.eval(b)).collect::<Result<_, _>>()?;
        let lhs = self.eval(&reduced)?;
        let flat: Vec<f64> = blocks.iter().flatten().copied().collect();
        let rhs = self.eval(&flat)?;
        let r = residual(lhs, rhs);
        Ok(SampleOutcome {
            residual: r,
            allowed: relative_tolerance(tol, lhs, rhs),
            witness: Witness {
                inputs: flat,
                detail: WitnessDetail::Split {
                    block_lens: blocks.iter().map(Vec::len).collect(),
                },
                lhs,
                rhs,
                residual: r,
            },
        })
    }

    /// Nested identity over random decompositions with `|xyz| ≤ max_len`.
    pub fn check_nested_random(&self, cfg: &CheckConfig, max_len: usize) -> Result<AxiomReport, ExtendError> {
        let sampler = PointSampler::new(self.base.domain(), cfg.window);
        let mut rng = sampling::stream(cfg.seed, 10);
        let mut c = Collector::new();
        for _ in 0..cfg.samples.max(1) {
            let (x, y, z) = random_nested_case(&mut rng, &sampler, self.arity(), max_len);
            c.push(self.nested_outcome(&x, &y, &z, cfg.tol)?);
        }
        Ok(c.finish(AxiomKind::Identity, "nested identity", cfg.tol, cfg.seed))
    }

    /// Split identity over random block decompositions, blocks of length ≤ `max_block`.
    pub fn check_split_random(&self, cfg: &CheckConfig, max_block: usize) -> Result<AxiomReport, ExtendError> {
        let sampler = PointSampler::new(self.base.domain(), cfg.window);
        let mut rng = sampling::stream(cfg.seed, 11);
        let mut c = Collector::new();
        for _ in 0..cfg.samples.max(1) {
            let blocks = random_split_case(&mut rng, &sampler, self.arity(), max_block);
            c.push(self.split_outcome(&blocks, cfg.tol)?);
        }
        Ok(c.finish(AxiomKind::Identity, "split identity", cfg.tol, cfg.seed))
    }

    /// Evaluates `xs` under a random legal bracketing: repeatedly collapse a
    /// random window of `n` adjacent entries until one value remains.
    pub fn eval_random_nesting(&self, rng: &mut SampleRng, xs: &[f64]) -> Result<f64, ExtendError> {
        let n = self.arity();
        if !self.class.contains(xs.len()) {
            return Err(ExtendError::ArityClass { len: xs.len(), n });
        }
        let mut work = xs.to_vec();
        let mut step = 0;
        while work.len() > 1 {
            let start = rng.gen_range(0..=work.len() - n);
            let v = self.base.eval(&work[start..start + n]);
            step += 1;
            let v = self.check_value(v, step)?;
            work.splice(start..start + n, std::iter::once(v));
        }
        Ok(work[0])
    }
}

/// A random member of `A_n` no larger than `max`.
fn random_class_len(rng: &mut SampleRng, n: usize, max: usize) -> usize {
    let top = (max.max(1) - 1) / (n - 1);
    1 + rng.gen_range(0..=top) * (n - 1)
}

/// A random `(x, y, z)` with `|y| ∈ A_n`, `|xyz| ∈ A_n` and `|xyz| ≤ max_len`.
pub fn random_nested_case(
    rng: &mut SampleRng,
    sampler: &PointSampler,
    n: usize,
    max_len: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let max_len = max_len.max(n);
    // |x| + |z| ≡ 0 (mod n−1) follows from both totals lying in A_n.
    let total = random_class_len(rng, n, max_len);
    let y_len = random_class_len(rng, n, total);
    let outer = total - y_len;
    let x_len = rng.gen_range(0..=outer);
    let z_len = outer - x_len;
    (
        sampler.sample_tuple(rng, x_len),
        sampler.sample_tuple(rng, y_len),
        sampler.sample_tuple(rng, z_len),
    )
}

/// `n` random blocks with lengths in `A_n`, each at most `max_block`.
pub fn random_split_case(rng: &mut SampleRng, sampler: &PointSampler, n: usize, max_block: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let len = random_class_len(rng, n, max_block);
            sampler.sample_tuple(rng, len)
        })
        .collect()
}
