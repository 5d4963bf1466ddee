//! The n-ary operation abstraction and the arity classes `A_n`.

use std::fmt;
use std::sync::Arc;

use crate::interval::Interval;

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// An arity-`n` real operation `f: Iⁿ → I`, evaluated as a pure function.
///
/// Evaluation errors (for instance a user expression leaving its natural
/// domain) surface as non-finite values; callers that care check
/// [`NaryOp::try_eval`].
#[derive(Clone)]
pub struct NaryOp {
    arity: usize,
    domain: Interval,
    label: String,
    eval: Arc<EvalFn>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("expected {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("argument {value} is outside the domain {domain}")]
    ArgumentOutsideDomain { value: f64, domain: Interval },
    #[error("result {value} is outside the domain {domain}")]
    ResultOutsideDomain { value: f64, domain: Interval },
}

impl NaryOp {
    /// # Panics
    /// If `arity < 2`.
    pub fn new<F>(arity: usize, domain: Interval, label: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        assert!(arity >= 2, "an n-ary operation needs n >= 2");
        NaryOp {
            arity,
            domain,
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn domain(&self) -> &Interval {
        &self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_domain(mut self, domain: Interval) -> Self {
        self.domain = domain;
        self
    }

    /// Raw evaluation. `xs.len()` must equal the arity.
    #[inline]
    pub fn eval(&self, xs: &[f64]) -> f64 {
        debug_assert_eq!(xs.len(), self.arity);
        (self.eval)(xs)
    }

    /// Evaluation with arity and domain checks on inputs and output.
    pub fn try_eval(&self, xs: &[f64]) -> Result<f64, EvalError> {
        if xs.len() != self.arity {
            return Err(EvalError::Arity {
                expected: self.arity,
                got: xs.len(),
            });
        }
        if let Some(&value) = xs.iter().find(|&&x| !self.domain.contains(x)) {
            return Err(EvalError::ArgumentOutsideDomain {
                value,
                domain: self.domain,
            });
        }
        let value = (self.eval)(xs);
        if !self.domain.contains(value) {
            return Err(EvalError::ResultOutsideDomain {
                value,
                domain: self.domain,
            });
        }
        Ok(value)
    }

    /// `f(x, …, x)`
    pub fn diagonal(&self, x: f64) -> f64 {
        let xs = vec![x; self.arity];
        self.eval(&xs)
    }
}

impl fmt::Debug for NaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NaryOp")
            .field("label", &self.label)
            .field("arity", &self.arity)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

/// True iff `m ≥ 1` and `m ≡ 1 (mod n−1)`.
///
/// # Panics
/// If `n < 2`.
pub fn arity_member(m: usize, n: usize) -> bool {
    assert!(n >= 2, "arity classes are defined for n >= 2");
    m >= 1 && (m - 1).is_multiple_of(n - 1)
}

/// The set `A_n` of string lengths an `n`-ary operation can consume by
/// repeated substitution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArityClass {
    n: usize,
}

impl ArityClass {
    pub fn new(n: usize) -> Option<Self> {
        (n >= 2).then_some(ArityClass { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, m: usize) -> bool {
        arity_member(m, self.n)
    }

    /// The `j`-th member: `1 + j(n−1)`.
    pub fn nth(&self, j: usize) -> usize {
        1 + j * (self.n - 1)
    }

    /// Number of `n`-ary applications needed to reduce a string of length `m`.
    pub fn depth(&self, m: usize) -> Option<usize> {
        self.contains(m).then(|| (m - 1) / (self.n - 1))
    }
}
